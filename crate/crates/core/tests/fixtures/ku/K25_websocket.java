package demo.ws;

import java.io.IOException;
import javax.websocket.OnMessage;
import javax.websocket.Session;
import javax.websocket.server.ServerEndpoint;

@ServerEndpoint("/echo")
public class Echo {
    @OnMessage
    public void onMessage(String msg, Session session) throws IOException {
        session.getBasicRemote().sendText(msg);
    }
}
