package demo.soap;

import javax.jws.WebMethod;
import javax.jws.WebService;
import javax.xml.bind.annotation.XmlRootElement;

@WebService
public class Quotes {
    @WebMethod
    public String quote(String symbol) {
        return symbol;
    }

    @XmlRootElement
    public static class Quote {
    }
}
