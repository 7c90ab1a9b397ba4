package demo.io;

import java.io.BufferedWriter;
import java.io.FileWriter;
import java.io.IOException;

public class Logger {
    public void log(String path, String msg) throws IOException {
        System.out.println(msg);
        try (BufferedWriter w = new BufferedWriter(new FileWriter(path))) {
            w.write(msg);
        }
    }
}
