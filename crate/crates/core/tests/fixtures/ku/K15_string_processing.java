package demo.text;

import java.util.regex.Matcher;
import java.util.regex.Pattern;

public class Parser {
    private static final Pattern NUMBER = Pattern.compile("[0-9]+");

    public String describe(String input) {
        StringBuilder sb = new StringBuilder();
        String head = input.substring(0, input.indexOf(':'));
        Matcher m = NUMBER.matcher(input);
        if (m.find()) {
            sb.append(Integer.parseInt(m.group()));
        }
        return String.format("%s=%s", head, sb);
    }
}
