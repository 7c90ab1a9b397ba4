package demo.time;

import java.time.Duration;
import java.time.LocalDate;
import java.time.ZonedDateTime;
import java.time.format.DateTimeFormatter;
import java.time.temporal.ChronoUnit;

public class Calendar {
    public String nextWeek() {
        LocalDate today = LocalDate.now();
        LocalDate next = today.plus(1, ChronoUnit.WEEKS);
        Duration d = Duration.ofHours(2);
        return next.format(DateTimeFormatter.ISO_DATE) + d;
    }

    public ZonedDateTime now() {
        return ZonedDateTime.now();
    }
}
