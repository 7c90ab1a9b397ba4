package demo.functions;

import java.util.function.BiFunction;
import java.util.function.IntPredicate;
import java.util.function.Predicate;
import java.util.function.UnaryOperator;

public class Filters {
    private final Predicate<String> nonEmpty = s -> !s.isEmpty();
    private final IntPredicate even = i -> i % 2 == 0;
    private final BiFunction<Integer, Integer, Integer> add = (a, b) -> a + b;
    private final UnaryOperator<String> upper = String::toUpperCase;

    @FunctionalInterface
    interface Check {
        boolean test(int x);
    }
}
