class Outer {
    static class Inner {
        class Deep {
        }
    }

    Runnable make() {
        return new Runnable() {
            @Override
            public void run() {
            }
        };
    }
}
