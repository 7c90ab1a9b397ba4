class Retry {
    void run() {
        try {
            work();
        } catch (IllegalStateException e) {
            log(e);
        }
        try {
            work();
        } finally {
            done();
        }
    }
}
