abstract class Animal {
    abstract String sound();
}

class Dog extends Animal {
    Dog() {
        super();
    }

    @Override
    String sound() {
        return "woof";
    }
}
