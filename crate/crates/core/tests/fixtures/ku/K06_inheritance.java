package demo.shapes;

public abstract class Shape {
    public abstract double area();

    public static double totalArea() {
        Shape s = new Circle(2.0);
        Circle c = (Circle) s;
        return s.area() + c.area();
    }
}

class Circle extends Shape {
    private final double r;

    Circle(double r) {
        super();
        this.r = r;
    }

    @Override
    public double area() {
        return Math.PI * r * r;
    }

    @Override
    public String toString() {
        return super.toString() + r;
    }
}
