package fx;

public abstract class Base {
    protected int id;
    protected String tag = "base";

    public abstract String describe();

    protected void touch() {
        // marks the entity
        tag = tag + "/*";
    }
}
