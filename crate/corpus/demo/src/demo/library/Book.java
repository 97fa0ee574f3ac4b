package demo.library;

public class Book {
    String title;
    String author;
    int pages;
    Price price;

    public Book(String title, String author, int pages, Price price) {
        this.title = title;
        this.author = author;
        this.pages = pages;
        this.price = price;
    }

    public String getTitle() {
        return title;
    }

    public boolean isLong() {
        return pages > 300;
    }

    public String label() {
        return title + " (" + price.format() + ")";
    }
}
