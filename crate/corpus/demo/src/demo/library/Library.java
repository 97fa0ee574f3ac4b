package demo.library;

import java.util.ArrayList;
import java.util.List;

public class Library {
    private final List<Book> books = new ArrayList<>();
    private String name;
    private int visits;

    public Library(String name) {
        this.name = name;
    }

    public void add(Book book) {
        books.add(book);
        log("added " + book.getTitle());
    }

    public int totalPages() {
        int total = 0;
        for (Book b : books) {
            total += b.pages;
        }
        return total;
    }

    public String report() {
        visits++;
        StringBuilder sb = new StringBuilder();
        sb.append("Library ").append(name).append('\n');
        int pages = totalPages();
        sb.append("pages: ").append(pages).append('\n');
        printSummary(sb);
        return sb.toString();
    }

    private void printSummary(StringBuilder sb) {
        for (Book b : books) {
            sb.append(b.getTitle());
            sb.append(" by ");
            sb.append(b.author);
            sb.append('\n');
        }
    }

    public double lateFee(Book book, int days) {
        double base = book.price.amount * 0.01;
        if (book.price.currency.equals("EUR")) {
            base = base * 1.1;
        }
        return base * days + book.pages / 100;
    }

    public String audit(int year) {
        StringBuilder out = new StringBuilder();
        out.append("Audit ").append(year).append(" for ").append(name).append('\n');
        int longBooks = 0;
        int shortBooks = 0;
        for (Book b : books) {
            if (b.isLong()) {
                longBooks++;
            } else {
                shortBooks++;
            }
        }
        out.append("long: ").append(longBooks).append('\n');
        out.append("short: ").append(shortBooks).append('\n');
        checkShelves(out, year);
        out.append("visits: ").append(visits).append('\n');
        out.append("end of audit").append('\n');
        return out.toString();
    }

    private void checkShelves(StringBuilder out, int year) {
        int missingAuthors = 0;
        int untitled = 0;
        for (Book b : books) {
            if (b.author == null || b.author.isEmpty()) {
                missingAuthors++;
            }
            if (b.getTitle() == null) {
                untitled++;
            }
        }
        if (missingAuthors > 0) {
            out.append("missing authors: ").append(missingAuthors).append('\n');
        }
        if (untitled > 0) {
            out.append("untitled: ").append(untitled).append('\n');
        }
        out.append("checked in ").append(year).append('\n');
    }

    private void log(String msg) {
        System.out.println(name + ": " + msg);
    }
}
