package demo.library;

public class Price {
    double amount;
    String currency;

    public Price(double amount, String currency) {
        this.amount = amount;
        this.currency = currency;
    }

    public String format() {
        return String.format("%.2f %s", amount, currency);
    }

    public double inEuro(double rate) {
        if (currency.equals("EUR")) {
            return amount;
        }
        return amount * rate;
    }
}
