use clap::Parser;

fn main() {
    let cli = smelldata_cli::Cli::parse();
    smelldata_cli::init_logging(cli.verbose);
    if let Err(e) = smelldata_cli::execute(&cli) {
        eprintln!("smelldata: {e}");
        std::process::exit(e.exit_code());
    }
}
