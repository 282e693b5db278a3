use clap::Parser;

fn main() {
    let cli = demonsim::app::Cli::parse();
    if let Err(err) = demonsim::app::run(cli) {
        eprintln!("error: {err}");
        std::process::exit(err.exit_code());
    }
}
