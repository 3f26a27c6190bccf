use clap::Parser;
use transverse_cli::{run_parsed, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run_parsed(&cli) {
        eprintln!("td: {e}");
        std::process::exit(e.exit_code());
    }
}
