use clap::Parser;
use latwalk_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("latwalk: {e}");
        std::process::exit(e.exit_code());
    }
}
