use clap::Parser;

use lcirt::cli::{run, Cli};

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Err(failure) = run(&cli) {
        eprintln!("error: {failure}");
        std::process::exit(failure.exit_code());
    }
}
