use clap::Parser;

fn main() {
    let cli = lrl_cli::Cli::parse();
    if let Err(e) = lrl_cli::run(cli) {
        eprintln!("lrl: {e}");
        std::process::exit(e.exit_code());
    }
}
