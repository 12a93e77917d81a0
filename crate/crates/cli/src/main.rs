use clap::Parser;

fn main() {
    let cli = shiftbench_cli::Cli::parse();
    if let Err(e) = shiftbench_cli::run(cli) {
        eprintln!("shiftbench: {e}");
        std::process::exit(e.exit_code());
    }
}
