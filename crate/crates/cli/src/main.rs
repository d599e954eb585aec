use clap::Parser;

fn main() {
    let cli = bivex_cli::Cli::parse();
    std::process::exit(bivex_cli::run(&cli));
}
