use clap::Parser;

fn main() {
    let cli = topoforge::cli::Cli::parse();
    std::process::exit(topoforge::cli::run(&cli));
}
