use clap::Parser;

fn main() {
    let cli = arraylab::cli::Cli::parse();
    std::process::exit(arraylab::cli::run(&cli));
}
