use clap::Parser;

fn main() {
    let cli = omk::cli::Cli::parse();
    std::process::exit(omk::cli::execute(&cli));
}
