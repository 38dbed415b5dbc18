use clap::Parser;

fn main() {
    std::process::exit(coxpricer::cli::run(coxpricer::cli::Cli::parse()));
}
