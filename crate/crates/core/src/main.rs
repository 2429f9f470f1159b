use clap::Parser;

fn main() {
    let cli = gamma_dpp::cli::Cli::parse();
    std::process::exit(gamma_dpp::cli::run(cli));
}
