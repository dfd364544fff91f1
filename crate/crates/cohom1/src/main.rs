use clap::Parser;

fn main() {
    let cli = cohom1::cli::Cli::parse();
    std::process::exit(cohom1::cli::run_cli(cli) as i32);
}
