use clap::Parser;

fn main() {
    let cli = llg1d::cli::Cli::parse();
    std::process::exit(llg1d::cli::run(cli));
}
