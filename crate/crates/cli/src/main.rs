use clap::Parser;

fn main() {
    let cli = hopcpt::cli::Cli::parse();
    std::process::exit(hopcpt::cli::run(cli));
}
