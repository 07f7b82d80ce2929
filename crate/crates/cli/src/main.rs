use clap::Parser;

fn main() {
    let cli = smallgain_cli::Cli::parse();
    std::process::exit(smallgain_cli::run(&cli).code());
}
