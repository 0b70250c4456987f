use clap::Parser;

fn main() {
    std::process::exit(dyadlab_cli::run(dyadlab_cli::Cli::parse()));
}
