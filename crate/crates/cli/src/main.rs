use clap::Parser;
use field_triple_cli::config::Args;

fn main() {
    std::process::exit(field_triple_cli::execute(Args::parse()));
}
