use clap::Parser;

use mcnoma::cli::{run, Cli};

fn main() -> anyhow::Result<()> {
    run(Cli::parse())
}
