use std::io::{self, IsTerminal};

use anyhow::Context;
use clap::Parser;
use tracing_subscriber::EnvFilter;

use kwgen_cli::{execute, Cli};

fn init_logging(quiet: bool) -> anyhow::Result<()> {
    let default = if quiet { "error" } else { "warn" };
    let filter = EnvFilter::try_from_env("KWGEN_LOG").unwrap_or_else(|_| EnvFilter::new(default));
    tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(io::stderr)
        .with_ansi(io::stderr().is_terminal())
        .try_init()
        .map_err(|e| anyhow::anyhow!(e))
        .context("installing the log subscriber")
}

fn main() {
    let cli = Cli::parse();
    if let Err(e) = init_logging(cli.quiet) {
        eprintln!("warning: {e:#}");
    }
    let mut stdout = io::stdout().lock();
    if let Err(e) = execute(&cli, &mut stdout) {
        eprintln!("error: {e}");
        std::process::exit(e.exit_code());
    }
}
