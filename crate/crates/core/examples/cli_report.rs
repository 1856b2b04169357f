//! Drives the batch front end in-process and prints the JSON report.
use clap::Parser;
use potts3d::cli::{run, Cli, RunConfig};

fn main() -> potts3d::Result<()> {
    let cli = Cli::parse_from(["potts3d", "barrier", "--lattice", "2x2x3", "--boundary", "open"]);
    let cfg = RunConfig::resolve(cli.command, cli.opts, Some("limit-states=1e6"))?;
    let report = run(cfg)?;
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}
