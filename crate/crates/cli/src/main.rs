use std::process::ExitCode;

use blockcampus_cli::{run, Cli, Rejected};
use clap::Parser;
use serde_json::json;
use tracing_subscriber::EnvFilter;

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let as_json = cli.json;
    match run(cli) {
        Ok(out) if as_json => {
            println!("{}", out.json);
            ExitCode::SUCCESS
        }
        Ok(out) => {
            println!("{}", out.text);
            ExitCode::SUCCESS
        }
        Err(e) => {
            if as_json {
                let reason = e.downcast_ref::<Rejected>().map(|r| r.reason.clone());
                println!("{}", json!({ "error": format!("{e:#}"), "reason": reason }));
            } else {
                eprintln!("error: {e:#}");
            }
            ExitCode::FAILURE
        }
    }
}
