use std::process::ExitCode;

use clap::Parser;
use pacte_cli::{run, Cli, StageStatus};

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(stages) => {
            for s in stages {
                let status = match s.status {
                    StageStatus::Cached => "cached",
                    StageStatus::Computed => "done",
                };
                println!("{:<24} {status}", s.name);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
