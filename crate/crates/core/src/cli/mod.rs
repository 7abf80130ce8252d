//! Config-driven batch runner behind the `bitraj` binary.

pub mod config;
pub mod execute;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use crate::biprob::Limits;
use crate::error::Result;
pub use config::{parse_config, parse_config_str, ExperimentConfig};
pub use execute::{execute, Report, RunOptions, Verb};

#[derive(Debug, Parser)]
#[command(name = "bitraj", about = "Bi-trajectory bi-probabilities and their phenomenology")]
pub struct Args {
    pub verb: Verb,
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Caps worker threads; results do not depend on it.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Lifts the table-size guard.
    #[arg(long)]
    pub force_large: bool,
}

/// Parses, executes and writes `report.json` plus any CSV artifacts.
pub fn run(args: &Args) -> Result<Report> {
    let cfg = parse_config(&args.config)?;
    let limits = if args.force_large { Limits::unlimited() } else { Limits::from_env() };
    let opts = RunOptions { limits };
    let report = match args.threads {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| crate::Error::InvalidArgument(format!("thread pool: {e}")))?
            .install(|| execute(&cfg, args.verb, &opts))?,
        None => execute(&cfg, args.verb, &opts)?,
    };
    std::fs::create_dir_all(&args.out)?;
    std::fs::write(args.out.join("report.json"), serde_json::to_vec_pretty(&report.json)?)?;
    for a in &report.artifacts {
        std::fs::write(args.out.join(&a.name), &a.bytes)?;
    }
    Ok(report)
}

/// Exit 0 when every contract holds, 1 when one fails, 2 on errors.
pub fn main_with(args: Args) -> ExitCode {
    match run(&args) {
        Ok(report) => {
            let failed: Vec<_> = report.contracts.iter().filter(|c| !c.pass).collect();
            println!(
                "{}: {} ({}/{} contracts hold)",
                args.verb.name(),
                if report.pass { "PASS" } else { "FAIL" },
                report.contracts.len() - failed.len(),
                report.contracts.len()
            );
            for c in failed {
                println!("  {} = {:e} violates {} {:e}", c.name, c.value, c.relation, c.bound);
            }
            if report.pass {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
