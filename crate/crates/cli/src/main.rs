//! `viscopt` — optimal external damper viscosities for linear vibrational
//! systems. Configuration-driven batch runs; see `--help` and the repository
//! README for the config schema.
//!
//! Exit codes: 0 success, 1 validation error, 2 numerical failure.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use commands::RunError;
use config::OutputFormat;

const USAGE: &str = "usage: viscopt --config PATH [--out PATH] [--threads N] [--format table|records]";

struct Flags {
    config: PathBuf,
    out: Option<PathBuf>,
    threads: Option<usize>,
    format: Option<OutputFormat>,
}

fn parse_flags(args: &[String]) -> Result<Flags, String> {
    let mut config = None;
    let mut out = None;
    let mut threads = None;
    let mut format = None;
    let mut it = args.iter();
    while let Some(arg) = it.next() {
        match arg.as_str() {
            "--config" => {
                config = Some(PathBuf::from(
                    it.next().ok_or("--config needs a path")?,
                ))
            }
            "--out" => out = Some(PathBuf::from(it.next().ok_or("--out needs a path")?)),
            "--threads" => {
                threads = Some(
                    it.next()
                        .ok_or("--threads needs a count")?
                        .parse::<usize>()
                        .map_err(|_| "--threads needs a positive integer".to_string())?,
                )
            }
            "--format" => {
                format = Some(match it.next().ok_or("--format needs table|records")?.as_str() {
                    "table" => OutputFormat::Table,
                    "records" => OutputFormat::Records,
                    other => return Err(format!("unknown format '{other}'")),
                })
            }
            "--help" | "-h" => return Err(USAGE.to_string()),
            other => return Err(format!("unknown flag '{other}'\n{USAGE}")),
        }
    }
    Ok(Flags {
        config: config.ok_or(format!("--config is required\n{USAGE}"))?,
        out,
        threads,
        format,
    })
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let flags = match parse_flags(&args) {
        Ok(f) => f,
        Err(msg) => {
            eprintln!("{msg}");
            return ExitCode::from(1);
        }
    };
    let mut cfg = match config::load(&flags.config) {
        Ok(c) => c,
        Err(errors) => {
            eprintln!("invalid configuration ({} problem(s)):", errors.len());
            for e in &errors {
                eprintln!("  - {e}");
            }
            return ExitCode::from(1);
        }
    };
    // flags override config
    if flags.out.is_some() {
        cfg.out = flags.out;
    }
    if flags.threads.is_some() {
        cfg.threads = flags.threads;
    }
    if let Some(f) = flags.format {
        cfg.format = f;
    }

    let run_it = || commands::run(&cfg);
    let result = match cfg.threads {
        Some(t) if t > 0 => {
            let pool = match rayon::ThreadPoolBuilder::new().num_threads(t).build() {
                Ok(p) => p,
                Err(e) => {
                    eprintln!("cannot build thread pool: {e}");
                    return ExitCode::from(1);
                }
            };
            pool.install(run_it)
        }
        _ => run_it(),
    };

    match result {
        Ok(rep) => {
            let rendered = match cfg.format {
                OutputFormat::Table => report::render_table(&rep),
                OutputFormat::Records => report::render_records(&rep),
            };
            print!("{rendered}");
            if let Some(path) = &cfg.out {
                if let Err(e) = std::fs::write(path, &rendered) {
                    eprintln!("cannot write report to {}: {e}", path.display());
                    return ExitCode::from(1);
                }
            }
            ExitCode::SUCCESS
        }
        Err(RunError::Validation(msg)) => {
            eprintln!("validation error: {msg}");
            ExitCode::from(1)
        }
        Err(RunError::Numerical(msg)) => {
            eprintln!("numerical failure: {msg}");
            ExitCode::from(2)
        }
    }
}
