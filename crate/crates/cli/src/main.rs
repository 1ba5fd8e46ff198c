//! `qgs`: spectra of Schrödinger operators on metric graphs from the command line.
//!
//! Exit status: 0 when every verdict passes (or none is judged), 2 on any
//! FAIL verdict, 1 on input or solver errors.

mod args;
mod commands;
mod output;

use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::Parser;

use args::RunConfig;

/// Caps the rayon pool at `QGS_THREADS` when set.
fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("QGS_THREADS") else {
        return Ok(());
    };
    let n: usize = value.trim().parse().with_context(|| format!("QGS_THREADS must be a positive integer, got `{value}`"))?;
    if n == 0 {
        bail!("QGS_THREADS must be a positive integer, got `{value}`");
    }
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    Ok(())
}

fn main() -> ExitCode {
    let cfg = match RunConfig::try_parse() {
        Ok(cfg) => cfg,
        Err(e) => {
            let _ = e.print();
            // usage errors share the input-error status, keeping 2 for FAIL verdicts
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = configure_threads().and_then(|()| {
        let outcome = commands::run(&cfg)?;
        output::emit(&outcome, cfg.format, cfg.out.as_deref())?;
        Ok(outcome)
    });
    match result {
        Ok(outcome) => match outcome.verdict {
            Some(v) => {
                eprintln!("{v}: {}", outcome.summary);
                if v.passed() {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(2)
                }
            }
            None => {
                eprintln!("{}", outcome.summary);
                ExitCode::SUCCESS
            }
        },
        Err(e) => {
            eprintln!("error: {e:#}");
            if let Some(h) = commands::hint(&e) {
                eprintln!("hint: {h}");
            }
            ExitCode::from(1)
        }
    }
}
