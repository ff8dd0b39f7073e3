mod config;
mod output;
mod run;

use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;

/// Continuum college admissions with differentially correlated scores.
#[derive(Debug, Parser)]
#[command(name = "corrmatch", version)]
struct Args {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Overrides the configuration seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
    /// Overrides the solver residual tolerance.
    #[arg(long)]
    tol: Option<f64>,
}

fn main() -> ExitCode {
    let args = match Args::try_parse() {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let inv = run::Invocation {
        config: args.config,
        out: args.out,
        seed: args.seed,
        jobs: args.jobs,
        tol: args.tol,
    };
    match run::execute(&inv) {
        Ok(m) => {
            for f in &m.outputs {
                println!("{}\t{} rows", f.file, f.rows);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("corrmatch: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
