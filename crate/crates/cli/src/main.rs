use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use aixi::eval::{invariant_suite, BoundReport};
use aixi::vm::{enumerate_programs, Program};
use aixi_cli::error::{CliError, Result};
use aixi_cli::load_config;
use aixi_cli::scenario::{output_dir, run_scenario};
use clap::{Parser, Subcommand};

/// Exact universal agents at desk scale.
#[derive(Parser)]
#[command(name = "aixi", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write its trace, report, results and manifest.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the config's `output` or `out/<name>`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Overrides the config's seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Exit with status 3 if any bound check fails.
        #[arg(long)]
        strict: bool,
        /// Advisory; runs are single-threaded.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Re-check the library's invariant suite.
    Verify {
        /// Also write the reports as CSV.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        strict: bool,
    },
    /// List every valid program up to a code length.
    Enumerate {
        #[arg(long, default_value_t = 8)]
        max_bits: usize,
    },
    /// Disassemble a program given as hex.
    Disasm { hex: String },
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run {
            config,
            out,
            seed,
            strict,
            threads: _,
        } => {
            let mut cfg = load_config(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let dir = output_dir(&cfg, out.as_deref());
            let outcome = run_scenario(&cfg, &dir)?;
            print!("{}", outcome.report.summary);
            println!("artifacts in {}", outcome.dir.display());
            if strict && outcome.report.failed_bounds > 0 {
                return Err(CliError::BoundFailure {
                    failed: outcome.report.failed_bounds,
                });
            }
        }
        Command::Verify { out, strict } => {
            let reports = invariant_suite()?;
            print!("{}", BoundReport::summary(&reports));
            if let Some(dir) = out {
                fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
                let path = dir.join("invariants.csv");
                fs::write(&path, BoundReport::to_csv(&reports)).map_err(|e| CliError::io(&path, e))?;
            }
            let failed = reports.iter().filter(|r| !r.holds).count();
            if strict && failed > 0 {
                return Err(CliError::BoundFailure { failed });
            }
        }
        Command::Enumerate { max_bits } => {
            if max_bits > aixi_cli::config::MAX_BITS {
                return Err(CliError::Capacity(format!(
                    "max_bits {max_bits} exceeds {}",
                    aixi_cli::config::MAX_BITS
                )));
            }
            println!("index,bits,hex,asm");
            for (i, p) in enumerate_programs(max_bits).iter().enumerate() {
                let asm: Vec<String> = p.instructions().iter().map(ToString::to_string).collect();
                println!("{i},{},{},{}", p.length_bits(), p.to_hex(), asm.join("; "));
            }
        }
        Command::Disasm { hex } => {
            let p = Program::from_hex(&hex).map_err(|e| CliError::Validation(vec![e.to_string()]))?;
            println!("{p}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
