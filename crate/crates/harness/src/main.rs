use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use cotlab_harness::{resolve_out_dir, run_with_notes, validate_with, ConfigError, Overrides, RunError, OUT_DIR_ENV};

const EXIT_FAIL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "cotlab", version, about = "Seeded chain-of-thought length experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        /// Master seed, replacing the file value.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Primary sample count of the experiment kind.
        #[arg(long)]
        trials: Option<u64>,
    },
    /// Check a config file without running it.
    Validate { config: PathBuf },
}

fn report_config_errors(path: &Path, errors: &[ConfigError]) -> ExitCode {
    eprintln!("{}: {} config error(s)", path.display(), errors.len());
    for e in errors {
        eprintln!("  {e}");
    }
    ExitCode::from(EXIT_CONFIG)
}

fn load(path: &Path, overrides: &Overrides) -> Result<(cotlab_harness::ExperimentConfig, Vec<String>), ExitCode> {
    let text = fs::read_to_string(path).map_err(|e| {
        eprintln!("{}: {e}", path.display());
        ExitCode::from(EXIT_CONFIG)
    })?;
    validate_with(&text, overrides).map_err(|errors| report_config_errors(path, &errors))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config } => match load(&config, &Overrides::default()) {
            Ok((c, _)) => {
                println!("{}: ok ({}, seed {})", config.display(), c.kind, c.seed);
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
        Command::Run {
            config,
            seed,
            out,
            trials,
        } => {
            let (cfg, notes) = match load(&config, &Overrides { seed, trials }) {
                Ok(v) => v,
                Err(code) => return code,
            };
            for n in &notes {
                eprintln!("warning: {n}");
            }
            let env_root = std::env::var_os(OUT_DIR_ENV).map(PathBuf::from);
            let dir = resolve_out_dir(out.as_deref(), &cfg, env_root.as_deref());
            match run_with_notes(&cfg, &dir, &notes) {
                Ok(report) => {
                    for a in &report.summary.assertions {
                        println!("{} {} (measured {})", if a.passed { "PASS" } else { "FAIL" }, a.name, a.measured);
                    }
                    println!("outputs in {}", report.dir.display());
                    if report.summary.passed {
                        ExitCode::SUCCESS
                    } else {
                        let failed: Vec<&str> = report.summary.failures().map(|a| a.name.as_str()).collect();
                        eprintln!("failed assertions: {}", failed.join(", "));
                        ExitCode::from(EXIT_FAIL)
                    }
                }
                Err(RunError::Config(errors)) => report_config_errors(&config, &errors),
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(EXIT_FAIL)
                }
            }
        }
    }
}
