//! Config-driven experiment runs: validate a TOML config, execute the named
//! experiment, and write `<kind>.csv`, `summary.json` and `manifest.json`.

pub mod config;
pub mod experiments;
pub mod report;

use std::io;
use std::path::{Path, PathBuf};

use chrono::{SecondsFormat, Utc};

pub use config::{validate_config, validate_with, ConfigError, ExperimentConfig, Kind, Overrides};
pub use report::{Assertion, Manifest, Summary};

/// Variable naming the default output root.
pub const OUT_DIR_ENV: &str = "COTLAB_OUT_DIR";

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("{} config error(s)", .0.len())]
    Config(Vec<ConfigError>),
    #[error("experiment failed: {0}")]
    Experiment(String),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub dir: PathBuf,
    pub summary: Summary,
    pub manifest: Manifest,
}

/// Output directory by precedence: flag, config file, `COTLAB_OUT_DIR/<kind>`,
/// `cotlab-out/<kind>`.
pub fn resolve_out_dir(flag: Option<&Path>, config: &ExperimentConfig, env_root: Option<&Path>) -> PathBuf {
    if let Some(p) = flag {
        return p.to_path_buf();
    }
    if let Some(p) = &config.output_dir {
        return p.clone();
    }
    env_root.unwrap_or(Path::new("cotlab-out")).join(config.kind.name())
}

fn now() -> String {
    Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true)
}

/// Executes `config` and writes its outputs into `dir`.
pub fn run(config: &ExperimentConfig, dir: &Path) -> Result<RunReport, RunError> {
    run_with_notes(config, dir, &[])
}

/// As [`run`], recording `notes` among the summary warnings.
pub fn run_with_notes(config: &ExperimentConfig, dir: &Path, notes: &[String]) -> Result<RunReport, RunError> {
    let started_at = now();
    let outcome = experiments::execute(config)?;
    let mut warnings = notes.to_vec();
    warnings.extend(outcome.warnings);
    let summary = Summary {
        format_version: report::FORMAT_VERSION,
        artifact_version: report::ARTIFACT_VERSION.into(),
        kind: config.kind.name().into(),
        seed: config.seed,
        passed: outcome.assertions.iter().all(|a| a.passed),
        assertions: outcome.assertions,
        values: outcome.values,
        warnings,
    };
    let mut files = vec![(format!("{}.csv", config.kind.name()), outcome.csv.into_bytes())];
    files.extend(outcome.extra_files);
    files.push(("summary.json".into(), report::to_pretty_json(&summary)));
    let outputs = report::write_files(dir, &files)?;
    let config_json = serde_json::to_value(config.raw()).expect("toml tables serialize");
    let manifest = Manifest {
        format_version: report::FORMAT_VERSION,
        artifact_version: report::ARTIFACT_VERSION.into(),
        kind: config.kind.name().into(),
        seed: config.seed,
        config_digest: report::config_digest(&config_json),
        config: config_json,
        started_at,
        finished_at: now(),
        outputs,
    };
    std::fs::write(dir.join("manifest.json"), report::to_pretty_json(&manifest))?;
    Ok(RunReport {
        dir: dir.to_path_buf(),
        summary,
        manifest,
    })
}
