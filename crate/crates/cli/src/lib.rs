//! Experiment runner for the rawpriv simulator.
//!
//! A run reads one TOML config, applies `--set` overrides, executes the
//! selected experiment and writes `results.csv`, `summary.json` and
//! `plot.svg` to the output directory.

pub mod config;
pub mod experiments;
pub mod svg;

use std::path::{Path, PathBuf};

use serde_json::json;

pub use config::{Experiment, ExperimentConfig};
pub use experiments::{run_experiment, Artifacts};

/// Env var naming the default output directory.
pub const OUT_ENV: &str = "RAWPRIV_OUT";
pub const DEFAULT_OUT: &str = "rawpriv-out";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config parse error: {0}")]
    ConfigParse(String),
    #[error("constraint violation: {}", .0.join("; "))]
    Constraint(Vec<String>),
    #[error("io error on {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("run failed: {0}")]
    Run(String),
}

impl CliError {
    pub fn io(path: &Path, e: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::ConfigParse(_) => "config-parse",
            CliError::Constraint(_) => "constraint-violation",
            CliError::Io { .. } => "io",
            CliError::Run(_) => "run",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::ConfigParse(_) => 2,
            CliError::Constraint(_) => 3,
            CliError::Io { .. } => 4,
            CliError::Run(_) => 5,
        }
    }

    /// Single-line JSON object for stderr.
    pub fn to_json(&self) -> String {
        let mut v = json!({ "error": self.kind(), "message": self.to_string() });
        match self {
            CliError::Constraint(list) => v["violations"] = json!(list),
            CliError::Io { path, .. } => v["path"] = json!(path.display().to_string()),
            _ => {}
        }
        v.to_string()
    }
}

/// `--out` wins, then the config's `output_dir`, then the env var.
pub fn resolve_output_dir(
    flag: Option<&Path>,
    config: &ExperimentConfig,
    env: Option<&str>,
) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| config.output_dir.clone())
        .or_else(|| env.filter(|s| !s.is_empty()).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

/// Writes every artifact; returns the paths in write order.
pub fn write_artifacts(dir: &Path, art: &Artifacts) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let summary = serde_json::to_string_pretty(&art.summary)
        .map_err(|e| CliError::Run(e.to_string()))?
        + "\n";
    let mut files: Vec<(&str, &str)> = vec![
        ("results.csv", &art.results_csv),
        ("summary.json", &summary),
    ];
    let plot = art.plot.to_svg();
    files.push(("plot.svg", &plot));
    for (name, body) in &art.extra {
        files.push((name, body));
    }
    let mut written = Vec::new();
    for (name, body) in files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| CliError::io(&path, e))?;
        written.push(path);
    }
    Ok(written)
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize)]
pub struct ValidationReport {
    pub valid: bool,
    pub violations: Vec<String>,
}

/// Checks a config without running it. Only unreadable files are errors;
/// parse failures are reported as a violation.
pub fn validate(path: &Path) -> Result<ValidationReport, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let violations = match ExperimentConfig::from_toml(&text, &[]) {
        Ok(cfg) => cfg.violations(),
        Err(e) => vec![e.to_string()],
    };
    Ok(ValidationReport {
        valid: violations.is_empty(),
        violations,
    })
}
