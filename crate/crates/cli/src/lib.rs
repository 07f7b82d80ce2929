//! Command-line front end: argument parsing, exit codes, run manifests and
//! the five subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use smallgain::design::DesignError;
use smallgain::gain::grid::GridSpec;
use smallgain::iss::IssError;

pub mod commands;
pub mod reproduce;

#[derive(Debug, Clone, Parser)]
#[command(name = "smallgain", version, about = "Simulate hybrid systems, certify small-gain conditions and design sampled feedback")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON configuration file (or a manifest written by an earlier run).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Master seed for random inputs and ensembles.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Slack added to probe bounds.
    #[arg(long, global = true)]
    pub tolerance: Option<f64>,
    /// Certificate grid, e.g. `s=log:1e-6:1e6:61;t=lin:0:10:51`.
    #[arg(long, global = true)]
    pub grid: Option<String>,
}

#[derive(Debug, Clone, Subcommand, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    /// Simulate one trajectory.
    Simulate,
    /// Run the sampled-data design pipeline.
    Design,
    /// Evaluate a small-gain or class certificate.
    Check,
    /// Probe a stability estimate against a trajectory ensemble.
    Probe,
    /// Rerun a bundled example and assert its thresholds.
    Reproduce { name: String },
}

/// Process exit status; one variant per outcome.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Ok,
    /// Malformed input, unknown name, I/O failure.
    Malformed,
    Blowup,
    SmallGainFailed,
    Infeasible,
    CheckFailed,
    NotDecaying,
}

impl Outcome {
    pub fn code(self) -> i32 {
        match self {
            Outcome::Ok => 0,
            Outcome::Malformed => 1,
            Outcome::Blowup => 2,
            Outcome::SmallGainFailed => 3,
            Outcome::Infeasible => 4,
            Outcome::CheckFailed => 5,
            Outcome::NotDecaying => 6,
        }
    }

    /// Map a library error to its exit status.
    pub fn of_error(err: &anyhow::Error) -> Outcome {
        for cause in err.chain() {
            if let Some(e) = cause.downcast_ref::<DesignError>() {
                return match e {
                    DesignError::NotControllable { .. } | DesignError::DecayTooFast { .. } | DesignError::Infeasible(_) => {
                        Outcome::Infeasible
                    }
                    _ => Outcome::Malformed,
                };
            }
            if let Some(IssError::NotDecaying { .. }) = cause.downcast_ref::<IssError>() {
                return Outcome::NotDecaying;
            }
        }
        Outcome::Malformed
    }
}

/// Everything needed to replay a run.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub config: Value,
    pub seed: Option<u64>,
    pub tolerance: Option<f64>,
    pub grid: Option<String>,
    pub exit_code: i32,
    pub outputs: Vec<String>,
}

/// Settings shared by every subcommand once the configuration is loaded.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub config: Value,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub tolerance: Option<f64>,
    pub grid: Option<GridSpec>,
    grid_text: Option<String>,
}

impl RunConfig {
    pub fn from_cli(cli: &Cli) -> Result<Self> {
        let mut config = match &cli.config {
            Some(path) => {
                let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => Value::Null,
        };
        let mut seed = cli.seed;
        let mut tolerance = cli.tolerance;
        let mut grid_text = cli.grid.clone();
        // a manifest replays its own settings unless overridden
        if let Ok(m) = serde_json::from_value::<Manifest>(config.clone()) {
            if m.tool == "smallgain" {
                anyhow::ensure!(m.command == cli.command, "manifest was written by {:?}, not {:?}", m.command, cli.command);
                config = m.config;
                seed = seed.or(m.seed);
                tolerance = tolerance.or(m.tolerance);
                grid_text = grid_text.or(m.grid);
            }
        }
        if let Some(t) = tolerance {
            anyhow::ensure!(t.is_finite() && t >= 0.0, "tolerance {t} must be a non-negative number");
        }
        let grid = grid_text.as_deref().map(str::parse::<GridSpec>).transpose().context("parsing --grid")?;
        Ok(Self { command: cli.command.clone(), config, out: cli.out.clone(), seed, tolerance, grid, grid_text })
    }

    /// Decode the configuration; a missing file is an error.
    pub fn parse<T: for<'de> Deserialize<'de>>(&self) -> Result<T> {
        anyhow::ensure!(!self.config.is_null(), "--config is required for this subcommand");
        serde_json::from_value(self.config.clone()).context("invalid configuration")
    }

    pub fn manifest(&self, outcome: Outcome, outputs: &[String]) -> Manifest {
        Manifest {
            tool: "smallgain".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: self.command.clone(),
            config: self.config.clone(),
            seed: self.seed,
            tolerance: self.tolerance,
            grid: self.grid_text.clone(),
            exit_code: outcome.code(),
            outputs: outputs.to_vec(),
        }
    }
}

/// Collects output files in a directory and remembers their names.
pub struct OutputDir {
    root: PathBuf,
    written: Vec<String>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self> {
        fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        Ok(Self { root: root.to_path_buf(), written: Vec::new() })
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<()> {
        let path = self.root.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.written.push(name.to_string());
        Ok(())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_text(name, &text)
    }

    pub fn written(&self) -> &[String] {
        &self.written
    }
}

/// Run one invocation and return its outcome. Errors become
/// [`Outcome::of_error`] with the message on stderr; the manifest is
/// written in every case once the configuration has loaded.
pub fn run(cli: &Cli) -> Outcome {
    let rc = match RunConfig::from_cli(cli) {
        Ok(rc) => rc,
        Err(e) => {
            eprintln!("error: {e:#}");
            return Outcome::Malformed;
        }
    };
    let mut out = match OutputDir::create(&rc.out) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return Outcome::Malformed;
        }
    };
    let result = match &rc.command {
        Command::Simulate => commands::simulate(&rc, &mut out),
        Command::Design => commands::design(&rc, &mut out),
        Command::Check => commands::check(&rc, &mut out),
        Command::Probe => commands::probe(&rc, &mut out),
        Command::Reproduce { name } => reproduce::reproduce(name, &rc, &mut out),
    };
    let outcome = result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        Outcome::of_error(&e)
    });
    let manifest = rc.manifest(outcome, out.written());
    if let Err(e) = out.write_json("manifest.json", &manifest) {
        eprintln!("error: {e:#}");
        return Outcome::Malformed;
    }
    outcome
}
