//! Experiment runner for the `qha` library.
//!
//! Each subcommand reads a flat `key = value` config, runs one experiment and
//! writes a CSV whose `#` header echoes the resolved configuration and the
//! sha256 of the CSV body. Exit codes: 0 all checks passed, 1 an invariant
//! failed, 2 the configuration or input was rejected.

pub mod commands;
pub mod config;
pub mod output;
pub mod setup;
pub mod suite;

use std::path::Path;

use clap::ValueEnum;
use serde_json::{json, Value};
use thiserror::Error;

use crate::commands::Outcome;
use crate::config::{Config, ConfigError};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at {0}")]
    Config(#[from] ConfigError),
    #[error("rejected input: {0}")]
    Library(#[from] qha::QhaError),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        2
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Command {
    Moyal,
    LocalizationScaling,
    BerezinLieb,
    CohenMap,
    Admissibility,
    WaveletMoyal,
    Suite,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Moyal => "moyal",
            Command::LocalizationScaling => "localization-scaling",
            Command::BerezinLieb => "berezin-lieb",
            Command::CohenMap => "cohen-map",
            Command::Admissibility => "admissibility",
            Command::WaveletMoyal => "wavelet-moyal",
            Command::Suite => "suite",
        }
    }
}

/// Rendered output of a successful run.
#[derive(Debug)]
pub struct Report {
    /// Header plus CSV body.
    pub csv: Vec<u8>,
    pub summary: Value,
    pub exit_code: i32,
    pub failures: Vec<String>,
    /// Requested output paths, `None` meaning stdout for the CSV and nothing otherwise.
    pub csv_path: Option<String>,
    pub json_path: Option<String>,
    pub grid_path: Option<String>,
    grid: Option<std::sync::Arc<qha::HaarGrid>>,
}

impl Report {
    pub fn grid(&self) -> Option<&qha::HaarGrid> {
        self.grid.as_deref()
    }
}

fn dispatch(cmd: Command, c: &Config) -> Result<Outcome, CliError> {
    match cmd {
        Command::Moyal => commands::moyal(c),
        Command::LocalizationScaling => commands::localization_scaling(c),
        Command::BerezinLieb => commands::berezin_lieb(c),
        Command::CohenMap => commands::cohen_map_cmd(c),
        Command::Admissibility => commands::admissibility(c),
        Command::WaveletMoyal => commands::wavelet_moyal(c),
        Command::Suite => suite::suite(c),
    }
}

/// Parse `text`, run `cmd` and render the result without touching the filesystem.
pub fn run(cmd: Command, text: &str) -> Result<Report, CliError> {
    let c = Config::parse(text)?;
    let workers = c.get("workers", 0usize)?;
    let csv_path = c.optional("output.csv");
    let json_path = c.optional("output.json");
    let grid_path = c.optional("output.grid");
    let outcome = qha::numeric::with_workers(workers, || dispatch(cmd, &c))?;
    // Grid export needs the grid the run used; rebuild it from the same keys.
    let grid = match (&grid_path, cmd) {
        (Some(_), Command::LocalizationScaling) => {
            return Err(ConfigError::new("output.grid", "not available for localization-scaling").into())
        }
        (Some(_), _) => Some(setup::Setup::from_config(&c)?.grid),
        (None, _) => None,
    };
    c.reject_unknown()?;
    let csv = output::render(cmd.name(), &c, &outcome.table);
    let exit_code = if outcome.failures.is_empty() { 0 } else { 1 };
    let mut summary = outcome.summary;
    summary.insert("subcommand".into(), json!(cmd.name()));
    summary.insert("pass".into(), json!(exit_code == 0));
    summary.insert("failures".into(), json!(outcome.failures));
    summary.insert(
        "config".into(),
        Value::Object(c.echo().into_iter().map(|(k, v)| (k, Value::String(v))).collect()),
    );
    summary.insert("csv_sha256".into(), json!(output::sha256_hex(&outcome.table.body())));
    Ok(Report {
        csv,
        summary: Value::Object(summary),
        exit_code,
        failures: outcome.failures,
        csv_path,
        json_path,
        grid_path,
        grid,
    })
}

fn write(path: &str, bytes: &[u8]) -> Result<(), CliError> {
    std::fs::write(path, bytes).map_err(|e| CliError::Io(format!("{path}: {e}")))
}

/// Run a subcommand on a config file and write its outputs; returns the exit code.
pub fn execute(cmd: Command, config_path: &Path) -> i32 {
    let result = std::fs::read_to_string(config_path)
        .map_err(|e| CliError::Config(ConfigError::new("config", format!("{}: {e}", config_path.display()))))
        .and_then(|text| run(cmd, &text))
        .and_then(|rep| {
            match &rep.csv_path {
                Some(p) => write(p, &rep.csv)?,
                None => {
                    use std::io::Write;
                    std::io::stdout().write_all(&rep.csv).map_err(|e| CliError::Io(e.to_string()))?;
                }
            }
            if let Some(p) = &rep.json_path {
                let text = serde_json::to_string_pretty(&rep.summary).expect("plain JSON values");
                write(p, text.as_bytes())?;
            }
            if let (Some(p), Some(g)) = (&rep.grid_path, rep.grid()) {
                let f = std::fs::File::create(p).map_err(|e| CliError::Io(format!("{p}: {e}")))?;
                g.write_columns(std::io::BufWriter::new(f))?;
            }
            Ok(rep)
        });
    match result {
        Ok(rep) => {
            for f in &rep.failures {
                eprintln!("FAIL {f}");
            }
            eprintln!("{}: {}", cmd.name(), if rep.exit_code == 0 { "pass" } else { "invariant failure" });
            rep.exit_code
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
