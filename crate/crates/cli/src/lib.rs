//! Configuration loading, sweep execution and result files for the `mpcode`
//! command.

pub mod config;
pub mod emit;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use mpcode::sim::{sweep, RowStatus, SweepRow};

pub use config::{load_config, parse_config, ConfigError, Manifest};

/// Process exit codes.
pub const EXIT_OK: u8 = 0;
pub const EXIT_INVALID: u8 = 1;
pub const EXIT_RUNTIME: u8 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// One `run` invocation.
#[derive(Debug, Clone)]
pub struct RunManifest {
    pub config: PathBuf,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub format: Format,
    pub check_only: bool,
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Invalid(ConfigError),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot encode results: {0}")]
    Encode(String),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Invalid(_) => EXIT_INVALID,
            _ => EXIT_RUNTIME,
        }
    }
}

/// What a run produced.
#[derive(Debug)]
pub struct Outcome {
    pub rows: Vec<SweepRow>,
    pub table: Option<PathBuf>,
    pub summary: Option<PathBuf>,
}

impl Outcome {
    pub fn failed_rows(&self) -> usize {
        self.rows
            .iter()
            .filter(|r| matches!(r.status, RowStatus::Failed(_)))
            .count()
    }

    pub fn exit_code(&self) -> u8 {
        if self.failed_rows() > 0 {
            EXIT_RUNTIME
        } else {
            EXIT_OK
        }
    }
}

/// File name of the per-point table.
pub fn table_name(format: Format) -> &'static str {
    match format {
        Format::Csv => "points.csv",
        Format::Json => "points.json",
    }
}

pub const SUMMARY_NAME: &str = "summary.json";

/// Loads, validates and (unless `check_only`) sweeps the configuration,
/// writing the table and `summary.json` into the output directory.
pub fn run_and_emit(m: &RunManifest) -> Result<Outcome, RunError> {
    let mut manifest = load_config(&m.config).map_err(RunError::Invalid)?;
    if let Some(seed) = m.seed {
        manifest.pin_seed(seed);
    }
    if m.check_only {
        return Ok(Outcome {
            rows: Vec::new(),
            table: None,
            summary: None,
        });
    }
    let rows = sweep(&manifest.base, &manifest.grid);

    fs::create_dir_all(&m.out).map_err(|e| RunError::Io {
        path: m.out.clone(),
        source: e,
    })?;
    let table = m.out.join(table_name(m.format));
    write_file(&table, |w| match m.format {
        Format::Csv => emit::write_csv(w, &rows).map_err(|e| e.to_string()),
        Format::Json => emit::write_json(w, &rows).map_err(|e| e.to_string()),
    })?;

    let summary = emit::summarize(
        &m.config.display().to_string(),
        &rows,
        chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
    );
    let summary_path = m.out.join(SUMMARY_NAME);
    write_file(&summary_path, |w| {
        serde_json::to_writer_pretty(w, &summary).map_err(|e| e.to_string())
    })?;

    Ok(Outcome {
        rows,
        table: Some(table),
        summary: Some(summary_path),
    })
}

fn write_file<F>(path: &Path, body: F) -> Result<(), RunError>
where
    F: FnOnce(&mut BufWriter<File>) -> Result<(), String>,
{
    let file = File::create(path).map_err(|e| RunError::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut w = BufWriter::new(file);
    body(&mut w).map_err(RunError::Encode)?;
    w.flush().map_err(|e| RunError::Io {
        path: path.to_path_buf(),
        source: e,
    })
}
