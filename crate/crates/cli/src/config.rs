//! TOML run configuration.
//!
//! ```toml
//! num_info = 100000
//! seed = 1
//! align_slow_path = true        # optional, default false
//! feedback_period = 2.5         # seconds, optional
//! adaptive_redundancy = false   # optional
//! payload_len = 16              # bytes, optional
//! field_order = 256             # optional
//! exclude_tail = false          # optional
//!
//! [[path]]
//! rate = 4.0          # packets per second
//! erasure = 0.01
//! prop_delay = 0.05   # seconds, optional
//! interval = 10       # or `code_rate = 0.9`; omit both for no coded packets
//!
//! [sweep]                       # optional
//! intervals = [5, 10, 20]
//! erasures = [1e-3, [1e-2, 1e-3]]   # a number applies to every path
//! seeds = [1, 2, 3]
//! ```

use std::path::Path;

use mpcode::policy::{interval_from_rate, CodingPolicy, Interval, PathSpec};
use mpcode::{FieldConfig, SimConfig, SweepGrid};
use serde::Deserialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Parse {
        path: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub num_info: u32,
    pub seed: u64,
    #[serde(default)]
    pub align_slow_path: bool,
    pub feedback_period: Option<f64>,
    #[serde(default)]
    pub adaptive_redundancy: bool,
    #[serde(default = "default_payload_len")]
    pub payload_len: usize,
    #[serde(default = "default_field_order")]
    pub field_order: u16,
    #[serde(default)]
    pub exclude_tail: bool,
    #[serde(rename = "path")]
    pub paths: Vec<PathEntry>,
    pub sweep: Option<SweepEntry>,
}

fn default_payload_len() -> usize {
    16
}

fn default_field_order() -> u16 {
    256
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathEntry {
    pub rate: f64,
    pub erasure: f64,
    #[serde(default)]
    pub prop_delay: f64,
    pub interval: Option<u32>,
    pub code_rate: Option<f64>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepEntry {
    pub intervals: Option<Vec<u32>>,
    pub erasures: Option<Vec<ErasurePoint>>,
    pub seeds: Option<Vec<u64>>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ErasurePoint {
    All(f64),
    PerPath(Vec<f64>),
}

/// A validated session plus the grid to sweep over it.
#[derive(Debug, Clone)]
pub struct Manifest {
    pub base: SimConfig,
    pub grid: SweepGrid,
}

impl Manifest {
    /// Replaces the base seed and any seed list in the grid.
    pub fn pin_seed(&mut self, seed: u64) {
        self.base.seed = seed;
        if self.grid.seeds.is_some() {
            self.grid.seeds = Some(vec![seed]);
        }
    }
}

pub fn load_config(path: &Path) -> Result<Manifest, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_config(&text, &path.display().to_string())
}

/// Parses and validates configuration text; `origin` names it in errors.
pub fn parse_config(text: &str, origin: &str) -> Result<Manifest, ConfigError> {
    let file: ConfigFile = toml::from_str(text).map_err(|e| {
        let (line, column) = e
            .span()
            .map(|s| line_column(text, s.start))
            .unwrap_or((0, 0));
        ConfigError::Parse {
            path: origin.to_string(),
            line,
            column,
            message: e.message().to_string(),
        }
    })?;
    build(file)
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.len() - before.rfind('\n').map_or(0, |i| i + 1) + 1;
    (line, column)
}

fn build(file: ConfigFile) -> Result<Manifest, ConfigError> {
    if file.paths.is_empty() {
        return Err(ConfigError::Invalid(
            "at least one [[path]] is required".into(),
        ));
    }
    let mut paths = Vec::with_capacity(file.paths.len());
    let mut intervals = Vec::with_capacity(file.paths.len());
    for (i, p) in file.paths.iter().enumerate() {
        let spec = PathSpec {
            rate: p.rate,
            erasure: p.erasure,
            prop_delay: p.prop_delay,
        };
        spec.validate(i)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        paths.push(spec);
        intervals.push(path_interval(i, p)?);
    }
    let field = FieldConfig::for_order(file.field_order)
        .map_err(|e| ConfigError::Invalid(format!("field_order: {e}")))?;

    let base = SimConfig {
        paths,
        policy: CodingPolicy::new(intervals),
        num_info: file.num_info,
        seed: file.seed,
        align_slow_path: file.align_slow_path,
        feedback_period: file.feedback_period,
        adaptive_redundancy: file.adaptive_redundancy,
        payload_len: file.payload_len,
        field,
        exclude_tail: file.exclude_tail,
    };
    base.validate()
        .map_err(|e| ConfigError::Invalid(format!("baseline policy: {e}")))?;

    let sweep = file.sweep.unwrap_or_default();
    if let Some(ls) = &sweep.intervals {
        if let Some(bad) = ls.iter().find(|&&l| l == 0) {
            return Err(ConfigError::Invalid(format!(
                "sweep interval {bad} must be at least 1"
            )));
        }
    }
    let n = base.paths.len();
    let erasures = sweep
        .erasures
        .map(|pts| {
            pts.into_iter()
                .enumerate()
                .map(|(k, pt)| {
                    let eps = match pt {
                        ErasurePoint::All(e) => vec![e; n],
                        ErasurePoint::PerPath(v) if v.len() == n => v,
                        ErasurePoint::PerPath(v) => {
                            return Err(ConfigError::Invalid(format!(
                                "sweep erasure point {k} lists {} values for {n} paths",
                                v.len()
                            )))
                        }
                    };
                    if let Some(e) = eps.iter().find(|e| !(**e >= 0.0 && **e < 1.0)) {
                        return Err(ConfigError::Invalid(format!(
                            "sweep erasure point {k}: {e} outside [0, 1)"
                        )));
                    }
                    Ok(eps)
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .transpose()?;

    Ok(Manifest {
        base,
        grid: SweepGrid {
            intervals: sweep.intervals,
            erasures,
            seeds: sweep.seeds,
        },
    })
}

fn path_interval(i: usize, p: &PathEntry) -> Result<Interval, ConfigError> {
    match (p.interval, p.code_rate) {
        (Some(_), Some(_)) => Err(ConfigError::Invalid(format!(
            "path {i}: give either interval or code_rate, not both"
        ))),
        (Some(0), None) => Err(ConfigError::Invalid(format!(
            "path {i}: interval must be at least 1"
        ))),
        (Some(l), None) => Ok(Interval::Every(l)),
        (None, Some(c)) => {
            interval_from_rate(c).map_err(|e| ConfigError::Invalid(format!("path {i}: {e}")))
        }
        (None, None) => Ok(Interval::Never),
    }
}
