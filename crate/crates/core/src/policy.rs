//! Per-path parameters, code-rate selection and admissibility.
//!
//! A policy is admissible when the expected rate of coded packets reaching the
//! client across all paths strictly exceeds the rate that would be needed if
//! every path ran at its own capacity `1 - eps`:
//!
//! ```text
//! sum_i (1 - eps_i)(1 - c_i) r_i  >  sum_i (1 - eps_i) eps_i r_i,   c_i in [0, 1]
//! ```

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PolicyError {
    #[error("path {path}: rate must be positive and finite, got {value}")]
    InvalidRate { path: usize, value: f64 },
    #[error("path {path}: erasure probability must lie in [0, 1), got {value}")]
    InvalidErasure { path: usize, value: f64 },
    #[error("path {path}: propagation delay must be non-negative and finite, got {value}")]
    InvalidDelay { path: usize, value: f64 },
    #[error("code rate {0} outside [0, 1]")]
    RateOutOfRange(f64),
    #[error("policy covers {policy} paths but {paths} were given")]
    LengthMismatch { policy: usize, paths: usize },
    #[error("coded path index {coded} out of range for {paths} paths")]
    NoSuchPath { coded: usize, paths: usize },
    #[error("violates the {constraint}: {detail}")]
    Inadmissible {
        constraint: Constraint,
        detail: String,
    },
    #[error(
        "no single-coded-path policy on path {coded} is admissible: code-rate bound {bound} <= 0"
    )]
    Infeasible { coded: usize, bound: f64 },
}

/// The individual admissibility constraints, named in diagnostics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Constraint {
    /// Aggregate coded-packet arrival rate must beat the aggregate loss rate.
    RedundancyRate,
    /// Every code rate lies in [0, 1].
    RateRange,
    /// Upper bound on the code rate of the only path carrying coded packets.
    SingleCodedPathBound,
    /// Some path must carry information packets.
    InformationRate,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Constraint::RedundancyRate => {
                "redundancy-rate constraint sum (1-eps)(1-c) r > sum (1-eps) eps r"
            }
            Constraint::RateRange => "code-rate range constraint c in [0, 1]",
            Constraint::SingleCodedPathBound => {
                "single-coded-path bound c < 1 - sum (1-eps) eps r / ((1-eps_c) r_c)"
            }
            Constraint::InformationRate => "information-rate constraint: some path has c > 0",
        })
    }
}

/// One network path: transmission rate in packets per second, i.i.d. erasure
/// probability and one-way propagation delay in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSpec<T> {
    pub rate: T,
    pub erasure: T,
    pub prop_delay: T,
}

impl<T: Real> PathSpec<T> {
    pub fn new(rate: T, erasure: T, prop_delay: T) -> Result<Self, PolicyError> {
        let spec = PathSpec {
            rate,
            erasure,
            prop_delay,
        };
        spec.validate(0)?;
        Ok(spec)
    }

    /// Checks the invariants, reporting `index` in the error.
    pub fn validate(&self, index: usize) -> Result<(), PolicyError> {
        let f = |x: T| x.to_f64().unwrap_or(f64::NAN);
        if !(self.rate > T::zero() && self.rate.is_finite()) {
            return Err(PolicyError::InvalidRate {
                path: index,
                value: f(self.rate),
            });
        }
        if !(self.erasure >= T::zero() && self.erasure < T::one()) {
            return Err(PolicyError::InvalidErasure {
                path: index,
                value: f(self.erasure),
            });
        }
        if !(self.prop_delay >= T::zero() && self.prop_delay.is_finite()) {
            return Err(PolicyError::InvalidDelay {
                path: index,
                value: f(self.prop_delay),
            });
        }
        Ok(())
    }

    /// Time to put one packet on the wire, `1 / r`.
    pub fn packet_time(&self) -> T {
        self.rate.recip()
    }

    /// Round-trip time with a negligible feedback packet, `t + 2d`.
    pub fn rtt(&self) -> T {
        self.packet_time() + self.prop_delay + self.prop_delay
    }
}

/// Spacing of coded packets on a path: `Every(l)` sends `l - 1` information
/// packets followed by one coded packet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Interval {
    Every(u32),
    Never,
}

impl Interval {
    pub fn every(l: u32) -> Self {
        assert!(l >= 1, "coded interval must be at least 1");
        Interval::Every(l)
    }

    pub fn get(self) -> Option<u32> {
        match self {
            Interval::Every(l) => Some(l),
            Interval::Never => None,
        }
    }

    /// `c = (l - 1) / l`, or 1 when the path never carries coded packets.
    pub fn code_rate<T: Real>(self) -> T {
        match self {
            Interval::Every(l) => {
                let l = T::from_count(l as u64);
                (l - T::one()) / l
            }
            Interval::Never => T::one(),
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Interval::Every(l) => write!(f, "{l}"),
            Interval::Never => f.write_str("inf"),
        }
    }
}

/// Code structure for a session: one interval per path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CodingPolicy {
    pub intervals: Vec<Interval>,
}

impl CodingPolicy {
    pub fn new(intervals: Vec<Interval>) -> Self {
        CodingPolicy { intervals }
    }

    /// Coded packets every `l` slots on `coded`, none elsewhere.
    pub fn single_coded_path(num_paths: usize, coded: usize, l: u32) -> Self {
        let mut intervals = vec![Interval::Never; num_paths];
        intervals[coded] = Interval::every(l);
        CodingPolicy { intervals }
    }

    pub fn num_paths(&self) -> usize {
        self.intervals.len()
    }

    pub fn code_rates<T: Real>(&self) -> Vec<T> {
        self.intervals.iter().map(|i| i.code_rate()).collect()
    }

    /// The path carrying coded packets when exactly one does.
    pub fn coded_path(&self) -> Option<usize> {
        let mut coded = self
            .intervals
            .iter()
            .enumerate()
            .filter(|(_, i)| matches!(i, Interval::Every(_)));
        match (coded.next(), coded.next()) {
            (Some((idx, _)), None) => Some(idx),
            _ => None,
        }
    }

    pub fn is_admissible<T: Real>(&self, paths: &[PathSpec<T>]) -> bool {
        self.intervals.len() == paths.len() && is_admissible(&self.code_rates::<T>(), paths)
    }

    /// Like [`is_admissible`](Self::is_admissible) but reports which check failed.
    pub fn check<T: Real>(&self, paths: &[PathSpec<T>]) -> Result<(), PolicyError> {
        if self.intervals.len() != paths.len() {
            return Err(PolicyError::LengthMismatch {
                policy: self.intervals.len(),
                paths: paths.len(),
            });
        }
        for (i, p) in paths.iter().enumerate() {
            p.validate(i)?;
        }
        check_rates(&self.code_rates::<T>(), paths)?;
        if self.intervals.iter().all(|&i| i == Interval::Every(1)) {
            return Err(PolicyError::Inadmissible {
                constraint: Constraint::InformationRate,
                detail: "every path has interval 1, so no information packet is ever sent".into(),
            });
        }
        if let Some(coded) = self.coded_path() {
            let bound = max_coded_path_rate(paths, coded)?;
            let c: T = self.intervals[coded].code_rate();
            if c >= bound {
                return Err(PolicyError::Inadmissible {
                    constraint: Constraint::SingleCodedPathBound,
                    detail: format!("path {coded} code rate {c} is not below {bound}"),
                });
            }
        }
        Ok(())
    }
}

/// Left and right sides of the redundancy-rate inequality.
fn redundancy_sides<T: Real>(code_rates: &[T], paths: &[PathSpec<T>]) -> (T, T) {
    code_rates
        .iter()
        .zip(paths)
        .fold((T::zero(), T::zero()), |(supply, demand), (&c, p)| {
            let kept = T::one() - p.erasure;
            (
                supply + kept * (T::one() - c) * p.rate,
                demand + kept * p.erasure * p.rate,
            )
        })
}

fn check_rates<T: Real>(code_rates: &[T], paths: &[PathSpec<T>]) -> Result<(), PolicyError> {
    if code_rates.len() != paths.len() {
        return Err(PolicyError::LengthMismatch {
            policy: code_rates.len(),
            paths: paths.len(),
        });
    }
    if let Some((i, c)) = code_rates
        .iter()
        .enumerate()
        .find(|(_, &c)| !(c >= T::zero() && c <= T::one()))
    {
        return Err(PolicyError::Inadmissible {
            constraint: Constraint::RateRange,
            detail: format!("path {i} code rate {c}"),
        });
    }
    let (supply, demand) = redundancy_sides(code_rates, paths);
    if supply > demand {
        Ok(())
    } else {
        Err(PolicyError::Inadmissible {
            constraint: Constraint::RedundancyRate,
            detail: format!("coded arrival rate {supply} does not exceed loss rate {demand}"),
        })
    }
}

/// Whether per-path code rates admit eventual decoding with probability one.
/// The inequality is strict; equality is inadmissible.
pub fn is_admissible<T: Real>(code_rates: &[T], paths: &[PathSpec<T>]) -> bool {
    check_rates(code_rates, paths).is_ok()
}

/// Supremum of admissible code rates on `coded` when it is the only path
/// carrying coded packets. Admissible rates lie strictly below the result.
pub fn max_coded_path_rate<T: Real>(paths: &[PathSpec<T>], coded: usize) -> Result<T, PolicyError> {
    let target = paths.get(coded).ok_or(PolicyError::NoSuchPath {
        coded,
        paths: paths.len(),
    })?;
    let demand: T = paths
        .iter()
        .map(|p| (T::one() - p.erasure) * p.erasure * p.rate)
        .sum();
    let bound = T::one() - demand / ((T::one() - target.erasure) * target.rate);
    if bound <= T::zero() {
        return Err(PolicyError::Infeasible {
            coded,
            bound: bound.to_f64().unwrap_or(f64::NAN),
        });
    }
    Ok(bound)
}

/// Coded interval for a code rate, `l = 1 / (1 - c)`.
///
/// Non-integer results are rounded down (never below 1) so that the realised
/// rate carries at least the requested redundancy. Values within a relative
/// 1e-9 (or a few ulps for `f32`) of an integer snap to it, which absorbs
/// rounding in `1 - c`.
/// `c = 1` yields [`Interval::Never`].
pub fn interval_from_rate<T: Real>(c: T) -> Result<Interval, PolicyError> {
    if !(c >= T::zero() && c <= T::one()) {
        return Err(PolicyError::RateOutOfRange(c.to_f64().unwrap_or(f64::NAN)));
    }
    if c == T::one() {
        return Ok(Interval::Never);
    }
    let l = (T::one() - c).recip();
    let nearest = l.round();
    let tol = T::lit(1e-9).max(T::epsilon() * T::lit(16.0));
    let snapped = if (l - nearest).abs() <= tol * l {
        nearest
    } else {
        l.floor()
    };
    let l = snapped.max(T::one()).min(T::lit(u32::MAX as f64));
    Ok(Interval::Every(l.to_u32().expect("clamped to u32 range")))
}
