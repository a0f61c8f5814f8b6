//! In-order delivery delay of the single-coded-path code.
//!
//! Losses per coded interval are modelled as Poisson with mean
//!
//! ```text
//! lambda = eps_c + sum_i alpha_i eps_i,   alpha_i = (l_c - 1) r_i / r_c
//! ```
//!
//! and the number of coded intervals between decode events `X` follows an
//! M/D/1 busy-period law built from the Borel–Tanner distribution:
//!
//! ```text
//! P(X = 0) = e^-lambda,  P(X = 1) = lambda e^-lambda,
//! P(X = x) = (x-1)^(x-2) / (x (x-2)!) lambda^x e^(-x lambda),  x >= 2
//! E[X]   = lambda e^-lambda / (1 - lambda)
//! E[X^2] = (1 - lambda + lambda^2) / (1 - lambda)^2 E[X]
//! ```
//!
//! The renewal-reward argument then gives the expected delay in packet slots
//! of the coded path (`1 / r_c` seconds each). With a single path it reduces to
//! `lambda (l - 1)(1 - lambda + lambda^2) / (2 (1 - lambda)^2)`.
//!
//! Every pmf is evaluated in log space so that large counts do not overflow.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::num::{ln_factorial, Real};
use crate::policy::{CodingPolicy, Interval, PathSpec, PolicyError};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("loss rate lambda = {0} per coded interval: moments diverge for lambda >= 1")]
    Divergent(f64),
    #[error("loss rate lambda = {0} must be non-negative")]
    NegativeRate(f64),
    #[error("the analysis requires exactly one path carrying coded packets")]
    NotSingleCodedPath,
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("renewal sample exceeded {0} slots without clearing the backlog")]
    SampleCap(u64),
    #[error("series for moment {power} did not converge after {terms} terms")]
    NoConvergence { power: u32, terms: u64 },
}

fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Poisson loss model for a single-coded-path policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LossModel<T> {
    /// Expected losses per coded interval.
    pub lambda: T,
    /// Information packets sent on each path per coded packet.
    pub alpha: Vec<T>,
    pub coded_interval: u32,
    pub coded_path: usize,
    pub coded_rate: T,
    pub coded_erasure: T,
}

/// First two moments of the decode inter-arrival time, plus `E[W]` for
/// `W = max(X, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenewalMoments<T> {
    pub mean: T,
    pub second_moment: T,
    pub w_mean: T,
}

/// Delay in coded-path packet slots and in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DelayEstimate<T> {
    pub slots: T,
    pub seconds: T,
}

fn check_lambda<T: Real>(lambda: T) -> Result<(), AnalysisError> {
    if lambda.is_nan() || lambda < T::zero() {
        return Err(AnalysisError::NegativeRate(to_f64(lambda)));
    }
    if lambda >= T::one() {
        return Err(AnalysisError::Divergent(to_f64(lambda)));
    }
    Ok(())
}

/// Derives the loss model from path parameters and a policy that codes on
/// exactly one path and passes every admissibility check.
pub fn build_loss_model<T: Real>(
    paths: &[PathSpec<T>],
    policy: &CodingPolicy,
) -> Result<LossModel<T>, AnalysisError> {
    let coded_path = policy
        .coded_path()
        .ok_or(AnalysisError::NotSingleCodedPath)?;
    policy.check(paths)?;
    let l = match policy.intervals[coded_path] {
        Interval::Every(l) => l,
        Interval::Never => unreachable!("coded_path has a finite interval"),
    };
    let coded = paths[coded_path];
    let per_coded = T::from_count(l as u64 - 1) / coded.rate;
    let alpha: Vec<T> = paths.iter().map(|p| per_coded * p.rate).collect();
    let lambda = coded.erasure
        + alpha
            .iter()
            .zip(paths)
            .map(|(&a, p)| a * p.erasure)
            .sum::<T>();
    check_lambda(lambda)?;
    Ok(LossModel {
        lambda,
        alpha,
        coded_interval: l,
        coded_path,
        coded_rate: coded.rate,
        coded_erasure: coded.erasure,
    })
}

/// `lambda^y e^-lambda / y!`; zero for negative `y`.
pub fn poisson_pmf<T: Real>(y: i64, lambda: T) -> T {
    if y < 0 {
        return T::zero();
    }
    if lambda == T::zero() {
        return if y == 0 { T::one() } else { T::zero() };
    }
    let y_f = T::from_count(y as u64);
    (y_f * lambda.ln() - lambda - ln_factorial::<T>(y as u64)).exp()
}

/// Busy-period length `z` of an M/D/1 queue with arrival rate `lambda` and
/// unit service started from `y` customers:
/// `y z^(z-y-1) lambda^(z-y) e^(-z lambda) / (z-y)!`.
pub fn borel_tanner_pmf<T: Real>(z: i64, y: i64, lambda: T) -> T {
    if y < 1 || z < y {
        return T::zero();
    }
    let k = (z - y) as u64;
    if k == 0 {
        // y z^-1 = 1
        return (-(T::from_count(z as u64)) * lambda).exp();
    }
    if lambda == T::zero() {
        return T::zero();
    }
    let z_f = T::from_count(z as u64);
    let ln = T::from_count(y as u64).ln()
        + T::from_count(k - 1) * z_f.ln()
        + T::from_count(k) * lambda.ln()
        - z_f * lambda
        - ln_factorial::<T>(k);
    ln.exp()
}

/// `ln((n + 1)^n / n!)`, evaluated without the cancellation between the two
/// large terms for big `n`.
fn ln_power_over_factorial<T: Real>(n: u64) -> T {
    const EXACT_UP_TO: u64 = 32;
    if n == 0 {
        return T::zero();
    }
    let nf = T::from_count(n);
    if n <= EXACT_UP_TO {
        return nf * (nf + T::one()).ln() - ln_factorial::<T>(n);
    }
    // n ln(n+1) - ln n! with Stirling for ln n!, folding n ln(n+1) - n ln n
    // into n ln(1 + 1/n).
    let n2 = nf * nf;
    let n3 = n2 * nf;
    let n5 = n3 * n2;
    let n7 = n5 * n2;
    nf * nf.recip().ln_1p() + nf
        - T::lit(0.5) * (T::lit(2.0) * T::PI() * nf).ln()
        - T::one() / (T::lit(12.0) * nf)
        + T::one() / (T::lit(360.0) * n3)
        - T::one() / (T::lit(1260.0) * n5)
        + T::one() / (T::lit(1680.0) * n7)
}

/// Distribution of coded intervals between decode events.
pub fn x_pmf<T: Real>(x: i64, lambda: T) -> T {
    match x {
        x if x < 0 => T::zero(),
        0 => (-lambda).exp(),
        1 => lambda * (-lambda).exp(),
        _ => {
            if lambda == T::zero() {
                return T::zero();
            }
            let xf = T::from_count(x as u64);
            // (x-1)^(x-2) / (x-2)! with n = x - 2
            let ln =
                ln_power_over_factorial::<T>(x as u64 - 2) - xf.ln() + xf * (lambda.ln() - lambda);
            ln.exp()
        }
    }
}

/// Distribution of `W = max(X, 1)`.
pub fn w_pmf<T: Real>(w: i64, lambda: T) -> T {
    match w {
        1 => (lambda + T::one()) * (-lambda).exp(),
        w if w >= 2 => x_pmf(w, lambda),
        _ => T::zero(),
    }
}

/// Closed-form moments of `X` and the mean of `W`.
pub fn x_moments<T: Real>(lambda: T) -> Result<RenewalMoments<T>, AnalysisError> {
    check_lambda(lambda)?;
    let one = T::one();
    let mean = lambda * (-lambda).exp() / (one - lambda);
    let second_moment = (one - lambda + lambda * lambda) / ((one - lambda) * (one - lambda)) * mean;
    // E[X] / lambda, written so that lambda = 0 gives the limit 1.
    let w_mean = (-lambda).exp() / (one - lambda);
    Ok(RenewalMoments {
        mean,
        second_moment,
        w_mean,
    })
}

/// Result of an adaptively truncated series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSum<T> {
    pub value: T,
    /// Number of terms added (`x = 0 .. terms`).
    pub terms: u64,
    pub tail_bound: T,
}

const MAX_SERIES_TERMS: u64 = 50_000_000;

/// `sum_x x^power P(X = x)`, stopped once a geometric majorant of the tail
/// falls below [`Real::SERIES_TOLERANCE`].
///
/// For `x >= 2` consecutive terms satisfy
/// `t(x+1) / t(x) <= rho ((x+1)/x)^(power-1)` with `rho = lambda e^(1-lambda)`,
/// and that bound decreases in `x`, so `t(x) q / (1 - q)` bounds the rest.
pub fn x_pmf_series<T: Real>(lambda: T, power: u32) -> Result<SeriesSum<T>, AnalysisError> {
    check_lambda(lambda)?;
    let rho = lambda * (T::one() - lambda).exp();
    let mut acc = KahanSum::default();
    let mut x: u64 = 0;
    loop {
        let xf = T::from_count(x);
        let term = xf.powi(power as i32) * x_pmf(x as i64, lambda);
        acc.add(term);
        if x >= 2 {
            let growth = ((xf + T::one()) / xf).powi(power.saturating_sub(1) as i32);
            let q = rho * growth;
            if q < T::one() {
                let tail = term * q / (T::one() - q);
                if tail < T::SERIES_TOLERANCE {
                    return Ok(SeriesSum {
                        value: acc.value(),
                        terms: x + 1,
                        tail_bound: tail,
                    });
                }
            }
        }
        x += 1;
        if x > MAX_SERIES_TERMS {
            return Err(AnalysisError::NoConvergence { power, terms: x });
        }
    }
}

#[derive(Default)]
struct KahanSum<T> {
    sum: T,
    carry: T,
}

impl<T: Real> KahanSum<T> {
    fn add(&mut self, x: T) {
        let y = x - self.carry;
        let t = self.sum + y;
        self.carry = (t - self.sum) - y;
        self.sum = t;
    }

    fn value(&self) -> T {
        self.sum
    }
}

/// Expected in-order delivery delay with coded packets on one path, in
/// coded-path slots and seconds.
pub fn expected_delay_multipath<T: Real>(
    model: &LossModel<T>,
    paths: &[PathSpec<T>],
) -> Result<DelayEstimate<T>, AnalysisError> {
    let lambda = model.lambda;
    check_lambda(lambda)?;
    let one = T::one();
    let two = T::lit(2.0);
    let rc = paths
        .get(model.coded_path)
        .ok_or(PolicyError::NoSuchPath {
            coded: model.coded_path,
            paths: paths.len(),
        })?
        .rate;
    let l = T::from_count(model.coded_interval as u64);
    let quad = one - lambda + lambda * lambda;
    let gap2 = (one - lambda) * (one - lambda);
    let total_rate: T = paths.iter().map(|p| p.rate).sum();

    let coded_term = rc * rc * rc * (l - one) * quad;
    let other_terms: T = paths
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != model.coded_path)
        .map(|(_, p)| {
            let ri = p.rate;
            l * ri * ri * ri * quad - ri * ri * rc * gap2
        })
        .sum();
    let slots = lambda / (two * rc * rc * gap2 * total_rate) * (coded_term + other_terms);
    Ok(DelayEstimate {
        slots,
        seconds: slots / rc,
    })
}

/// Single-path delay in packet slots:
/// `lambda (l - 1)(1 - lambda + lambda^2) / (2 (1 - lambda)^2)`.
pub fn expected_delay_single<T: Real>(lambda: T, interval: u32) -> Result<T, AnalysisError> {
    check_lambda(lambda)?;
    let one = T::one();
    let l = T::from_count(interval as u64);
    Ok(lambda * (l - one) * (one - lambda + lambda * lambda)
        / (T::lit(2.0) * (one - lambda) * (one - lambda)))
}

/// Empirical statistics of the decode inter-arrival time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub samples: u64,
    pub mean: f64,
    pub second_moment: f64,
    /// `histogram[x]` counts samples equal to `x`.
    pub histogram: Vec<u64>,
    /// Samples beyond the last histogram bin.
    pub overflow: u64,
}

impl OracleReport {
    pub fn frequency(&self, x: usize) -> f64 {
        self.histogram.get(x).copied().unwrap_or(0) as f64 / self.samples as f64
    }
}

/// Histogram bins kept by [`renewal_oracle`].
pub const ORACLE_BINS: usize = 64;
/// Per-sample cap on simulated slots.
pub const ORACLE_SLOT_CAP: u64 = 1_000_000;

/// Monte-Carlo mirror of the busy-period construction: draw the losses of the
/// first interval; with 0 or 1 loss the renewal time is that count, otherwise
/// run a unit-service queue fed by Poisson(lambda) losses per slot from a
/// backlog of `losses - 1` until it empties.
pub fn renewal_oracle(
    lambda: f64,
    n_samples: u64,
    seed: u64,
) -> Result<OracleReport, AnalysisError> {
    check_lambda(lambda)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut histogram = vec![0u64; ORACLE_BINS];
    let mut overflow = 0u64;
    let mut sum = 0.0f64;
    let mut sum_sq = 0.0f64;
    let poisson = (lambda > 0.0).then(|| Poisson::new(lambda).expect("0 < lambda < 1"));
    let draw = |rng: &mut ChaCha8Rng| poisson.as_ref().map_or(0u64, |p| p.sample(rng) as u64);

    for _ in 0..n_samples {
        let first = draw(&mut rng);
        let x = if first <= 1 {
            first
        } else {
            let mut backlog = first - 1;
            let mut slots = 1u64;
            while backlog > 0 {
                slots += 1;
                if slots > ORACLE_SLOT_CAP {
                    return Err(AnalysisError::SampleCap(ORACLE_SLOT_CAP));
                }
                backlog = backlog + draw(&mut rng) - 1;
            }
            slots
        };
        match histogram.get_mut(x as usize) {
            Some(bin) => *bin += 1,
            None => overflow += 1,
        }
        let xf = x as f64;
        sum += xf;
        sum_sq += xf * xf;
    }
    let n = n_samples.max(1) as f64;
    Ok(OracleReport {
        samples: n_samples,
        mean: sum / n,
        second_moment: sum_sq / n,
        histogram,
        overflow,
    })
}
