//! Result tables and the run summary.

use std::io::Write;

use mpcode::policy::Interval;
use mpcode::sim::{RowStatus, SweepRow};
use serde::Serialize;

/// Column order of the per-point table.
pub const COLUMNS: &[&str] = &[
    "point",
    "status",
    "seed",
    "rates",
    "erasures",
    "prop_delays",
    "intervals",
    "coded_path",
    "l_c",
    "lambda",
    "analytic_slots",
    "analytic_seconds",
    "sim_mean_delay_s",
    "sim_std_delay_s",
    "band_low_s",
    "band_high_s",
    "sim_mean_excess_slots",
    "sim_std_excess_slots",
    "throughput",
    "completion_time_s",
    "renewals",
    "error",
];

/// One output record. Lists hold one value per path, separated by `;`.
/// Missing values are empty strings.
#[derive(Debug, Clone, Serialize)]
pub struct Record {
    pub point: usize,
    pub status: &'static str,
    pub seed: u64,
    pub rates: String,
    pub erasures: String,
    pub prop_delays: String,
    pub intervals: String,
    pub coded_path: String,
    pub l_c: String,
    pub lambda: String,
    pub analytic_slots: String,
    pub analytic_seconds: String,
    pub sim_mean_delay_s: String,
    pub sim_std_delay_s: String,
    pub band_low_s: String,
    pub band_high_s: String,
    pub sim_mean_excess_slots: String,
    pub sim_std_excess_slots: String,
    pub throughput: String,
    pub completion_time_s: String,
    pub renewals: String,
    pub error: String,
}

/// Shortest round-trip decimal form; never locale dependent.
fn num(x: f64) -> String {
    if x.is_finite() {
        format!("{x:?}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn joined<T>(xs: impl IntoIterator<Item = T>, f: impl Fn(T) -> String) -> String {
    xs.into_iter().map(f).collect::<Vec<_>>().join(";")
}

pub fn record(row: &SweepRow) -> Record {
    let cfg = &row.config;
    let coded = cfg.policy.coded_path();
    let (status, error) = match &row.status {
        RowStatus::Ok => ("ok", row.analysis_note.clone().unwrap_or_default()),
        RowStatus::Inadmissible(e) => ("inadmissible", e.clone()),
        RowStatus::Failed(e) => ("failed", e.clone()),
    };
    let s = row.summary.as_ref();
    Record {
        point: row.point,
        status,
        seed: cfg.seed,
        rates: joined(&cfg.paths, |p| num(p.rate)),
        erasures: joined(&cfg.paths, |p| num(p.erasure)),
        prop_delays: joined(&cfg.paths, |p| num(p.prop_delay)),
        intervals: joined(&cfg.policy.intervals, |i| i.to_string()),
        coded_path: coded.map(|c| c.to_string()).unwrap_or_default(),
        l_c: coded
            .and_then(|c| match cfg.policy.intervals[c] {
                Interval::Every(l) => Some(l.to_string()),
                Interval::Never => None,
            })
            .unwrap_or_default(),
        lambda: opt(row.lambda),
        analytic_slots: opt(row.analytic.map(|a| a.slots)),
        analytic_seconds: opt(row.analytic.map(|a| a.seconds)),
        sim_mean_delay_s: opt(s.map(|s| s.mean_delay)),
        sim_std_delay_s: opt(s.map(|s| s.std_delay)),
        band_low_s: opt(s.map(|s| s.mean_delay - 2.0 * s.std_delay)),
        band_high_s: opt(s.map(|s| s.mean_delay + 2.0 * s.std_delay)),
        sim_mean_excess_slots: opt(s.map(|s| s.mean_excess_slots)),
        sim_std_excess_slots: opt(s.map(|s| s.std_excess_slots)),
        throughput: opt(s.map(|s| s.throughput)),
        completion_time_s: opt(s.map(|s| s.completion_time)),
        renewals: s.map(|s| s.renewals.to_string()).unwrap_or_default(),
        error,
    }
}

/// Writes the header and one line per row.
pub fn write_csv<W: Write>(out: W, rows: &[SweepRow]) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(out);
    w.write_record(COLUMNS)?;
    for row in rows {
        w.serialize(record(row))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_json<W: Write>(out: W, rows: &[SweepRow]) -> serde_json::Result<()> {
    let records: Vec<Record> = rows.iter().map(record).collect();
    serde_json::to_writer_pretty(out, &records)
}

/// Simulated against predicted excess delay for one point.
#[derive(Debug, Clone, Serialize)]
pub struct Delta {
    pub point: usize,
    pub lambda: f64,
    pub analytic_slots: f64,
    pub sim_excess_slots: f64,
    /// `|sim - analytic| / analytic`; absent when the prediction is zero.
    pub relative_delta: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub generated_at: String,
    pub config: String,
    pub points: usize,
    pub ok: usize,
    pub inadmissible: usize,
    pub failed: usize,
    pub deltas: Vec<Delta>,
    pub max_relative_delta: Option<f64>,
}

pub fn summarize(config: &str, rows: &[SweepRow], generated_at: String) -> Summary {
    let count = |f: fn(&RowStatus) -> bool| rows.iter().filter(|r| f(&r.status)).count();
    let deltas: Vec<Delta> = rows
        .iter()
        .filter_map(|r| {
            let a = r.analytic?;
            let s = r.summary.as_ref()?;
            Some(Delta {
                point: r.point,
                lambda: r.lambda?,
                analytic_slots: a.slots,
                sim_excess_slots: s.mean_excess_slots,
                relative_delta: (a.slots != 0.0)
                    .then(|| ((s.mean_excess_slots - a.slots) / a.slots).abs()),
            })
        })
        .collect();
    let max_relative_delta = deltas
        .iter()
        .filter_map(|d| d.relative_delta)
        .fold(None, |m: Option<f64>, x| Some(m.map_or(x, |m| m.max(x))));
    Summary {
        generated_at,
        config: config.to_string(),
        points: rows.len(),
        ok: count(|s| matches!(s, RowStatus::Ok)),
        inadmissible: count(|s| matches!(s, RowStatus::Inadmissible(_))),
        failed: count(|s| matches!(s, RowStatus::Failed(_))),
        deltas,
        max_relative_delta,
    }
}
