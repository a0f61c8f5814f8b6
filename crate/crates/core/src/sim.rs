//! Discrete-event simulation of a coded session over parallel erasure paths.
//!
//! Each path transmits back to back, one packet every `1 / r_i` seconds,
//! asking the shared [`Encoder`] what to send at the start of every slot.
//! A packet survives with probability `1 - eps_i` and reaches the client
//! `d_i` seconds after its transmission completes (plus `max_j d_j - d_i`
//! when slow-path alignment is on). The client reports its `seen` index every
//! feedback period over a lossless side channel with the smallest path delay.
//!
//! The clock is exact: event times are rationals in seconds, so simultaneous
//! events on paths with commensurate rates tie exactly and are ordered
//! deterministically (arrivals, then feedback, then transmissions, lower path
//! index first).

use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

use num_rational::Ratio;
use num_traits::ToPrimitive;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{build_loss_model, expected_delay_multipath, DelayEstimate};
use crate::codec::{CodecError, Decoder, Encoder, FeedbackMessage, Packet};
use crate::galois::{Field, FieldConfig, GaloisError};
use crate::policy::{CodingPolicy, Interval, PathSpec, PolicyError};

/// Simulation clock in seconds.
pub type SimTime = Ratio<i128>;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("session needs at least one information packet")]
    NoPackets,
    #[error("feedback period must be positive, got {0}")]
    FeedbackPeriod(f64),
    #[error("{0} cannot be represented on the simulation clock")]
    Clock(f64),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error(transparent)]
    Field(#[from] GaloisError),
    #[error(transparent)]
    Codec(#[from] CodecError),
    #[error("transmission cap of {cap} packets reached with {delivered} of {total} delivered")]
    TransmissionCap {
        cap: u64,
        delivered: u32,
        total: u32,
    },
    #[error("packet {0} decoded to the wrong payload")]
    Corrupt(u32),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub paths: Vec<PathSpec<f64>>,
    pub policy: CodingPolicy,
    pub num_info: u32,
    pub seed: u64,
    /// Hold every arrival on path `i` back by `max_j d_j - d_i`.
    pub align_slow_path: bool,
    /// Seconds between feedback reports; `None` means one coded interval
    /// `l_c / r_c` of the fastest-cycling coded path.
    pub feedback_period: Option<f64>,
    pub adaptive_redundancy: bool,
    pub payload_len: usize,
    pub field: FieldConfig,
    /// Leave the last coded interval's worth of packets out of the summary
    /// statistics (the samples are still recorded).
    pub exclude_tail: bool,
}

impl SimConfig {
    /// Single coded path with defaults for everything else.
    pub fn new(paths: Vec<PathSpec<f64>>, policy: CodingPolicy, num_info: u32, seed: u64) -> Self {
        SimConfig {
            paths,
            policy,
            num_info,
            seed,
            align_slow_path: false,
            feedback_period: None,
            adaptive_redundancy: false,
            payload_len: 16,
            field: FieldConfig::GF256,
            exclude_tail: false,
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.num_info == 0 {
            return Err(SimError::NoPackets);
        }
        if let Some(p) = self.feedback_period {
            if !(p > 0.0 && p.is_finite()) {
                return Err(SimError::FeedbackPeriod(p));
            }
        }
        Field::new(self.field)?;
        self.policy.check(&self.paths)?;
        Ok(())
    }

    /// Feedback period in seconds after applying the default.
    pub fn effective_feedback_period(&self) -> f64 {
        self.feedback_period.unwrap_or_else(|| {
            self.policy
                .intervals
                .iter()
                .zip(&self.paths)
                .filter_map(|(i, p)| i.get().map(|l| l as f64 / p.rate))
                .fold(f64::INFINITY, f64::min)
        })
    }

    /// Rate of the path the delay is measured in: the single coded path, or
    /// the first path carrying coded packets.
    pub fn reference_rate(&self) -> f64 {
        self.policy
            .intervals
            .iter()
            .position(|i| matches!(i, Interval::Every(_)))
            .map_or(self.paths[0].rate, |i| self.paths[i].rate)
    }
}

/// Per-path transmission counters.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathStats {
    pub info_sent: u64,
    pub coded_sent: u64,
    pub erased: u64,
    pub idle_slots: u64,
}

impl PathStats {
    pub fn transmitted(&self) -> u64 {
        self.info_sent + self.coded_sent
    }
}

/// Aggregate figures of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    /// Mean in-order delay in seconds, measured from the start of each
    /// packet's transmission.
    pub mean_delay: f64,
    /// Sample standard deviation of the delay in seconds.
    pub std_delay: f64,
    /// Mean delay beyond the lossless transit time `t_i + d_i` (plus
    /// alignment), in packet slots of the reference path.
    pub mean_excess_slots: f64,
    pub std_excess_slots: f64,
    /// Delivered packets per second.
    pub throughput: f64,
    /// Time of the last in-order delivery, seconds.
    pub completion_time: f64,
    /// Arrivals of coded packets that released buffered packets.
    pub renewals: u64,
    pub innovative: u64,
    pub redundant: u64,
    pub paths: Vec<PathStats>,
    /// Packets contributing to the statistics.
    pub counted: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimResult {
    /// In-order delay of packet `i + 1` in seconds.
    pub delays: Vec<f64>,
    /// Delay of packet `i + 1` beyond its lossless transit time, in slots.
    pub excess_slots: Vec<f64>,
    /// Path each information packet was sent on.
    pub sent_on: Vec<u16>,
    pub summary: SimSummary,
}

/// Erasure with probability `epsilon`.
pub fn erasure_draw<R: Rng + ?Sized>(epsilon: f64, rng: &mut R) -> bool {
    rng.random::<f64>() < epsilon
}

/// Independent loss process for one path, seeded from the session seed and
/// the path index.
#[derive(Debug, Clone)]
pub struct ErasureChannel {
    epsilon: f64,
    rng: ChaCha8Rng,
}

impl ErasureChannel {
    pub fn new(epsilon: f64, seed: u64, path: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(1 + path as u64);
        ErasureChannel { epsilon, rng }
    }

    pub fn draw(&mut self) -> bool {
        erasure_draw(self.epsilon, &mut self.rng)
    }
}

/// Deterministic payload of packet `index`, one symbol of GF(`order`) per byte.
pub fn payload_for(seed: u64, index: u32, len: usize, order: u16) -> Vec<u8> {
    let mut state = seed ^ (index as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut out = Vec::with_capacity(len);
    while out.len() < len {
        // splitmix64
        state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
        out.extend(z.to_le_bytes().iter().take(len - out.len()));
    }
    let mask = (order - 1) as u8;
    out.iter_mut().for_each(|b| *b &= mask);
    out
}

fn to_clock(x: f64) -> Result<SimTime, SimError> {
    if x == 0.0 {
        return Ok(SimTime::from_integer(0));
    }
    Ratio::<i128>::approximate_float(x).ok_or(SimError::Clock(x))
}

fn seconds(t: SimTime) -> f64 {
    t.to_f64().unwrap_or(f64::NAN)
}

#[derive(Debug)]
enum Event {
    Arrival { path: usize, packet: Packet },
    FeedbackArrive(FeedbackMessage),
    FeedbackSend,
    TransmitStart { path: usize },
}

impl Event {
    fn rank(&self) -> (u8, usize) {
        match self {
            Event::Arrival { path, .. } => (0, *path),
            Event::FeedbackArrive(_) => (1, 0),
            Event::FeedbackSend => (2, 0),
            Event::TransmitStart { path } => (3, *path),
        }
    }
}

struct Scheduled {
    time: SimTime,
    rank: (u8, usize),
    seq: u64,
    event: Event,
}

impl Scheduled {
    fn key(&self) -> (&SimTime, (u8, usize), u64) {
        (&self.time, self.rank, self.seq)
    }
}

impl PartialEq for Scheduled {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl Eq for Scheduled {}

impl PartialOrd for Scheduled {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Scheduled {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

#[derive(Default)]
struct Queue {
    heap: BinaryHeap<Reverse<Scheduled>>,
    seq: u64,
}

impl Queue {
    fn push(&mut self, time: SimTime, event: Event) {
        self.seq += 1;
        let rank = event.rank();
        self.heap.push(Reverse(Scheduled {
            time,
            rank,
            seq: self.seq,
            event,
        }));
    }

    fn pop(&mut self) -> Option<(SimTime, Event)> {
        self.heap.pop().map(|Reverse(s)| (s.time, s.event))
    }
}

/// Runs one session to completion.
pub fn run(config: &SimConfig) -> Result<SimResult, SimError> {
    config.validate()?;
    let m = config.num_info;
    let n_paths = config.paths.len();
    let field = Field::new(config.field)?;

    let packet_time: Vec<SimTime> = config
        .paths
        .iter()
        .map(|p| to_clock(p.rate).map(|r| r.recip()))
        .collect::<Result<_, _>>()?;
    let prop: Vec<SimTime> = config
        .paths
        .iter()
        .map(|p| to_clock(p.prop_delay))
        .collect::<Result<_, _>>()?;
    let max_prop = prop.iter().max().cloned().expect("at least one path");
    let feedback_delay = prop.iter().min().cloned().expect("at least one path");
    let hold: Vec<SimTime> = prop
        .iter()
        .map(|d| {
            if config.align_slow_path {
                max_prop - d
            } else {
                SimTime::from_integer(0)
            }
        })
        .collect();
    let period = to_clock(config.effective_feedback_period())?;
    let reference_rate = config.reference_rate();
    // lossless transit per path, in seconds
    let transit: Vec<f64> = (0..n_paths)
        .map(|i| seconds(packet_time[i] + prop[i] + hold[i]))
        .collect();

    let mut encoder = Encoder::new(field.clone(), config.policy.intervals.clone(), m)
        .with_adaptive_redundancy(config.adaptive_redundancy);
    let mut decoder = Decoder::new(field);
    let mut coeff_rng = ChaCha8Rng::seed_from_u64(config.seed);
    coeff_rng.set_stream(0);
    let mut channels: Vec<ErasureChannel> = config
        .paths
        .iter()
        .enumerate()
        .map(|(i, p)| ErasureChannel::new(p.erasure, config.seed, i))
        .collect();

    let mut start: Vec<SimTime> = vec![SimTime::from_integer(0); m as usize];
    let mut sent_on: Vec<u16> = vec![0; m as usize];
    let mut delays: Vec<f64> = vec![f64::NAN; m as usize];
    let mut excess: Vec<f64> = vec![f64::NAN; m as usize];
    let mut stats = vec![PathStats::default(); n_paths];
    let mut renewals = 0u64;
    let mut innovative = 0u64;
    let mut redundant = 0u64;
    let mut transmissions = 0u64;
    let cap = 100 * m as u64;
    let mut completion: Option<SimTime> = None;

    let mut queue = Queue::default();
    for path in 0..n_paths {
        queue.push(SimTime::from_integer(0), Event::TransmitStart { path });
    }
    queue.push(period, Event::FeedbackSend);

    while let Some((now, event)) = queue.pop() {
        match event {
            Event::TransmitStart { path } => {
                if completion.is_some() {
                    continue;
                }
                queue.push(now + packet_time[path], Event::TransmitStart { path });
                let packet = encoder.next_packet(path, &mut coeff_rng, |k| {
                    payload_for(config.seed, k, config.payload_len, config.field.order)
                })?;
                let Some(packet) = packet else {
                    stats[path].idle_slots += 1;
                    continue;
                };
                transmissions += 1;
                if transmissions > cap {
                    return Err(SimError::TransmissionCap {
                        cap,
                        delivered: decoder.delivered(),
                        total: m,
                    });
                }
                match &packet {
                    Packet::Info(p) => {
                        stats[path].info_sent += 1;
                        start[p.index as usize - 1] = now;
                        sent_on[p.index as usize - 1] = path as u16;
                    }
                    Packet::Coded(_) => stats[path].coded_sent += 1,
                }
                if channels[path].draw() {
                    stats[path].erased += 1;
                } else {
                    let at = now + packet_time[path] + prop[path] + hold[path];
                    queue.push(at, Event::Arrival { path, packet });
                }
            }
            Event::Arrival { packet, .. } => {
                let rank_before = decoder.rank();
                let released = decoder.receive(&packet)?;
                if decoder.rank() > rank_before {
                    innovative += 1;
                } else {
                    redundant += 1;
                }
                if packet.is_coded() && !released.is_empty() {
                    renewals += 1;
                }
                for p in released {
                    let i = p.index as usize - 1;
                    if p.payload
                        != payload_for(config.seed, p.index, config.payload_len, config.field.order)
                    {
                        return Err(SimError::Corrupt(p.index));
                    }
                    let d = seconds(now - start[i]);
                    delays[i] = d;
                    excess[i] = (d - transit[sent_on[i] as usize]) * reference_rate;
                }
                if completion.is_none() && decoder.delivered() == m {
                    completion = Some(now);
                }
            }
            Event::FeedbackSend => {
                if completion.is_some() {
                    continue;
                }
                queue.push(
                    now + feedback_delay,
                    Event::FeedbackArrive(decoder.feedback()),
                );
                queue.push(now + period, Event::FeedbackSend);
            }
            Event::FeedbackArrive(fb) => encoder.on_feedback(fb),
        }
    }

    let completion = completion.expect("event loop only drains after completion");
    let counted = if config.exclude_tail {
        let tail = tail_len(config);
        m.saturating_sub(tail).max(1)
    } else {
        m
    };
    let (mean_delay, std_delay) = mean_std(&delays[..counted as usize]);
    let (mean_excess_slots, std_excess_slots) = mean_std(&excess[..counted as usize]);
    let completion_time = seconds(completion);
    Ok(SimResult {
        delays,
        excess_slots: excess,
        sent_on,
        summary: SimSummary {
            mean_delay,
            std_delay,
            mean_excess_slots,
            std_excess_slots,
            throughput: m as f64 / completion_time,
            completion_time,
            renewals,
            innovative,
            redundant,
            paths: stats,
            counted,
        },
    })
}

/// Information packets sent across all paths during one coded interval.
fn tail_len(config: &SimConfig) -> u32 {
    let total_rate: f64 = config.paths.iter().map(|p| p.rate).sum();
    let period = config.effective_feedback_period();
    if period.is_finite() {
        (period * total_rate).ceil() as u32
    } else {
        0
    }
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Grid of sweep points. Each dimension left as `None` keeps the base value;
/// an empty list yields no points at all. Points are ordered erasure vector
/// first, then interval, then seed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepGrid {
    /// Intervals applied to every path that carries coded packets in the base
    /// policy.
    pub intervals: Option<Vec<u32>>,
    /// One erasure probability per path.
    pub erasures: Option<Vec<Vec<f64>>>,
    pub seeds: Option<Vec<u64>>,
}

impl SweepGrid {
    pub fn empty() -> Self {
        SweepGrid {
            intervals: Some(Vec::new()),
            erasures: None,
            seeds: None,
        }
    }

    /// Expands the grid against `base`, in sweep order.
    pub fn points(&self, base: &SimConfig) -> Vec<SimConfig> {
        let erasures = self
            .erasures
            .clone()
            .unwrap_or_else(|| vec![base.paths.iter().map(|p| p.erasure).collect()]);
        let intervals: Vec<Option<u32>> = match &self.intervals {
            Some(v) => v.iter().map(|&l| Some(l)).collect(),
            None => vec![None],
        };
        let seeds = self.seeds.clone().unwrap_or_else(|| vec![base.seed]);
        let mut out = Vec::new();
        for eps in &erasures {
            for &l in &intervals {
                for &seed in &seeds {
                    let mut cfg = base.clone();
                    for (p, &e) in cfg.paths.iter_mut().zip(eps) {
                        p.erasure = e;
                    }
                    if let Some(l) = l {
                        for i in cfg.policy.intervals.iter_mut() {
                            if let Interval::Every(_) = i {
                                *i = Interval::Every(l);
                            }
                        }
                    }
                    cfg.seed = seed;
                    out.push(cfg);
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RowStatus {
    Ok,
    /// Not run: the policy fails an admissibility check.
    Inadmissible(String),
    /// Run attempted and failed.
    Failed(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub point: usize,
    pub config: SimConfig,
    pub status: RowStatus,
    pub lambda: Option<f64>,
    pub analytic: Option<DelayEstimate<f64>>,
    /// Why no analytic prediction exists for an admissible point.
    pub analysis_note: Option<String>,
    pub summary: Option<SimSummary>,
}

/// Evaluates one configuration: analytic prediction plus simulation.
pub fn evaluate(point: usize, config: SimConfig) -> SweepRow {
    let mut row = SweepRow {
        point,
        config,
        status: RowStatus::Ok,
        lambda: None,
        analytic: None,
        analysis_note: None,
        summary: None,
    };
    if let Err(e) = row.config.policy.check(&row.config.paths) {
        row.status = RowStatus::Inadmissible(e.to_string());
        return row;
    }
    match build_loss_model(&row.config.paths, &row.config.policy) {
        Ok(model) => {
            row.lambda = Some(model.lambda);
            match expected_delay_multipath(&model, &row.config.paths) {
                Ok(d) => row.analytic = Some(d),
                Err(e) => row.analysis_note = Some(e.to_string()),
            }
        }
        Err(e) => row.analysis_note = Some(e.to_string()),
    }
    match run(&row.config) {
        Ok(r) => row.summary = Some(r.summary),
        Err(e) => row.status = RowStatus::Failed(e.to_string()),
    }
    row
}

/// Runs every grid point in parallel; rows come back in grid order.
pub fn sweep(base: &SimConfig, grid: &SweepGrid) -> Vec<SweepRow> {
    grid.points(base)
        .into_par_iter()
        .enumerate()
        .map(|(i, cfg)| evaluate(i, cfg))
        .collect()
}
