//! Independent reference implementations used as test oracles.
//!
//! Nothing here touches the library's arithmetic: field products are computed
//! by shift-and-add, inverses by exhaustive search, and decoding by dense
//! Gauss-Jordan elimination over the full `M`-column matrix.

#![allow(dead_code)]

use mpcode::policy::{CodingPolicy, Interval, PathSpec};
use mpcode::{Decoder, Encoder, Field, FieldConfig, Packet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::collections::VecDeque;

/// GF(2^m) by carry-less shift-and-add with reduction modulo `poly`.
#[derive(Debug, Clone)]
pub struct RefField {
    pub poly: u16,
    pub degree: u32,
    inv: Vec<u8>,
}

impl RefField {
    pub fn new(config: FieldConfig) -> Self {
        let degree = config.order.trailing_zeros();
        let mut f = RefField {
            poly: config.poly,
            degree,
            inv: Vec::new(),
        };
        let q = config.order as usize;
        f.inv = (0..q)
            .map(|a| (1..q).find(|&b| f.mul(a as u8, b as u8) == 1).unwrap_or(0) as u8)
            .collect();
        f
    }

    pub fn order(&self) -> usize {
        1 << self.degree
    }

    pub fn mul(&self, a: u8, b: u8) -> u8 {
        let top = 1u16 << self.degree;
        let (mut a, mut b, mut acc) = (a as u16, b, 0u16);
        while b != 0 {
            if b & 1 != 0 {
                acc ^= a;
            }
            b >>= 1;
            a <<= 1;
            if a & top != 0 {
                a ^= self.poly;
            }
        }
        acc as u8
    }

    pub fn inv(&self, a: u8) -> u8 {
        self.inv[a as usize]
    }
}

/// Dense row-reduced matrix over all `m` information packets, with payloads.
#[derive(Debug, Clone)]
pub struct DenseOracle {
    f: RefField,
    m: usize,
    rows: Vec<(usize, Vec<u8>, Vec<u8>)>,
}

impl DenseOracle {
    pub fn new(f: RefField, m: usize) -> Self {
        DenseOracle {
            f,
            m,
            rows: Vec::new(),
        }
    }

    pub fn rank(&self) -> usize {
        self.rows.len()
    }

    fn axpy(&self, dst: &mut [u8], src: &[u8], c: u8) {
        for (d, s) in dst.iter_mut().zip(src) {
            *d ^= self.f.mul(c, *s);
        }
    }

    /// Adds a row; returns whether it raised the rank.
    pub fn insert(&mut self, mut coeffs: Vec<u8>, mut payload: Vec<u8>) -> bool {
        assert_eq!(coeffs.len(), self.m);
        for (p, rc, rp) in &self.rows {
            let c = coeffs[*p];
            if c != 0 {
                self.axpy(&mut coeffs, rc, c);
                self.axpy(&mut payload, rp, c);
            }
        }
        let Some(pivot) = coeffs.iter().position(|&c| c != 0) else {
            return false;
        };
        let s = self.f.inv(coeffs[pivot]);
        for x in coeffs.iter_mut() {
            *x = self.f.mul(s, *x);
        }
        for x in payload.iter_mut() {
            *x = self.f.mul(s, *x);
        }
        let mut rows = std::mem::take(&mut self.rows);
        for (_, rc, rp) in rows.iter_mut() {
            let c = rc[pivot];
            if c != 0 {
                self.axpy(rc, &coeffs, c);
                self.axpy(rp, &payload, c);
            }
        }
        rows.push((pivot, coeffs, payload));
        self.rows = rows;
        true
    }

    /// Payload of packet `k` (0-based) if the unit vector `e_k` is in the span.
    pub fn decoded(&self, k: usize) -> Option<&[u8]> {
        self.rows
            .iter()
            .find(|(p, rc, _)| *p == k && rc.iter().enumerate().all(|(j, &c)| (j == k) == (c != 0)))
            .map(|(_, _, rp)| rp.as_slice())
    }

    /// Length of the longest prefix `1..=n` that is fully decodable.
    pub fn decodable_prefix(&self) -> usize {
        (0..self.m)
            .take_while(|&k| self.decoded(k).is_some())
            .count()
    }

    /// Expands a packet to a full-width row.
    pub fn dense(&self, packet: &Packet) -> (Vec<u8>, Vec<u8>) {
        let mut row = vec![0u8; self.m];
        match packet {
            Packet::Info(p) => row[p.index as usize - 1] = 1,
            Packet::Coded(c) => {
                for (j, x) in c.coefficients.iter().enumerate() {
                    row[c.window_low as usize - 1 + j] = x.value();
                }
            }
        }
        (row, packet.payload().to_vec())
    }
}

/// Deterministic payload of packet `k` for a session seed.
pub fn source_payload(seed: u64, k: u32, len: usize, order: u16) -> Vec<u8> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (k as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    (0..len).map(|_| rng.random_range(0..order) as u8).collect()
}

/// A randomly drawn session: paths, admissible policy and feedback lag.
#[derive(Debug, Clone)]
pub struct Session {
    pub field: FieldConfig,
    pub num_info: u32,
    pub erasures: Vec<f64>,
    pub policy: CodingPolicy,
    pub feedback_lag: usize,
    pub payload_len: usize,
    pub seed: u64,
}

impl Session {
    /// Draws paths and intervals until the policy is admissible.
    pub fn random<R: Rng>(rng: &mut R, field: FieldConfig, max_m: u32) -> Self {
        loop {
            let n = rng.random_range(1..=3usize);
            let erasures: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..0.3)).collect();
            let intervals: Vec<Interval> = (0..n)
                .map(|i| {
                    if i > 0 && rng.random_bool(0.4) {
                        Interval::Never
                    } else {
                        Interval::every(rng.random_range(1..=12))
                    }
                })
                .collect();
            let policy = CodingPolicy::new(intervals);
            let paths: Vec<PathSpec<f64>> = erasures
                .iter()
                .map(|&e| PathSpec::new(1.0, e, 0.0).unwrap())
                .collect();
            if policy.check(&paths).is_err() {
                continue;
            }
            return Session {
                field,
                num_info: rng.random_range(1..=max_m),
                erasures,
                policy,
                feedback_lag: rng.random_range(0..=6),
                payload_len: rng.random_range(1..=8),
                seed: rng.random(),
            };
        }
    }
}

/// Runs `session` slot by slot through the streaming codec and the dense
/// oracle in lockstep. Returns a description of the first disagreement.
pub fn check_session(s: &Session) -> Result<(), String> {
    let field = Field::new(s.field).map_err(|e| e.to_string())?;
    let m = s.num_info as usize;
    let mut oracle = DenseOracle::new(RefField::new(s.field), m);
    let mut enc = Encoder::new(field.clone(), s.policy.intervals.clone(), s.num_info);
    let mut dec = Decoder::new(field);
    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut feedback = VecDeque::new();
    let mut delivered = 0u32;
    let mut last_seen = 0u32;
    let cap = 100 * m + 100;

    for slot in 0..cap {
        for (path, &eps) in s.erasures.iter().enumerate() {
            let (seed, len, order) = (s.seed, s.payload_len, s.field.order);
            let Some(pkt) = enc
                .next_packet(path, &mut rng, |k| source_payload(seed, k, len, order))
                .map_err(|e| format!("slot {slot}: encoder: {e}"))?
            else {
                continue;
            };
            if rng.random_bool(eps) {
                continue;
            }
            let (row, payload) = oracle.dense(&pkt);
            let rank_before = dec.rank();
            let innovative = oracle.insert(row, payload);
            let out = dec
                .receive(&pkt)
                .map_err(|e| format!("slot {slot}: decoder: {e}"))?;
            if (dec.rank() > rank_before) != innovative {
                return Err(format!("slot {slot}: innovativeness disagrees"));
            }
            if dec.rank() != oracle.rank() as u64 {
                return Err(format!(
                    "slot {slot}: rank {} vs oracle {}",
                    dec.rank(),
                    oracle.rank()
                ));
            }
            for p in out {
                delivered += 1;
                if p.index != delivered {
                    return Err(format!("delivered {} where {} was due", p.index, delivered));
                }
                let want = source_payload(s.seed, p.index, s.payload_len, s.field.order);
                if p.payload != want {
                    return Err(format!("packet {}: wrong payload", p.index));
                }
                if oracle.decoded(p.index as usize - 1) != Some(want.as_slice()) {
                    return Err(format!("packet {}: oracle payload differs", p.index));
                }
            }
            if delivered as usize != oracle.decodable_prefix() || dec.delivered() != delivered {
                return Err(format!(
                    "slot {slot}: delivered {delivered}, oracle prefix {}",
                    oracle.decodable_prefix()
                ));
            }
        }
        let fb = dec.feedback();
        if fb.seen_index < last_seen {
            return Err("seen index decreased".into());
        }
        last_seen = fb.seen_index;
        feedback.push_back(fb);
        if feedback.len() > s.feedback_lag {
            let fb = feedback.pop_front().unwrap();
            enc.on_feedback(fb);
            if enc.window().0 > fb.seen_index + 1 {
                return Err("window edge passed seen + 1".into());
            }
        }
        if delivered == s.num_info {
            return Ok(());
        }
    }
    Err(format!(
        "not finished after {cap} slots: {delivered} of {m}"
    ))
}
