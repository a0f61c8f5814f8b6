//! Systematic multi-path streaming code.
//!
//! The [`Encoder`] sends information packets uncoded and, on each path with a
//! finite interval `l`, follows every `l - 1` information packets with one
//! random linear combination of the packets in the current code window. The
//! window's upper edge tracks the last information packet sent; its lower edge
//! sits one past the last `seen` index fed back by the client.
//!
//! The [`Decoder`] keeps received packets as rows of a matrix in reduced
//! row-echelon form keyed by pivot index. A packet is *seen* once a row pivots
//! on it and *decoded* once that row has no other nonzero column. Decoded
//! packets are released strictly in index order.

use std::collections::{BTreeMap, VecDeque};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::galois::{Field, FieldElement, GaloisError};
use crate::policy::Interval;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodecError {
    #[error("path {path} out of range ({paths} paths)")]
    NoSuchPath { path: usize, paths: usize },
    #[error("payload length {got} differs from session length {expected}")]
    PayloadLength { expected: usize, got: usize },
    #[error("window ({low}, {high}) carries {got} coefficients")]
    CoefficientCount { low: u32, high: u32, got: usize },
    #[error("malformed window ({low}, {high})")]
    BadWindow { low: u32, high: u32 },
    #[error("packet index 0 is reserved")]
    ZeroIndex,
    #[error("coefficient vector is all zero")]
    ZeroCoefficients,
    #[error("coefficient {0} is not an element of the field")]
    NotInField(FieldElement),
    #[error("packet references index {0}, which has been pruned from the decoded store")]
    Pruned(u32),
    #[error("truncated header: need {need} bytes, got {got}")]
    Truncated { need: usize, got: usize },
    #[error(transparent)]
    Field(#[from] GaloisError),
}

/// Uncoded information packet `p_index`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InfoPacket {
    pub index: u32,
    pub payload: Vec<u8>,
}

/// Linear combination of `p_low ..= p_high`, one coefficient per index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedPacket {
    pub window_low: u32,
    pub window_high: u32,
    pub coefficients: Vec<FieldElement>,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Packet {
    Info(InfoPacket),
    Coded(CodedPacket),
}

impl Packet {
    pub fn is_coded(&self) -> bool {
        matches!(self, Packet::Coded(_))
    }

    pub fn payload(&self) -> &[u8] {
        match self {
            Packet::Info(p) => &p.payload,
            Packet::Coded(c) => &c.payload,
        }
    }

    /// Wire form: the header layout of the concrete packet kind followed by the
    /// payload. The kind itself is not encoded.
    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            Packet::Info(p) => p.to_bytes(),
            Packet::Coded(c) => c.to_bytes(),
        }
    }
}

fn read_u32(bytes: &[u8], at: usize) -> Result<u32, CodecError> {
    let slice = bytes.get(at..at + 4).ok_or(CodecError::Truncated {
        need: at + 4,
        got: bytes.len(),
    })?;
    Ok(u32::from_le_bytes(slice.try_into().expect("4-byte slice")))
}

impl InfoPacket {
    pub const HEADER_LEN: usize = 4;

    /// `index` (u32 LE) then payload.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(Self::HEADER_LEN + self.payload.len());
        out.extend_from_slice(&self.index.to_le_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CodecError> {
        let index = read_u32(bytes, 0)?;
        if index == 0 {
            return Err(CodecError::ZeroIndex);
        }
        Ok(InfoPacket {
            index,
            payload: bytes[Self::HEADER_LEN..].to_vec(),
        })
    }
}

impl CodedPacket {
    pub fn window_len(&self) -> usize {
        (self.window_high - self.window_low) as usize + 1
    }

    /// `window_low` (u32 LE), `window_high` (u32 LE), one byte per
    /// coefficient, then payload.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(8 + self.coefficients.len() + self.payload.len());
        out.extend_from_slice(&self.window_low.to_le_bytes());
        out.extend_from_slice(&self.window_high.to_le_bytes());
        out.extend(self.coefficients.iter().map(|c| c.value()));
        out.extend_from_slice(&self.payload);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CodecError> {
        let window_low = read_u32(bytes, 0)?;
        let window_high = read_u32(bytes, 4)?;
        if window_low == 0 || window_high < window_low {
            return Err(CodecError::BadWindow {
                low: window_low,
                high: window_high,
            });
        }
        let n = (window_high - window_low) as usize + 1;
        let coeffs = bytes.get(8..8 + n).ok_or(CodecError::Truncated {
            need: 8 + n,
            got: bytes.len(),
        })?;
        Ok(CodedPacket {
            window_low,
            window_high,
            coefficients: coeffs.iter().map(|&b| FieldElement::from_raw(b)).collect(),
            payload: bytes[8 + n..].to_vec(),
        })
    }
}

/// Client report: every packet `1..=seen_index` is seen. `dof_deficit` counts
/// known-but-undelivered packets not yet matched by a matrix row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FeedbackMessage {
    pub seen_index: u32,
    pub dof_deficit: u32,
}

/// Server side of a session of `num_info` information packets.
#[derive(Debug, Clone)]
pub struct Encoder {
    field: Field,
    intervals: Vec<Interval>,
    counters: Vec<u32>,
    /// First index covered by the next coded packet.
    window_low: u32,
    /// Last information packet sent; the window is empty while below `window_low`.
    window_high: u32,
    next_index: u32,
    num_info: u32,
    /// Packets `window_low ..= window_high`, in order.
    buffer: VecDeque<InfoPacket>,
    payload_len: Option<usize>,
    adaptive: bool,
    pending_repairs: u32,
    last_seen: u32,
}

impl Encoder {
    pub fn new(field: Field, intervals: Vec<Interval>, num_info: u32) -> Self {
        let n = intervals.len();
        Encoder {
            field,
            intervals,
            counters: vec![1; n],
            window_low: 1,
            window_high: 0,
            next_index: 1,
            num_info,
            buffer: VecDeque::new(),
            payload_len: None,
            adaptive: false,
            pending_repairs: 0,
            last_seen: 0,
        }
    }

    /// When enabled, a positive deficit in the latest feedback makes the
    /// encoder send that many extra coded packets at the next opportunities,
    /// on whichever paths come up first.
    pub fn with_adaptive_redundancy(mut self, enabled: bool) -> Self {
        self.adaptive = enabled;
        self
    }

    /// `(low, high)` of the next coded packet; empty when `high < low`.
    pub fn window(&self) -> (u32, u32) {
        (self.window_low, self.window_high)
    }

    pub fn counters(&self) -> &[u32] {
        &self.counters
    }

    /// Index of the next information packet to send.
    pub fn next_index(&self) -> u32 {
        self.next_index
    }

    pub fn num_info(&self) -> u32 {
        self.num_info
    }

    pub fn buffered(&self) -> usize {
        self.buffer.len()
    }

    /// All information packets have been sent.
    pub fn stream_exhausted(&self) -> bool {
        self.next_index > self.num_info
    }

    /// The client has reported every packet seen; nothing is left to send.
    pub fn finished(&self) -> bool {
        self.last_seen >= self.num_info
    }

    /// Produces the packet for the next transmission opportunity on `path`.
    ///
    /// `source` supplies the payload of information packet `k` and is called
    /// only when one is sent. `Ok(None)` means the slot stays idle: a coded
    /// packet was due but the window is empty, or the session is finished.
    /// Once the stream is exhausted every path sends coded packets over the
    /// outstanding window until the client has seen everything.
    pub fn next_packet<R, F>(
        &mut self,
        path: usize,
        rng: &mut R,
        source: F,
    ) -> Result<Option<Packet>, CodecError>
    where
        R: Rng + ?Sized,
        F: FnOnce(u32) -> Vec<u8>,
    {
        let interval = *self.intervals.get(path).ok_or(CodecError::NoSuchPath {
            path,
            paths: self.intervals.len(),
        })?;
        if self.finished() {
            return Ok(None);
        }
        let forced = self.adaptive && self.pending_repairs > 0 && !self.window_is_empty();
        let info_turn = match interval {
            Interval::Every(l) => self.counters[path] < l,
            Interval::Never => true,
        };

        if !self.stream_exhausted() && info_turn && !forced {
            let index = self.next_index;
            let payload = source(index);
            self.field.check_symbols(&payload)?;
            match self.payload_len {
                Some(len) if len != payload.len() => {
                    return Err(CodecError::PayloadLength {
                        expected: len,
                        got: payload.len(),
                    })
                }
                _ => self.payload_len = Some(payload.len()),
            }
            if let Interval::Every(_) = interval {
                self.counters[path] += 1;
            }
            self.next_index += 1;
            let packet = InfoPacket { index, payload };
            self.on_info_sent(&packet);
            return Ok(Some(Packet::Info(packet)));
        }

        if forced {
            self.pending_repairs -= 1;
        } else if let Interval::Every(_) = interval {
            self.counters[path] = 1;
        }
        Ok(self.coded_packet(rng).map(Packet::Coded))
    }

    fn window_is_empty(&self) -> bool {
        self.window_high < self.window_low
    }

    fn on_info_sent(&mut self, packet: &InfoPacket) {
        if packet.index > self.window_high {
            self.window_high = packet.index;
        }
        if packet.index >= self.window_low {
            self.buffer.push_back(packet.clone());
        }
    }

    /// Random combination over the current window, or `None` if it is empty.
    /// All-zero coefficient vectors are redrawn.
    pub fn coded_packet<R: Rng + ?Sized>(&self, rng: &mut R) -> Option<CodedPacket> {
        if self.window_is_empty() {
            return None;
        }
        let n = (self.window_high - self.window_low) as usize + 1;
        debug_assert_eq!(self.buffer.len(), n);
        let coefficients = loop {
            let c: Vec<FieldElement> = (0..n).map(|_| self.field.random(rng)).collect();
            if c.iter().any(|x| !x.is_zero()) {
                break c;
            }
        };
        let mut payload = vec![0u8; self.payload_len.unwrap_or(0)];
        for (c, p) in coefficients.iter().zip(&self.buffer) {
            self.field
                .vec_axpy(&mut payload, &p.payload, *c)
                .expect("buffered payloads share the session length");
        }
        Some(CodedPacket {
            window_low: self.window_low,
            window_high: self.window_high,
            coefficients,
            payload,
        })
    }

    /// Moves the lower window edge past the reported seen index and releases
    /// buffered packets below it.
    pub fn on_feedback(&mut self, fb: FeedbackMessage) {
        if fb.seen_index > self.last_seen {
            self.last_seen = fb.seen_index;
        }
        let low = fb.seen_index.saturating_add(1).min(self.next_index);
        if low > self.window_low {
            while self.buffer.front().is_some_and(|p| p.index < low) {
                self.buffer.pop_front();
            }
            self.window_low = low;
        }
        if self.adaptive {
            self.pending_repairs = fb.dof_deficit;
        }
    }
}

/// One matrix row. `coeffs[0]` is 1 at the pivot; trailing zeros are trimmed.
#[derive(Debug, Clone)]
struct Row {
    coeffs: Vec<FieldElement>,
    payload: Vec<u8>,
}

/// Client side of a session.
#[derive(Debug, Clone)]
pub struct Decoder {
    field: Field,
    payload_len: Option<usize>,
    rows: BTreeMap<u32, Row>,
    delivered: u32,
    seen: u32,
    highest_heard: u32,
    /// Payloads of delivered packets `store_base ..= delivered`.
    store: VecDeque<Vec<u8>>,
    store_base: u32,
}

impl Decoder {
    pub fn new(field: Field) -> Self {
        Decoder {
            field,
            payload_len: None,
            rows: BTreeMap::new(),
            delivered: 0,
            seen: 0,
            highest_heard: 0,
            store: VecDeque::new(),
            store_base: 1,
        }
    }

    pub fn delivered(&self) -> u32 {
        self.delivered
    }

    pub fn seen_index(&self) -> u32 {
        self.seen
    }

    /// Rows held for undelivered packets.
    pub fn pending_rows(&self) -> usize {
        self.rows.len()
    }

    /// Dimension of the received span.
    pub fn rank(&self) -> u64 {
        self.delivered as u64 + self.rows.len() as u64
    }

    /// Pivot indices currently held, ascending.
    pub fn pivots(&self) -> impl Iterator<Item = u32> + '_ {
        self.rows.keys().copied()
    }

    pub fn feedback(&self) -> FeedbackMessage {
        let unknowns = self.highest_heard.saturating_sub(self.delivered);
        FeedbackMessage {
            seen_index: self.seen,
            dof_deficit: unknowns.saturating_sub(self.rows.len() as u32),
        }
    }

    /// Forgets delivered payloads below `index`. Later packets that still
    /// reference them are rejected with [`CodecError::Pruned`].
    pub fn prune_below(&mut self, index: u32) {
        let index = index.min(self.delivered + 1);
        while self.store_base < index {
            self.store.pop_front();
            self.store_base += 1;
        }
    }

    fn check_payload(&self, payload: &[u8]) -> Result<(), CodecError> {
        match self.payload_len {
            Some(len) if len != payload.len() => Err(CodecError::PayloadLength {
                expected: len,
                got: payload.len(),
            }),
            _ => Ok(self.field.check_symbols(payload)?),
        }
    }

    /// Absorbs a packet and returns every packet that became deliverable in
    /// order. Non-innovative packets leave the state untouched; malformed ones
    /// are rejected without changing it.
    pub fn receive(&mut self, packet: &Packet) -> Result<Vec<InfoPacket>, CodecError> {
        let (low, coeffs, payload): (u32, Vec<FieldElement>, &[u8]) = match packet {
            Packet::Info(p) => {
                if p.index == 0 {
                    return Err(CodecError::ZeroIndex);
                }
                (p.index, vec![FieldElement::ONE], &p.payload)
            }
            Packet::Coded(c) => {
                if c.window_low == 0 {
                    return Err(CodecError::ZeroIndex);
                }
                if c.window_high < c.window_low {
                    return Err(CodecError::BadWindow {
                        low: c.window_low,
                        high: c.window_high,
                    });
                }
                if c.coefficients.len() != c.window_len() {
                    return Err(CodecError::CoefficientCount {
                        low: c.window_low,
                        high: c.window_high,
                        got: c.coefficients.len(),
                    });
                }
                if let Some(bad) = c.coefficients.iter().find(|x| !self.field.contains(**x)) {
                    return Err(CodecError::NotInField(*bad));
                }
                if c.coefficients.iter().all(|x| x.is_zero()) {
                    return Err(CodecError::ZeroCoefficients);
                }
                (c.window_low, c.coefficients.clone(), &c.payload)
            }
        };
        self.check_payload(payload)?;
        let high = low + coeffs.len() as u32 - 1;

        let Some((pivot, row)) = self.reduce(low, coeffs, payload.to_vec())? else {
            // still learn the payload length and the extent of the stream
            self.payload_len.get_or_insert(payload.len());
            self.highest_heard = self.highest_heard.max(high);
            return Ok(Vec::new());
        };
        self.payload_len.get_or_insert(payload.len());
        self.highest_heard = self.highest_heard.max(high);
        self.insert(pivot, row);
        while self.seen < self.delivered || self.rows.contains_key(&(self.seen + 1)) {
            self.seen += 1;
        }
        Ok(self.drain_in_order())
    }

    /// Eliminates known columns from an incoming combination. Returns the new
    /// pivot and normalised row, or `None` if the packet is not innovative.
    fn reduce(
        &self,
        low: u32,
        mut work: Vec<FieldElement>,
        mut payload: Vec<u8>,
    ) -> Result<Option<(u32, Row)>, CodecError> {
        let f = &self.field;
        let mut pivot: Option<u32> = None;
        let mut offset = 0usize;
        while offset < work.len() {
            let col = low + offset as u32;
            let c = work[offset];
            if c.is_zero() {
                offset += 1;
                continue;
            }
            if col <= self.delivered {
                if col < self.store_base {
                    return Err(CodecError::Pruned(col));
                }
                let known = &self.store[(col - self.store_base) as usize];
                f.vec_axpy(&mut payload, known, c)?;
                work[offset] = FieldElement::ZERO;
            } else if let Some(row) = self.rows.get(&col) {
                let needed = offset + row.coeffs.len();
                if work.len() < needed {
                    work.resize(needed, FieldElement::ZERO);
                }
                for (j, rc) in row.coeffs.iter().enumerate() {
                    let w = &mut work[offset + j];
                    *w = f.sub(*w, f.mul(c, *rc));
                }
                f.vec_axpy(&mut payload, &row.payload, c)?;
            } else if pivot.is_none() {
                pivot = Some(col);
            }
            offset += 1;
        }
        let Some(pivot) = pivot else {
            return Ok(None);
        };
        let start = (pivot - low) as usize;
        let scale = f.inv(work[start])?;
        let mut coeffs: Vec<FieldElement> =
            work[start..].iter().map(|&w| f.mul(w, scale)).collect();
        trim_trailing_zeros(&mut coeffs);
        f.vec_scale(&mut payload, scale)?;
        Ok(Some((pivot, Row { coeffs, payload })))
    }

    /// Clears the new pivot column from existing rows, then stores the row.
    fn insert(&mut self, pivot: u32, new_row: Row) {
        let f = self.field.clone();
        for (&p, row) in self.rows.range_mut(..pivot) {
            let offset = (pivot - p) as usize;
            let Some(&c) = row.coeffs.get(offset) else {
                continue;
            };
            if c.is_zero() {
                continue;
            }
            let needed = offset + new_row.coeffs.len();
            if row.coeffs.len() < needed {
                row.coeffs.resize(needed, FieldElement::ZERO);
            }
            for (j, nc) in new_row.coeffs.iter().enumerate() {
                let w = &mut row.coeffs[offset + j];
                *w = f.sub(*w, f.mul(c, *nc));
            }
            trim_trailing_zeros(&mut row.coeffs);
            f.vec_axpy(&mut row.payload, &new_row.payload, c)
                .expect("rows share the session payload length");
        }
        self.rows.insert(pivot, new_row);
    }

    fn drain_in_order(&mut self) -> Vec<InfoPacket> {
        let mut out = Vec::new();
        loop {
            let next = self.delivered + 1;
            match self.rows.get(&next) {
                Some(row) if row.coeffs.len() == 1 => {}
                _ => break,
            }
            let row = self.rows.remove(&next).expect("checked above");
            self.store.push_back(row.payload.clone());
            self.delivered = next;
            out.push(InfoPacket {
                index: next,
                payload: row.payload,
            });
        }
        out
    }
}

fn trim_trailing_zeros(v: &mut Vec<FieldElement>) {
    while v.len() > 1 && v.last().is_some_and(|x| x.is_zero()) {
        v.pop();
    }
}
