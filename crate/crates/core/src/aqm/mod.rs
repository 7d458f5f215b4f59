//! Router egress queue disciplines: tail-drop, CoDel and FQ-CoDel.
//!
//! All three enforce a hard packet limit where overflow always drops. The two
//! AQMs run the CoDel control law on packet sojourn time and, with ECN
//! enabled, CE-mark ECT packets instead of dropping them.

mod codel;
mod fq_codel;
mod params;
mod taildrop;

pub use codel::{control_law, Codel, CodelState};
pub use fq_codel::{FqCodel, FQ_QUANTUM_BYTES, FQ_SUBQUEUES};
pub use params::{AqmError, AqmParams, DEFAULT_HARD_LIMIT};
pub use taildrop::TailDrop;

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use crate::simnet::{Packet, SimTime};

/// Outcome of offering a packet to a discipline.
#[derive(Debug, PartialEq)]
pub enum Enqueued {
    Queued,
    /// Hard-limit overflow. Never a CE mark.
    Dropped(Packet),
}

/// Verdict attached to a dequeued packet. Control-law drops are reported
/// separately through the `dropped` sink of [`QueueDiscipline::dequeue`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Forward,
    MarkedCe,
}

/// Packet accounting. `arrivals = forwarded + marked + dropped_overflow +
/// dropped_aqm + queued` holds at every instant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct QueueStats {
    pub arrivals: u64,
    pub forwarded: u64,
    pub marked: u64,
    pub dropped_overflow: u64,
    pub dropped_aqm: u64,
}

impl QueueStats {
    pub fn dropped(&self) -> u64 {
        self.dropped_overflow + self.dropped_aqm
    }

    pub fn balances(&self, queued: usize) -> bool {
        self.arrivals
            == self.forwarded + self.marked + self.dropped_overflow + self.dropped_aqm + queued as u64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum DisciplineKind {
    TailDrop,
    Codel,
    FqCodel,
}

impl DisciplineKind {
    pub fn name(self) -> &'static str {
        match self {
            DisciplineKind::TailDrop => "taildrop",
            DisciplineKind::Codel => "codel",
            DisciplineKind::FqCodel => "fq_codel",
        }
    }

    pub fn is_aqm(self) -> bool {
        !matches!(self, DisciplineKind::TailDrop)
    }
}

impl fmt::Display for DisciplineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DisciplineKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "taildrop" | "tail_drop" | "pfifo" => Ok(DisciplineKind::TailDrop),
            "codel" => Ok(DisciplineKind::Codel),
            "fq_codel" | "fqcodel" | "fq-codel" => Ok(DisciplineKind::FqCodel),
            other => Err(format!("unknown discipline '{other}'")),
        }
    }
}

pub trait QueueDiscipline: Send {
    fn kind(&self) -> DisciplineKind;

    /// Timestamps and queues `pkt`, or drops it when the hard limit is reached.
    fn enqueue(&mut self, pkt: Packet, now: SimTime) -> Enqueued;

    /// Next packet to transmit. Packets discarded by the control law on the
    /// way are pushed onto `dropped`.
    fn dequeue(&mut self, now: SimTime, dropped: &mut Vec<Packet>) -> Option<(Packet, Verdict)>;

    /// Retunes target/interval without flushing the queue or resetting the
    /// control-law state.
    fn set_params(&mut self, target: SimTime, interval: SimTime) -> Result<(), AqmError>;

    fn params(&self) -> AqmParams;

    fn len(&self) -> usize;

    fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn stats(&self) -> &QueueStats;

    /// Instantaneous occupancy in percent of the hard limit.
    fn occupancy(&self) -> f64 {
        occupancy_pct(self.len(), self.params().hard_limit)
    }
}

pub fn occupancy_pct(queued: usize, hard_limit: usize) -> f64 {
    100.0 * queued as f64 / hard_limit as f64
}

pub fn build(kind: DisciplineKind, params: AqmParams, hash_seed: u64) -> Box<dyn QueueDiscipline> {
    match kind {
        DisciplineKind::TailDrop => Box::new(TailDrop::new(params.hard_limit)),
        DisciplineKind::Codel => Box::new(Codel::new(params)),
        DisciplineKind::FqCodel => Box::new(FqCodel::new(params, hash_seed)),
    }
}

/// FIFO of packets with a byte counter.
#[derive(Debug, Default)]
pub(crate) struct Fifo {
    packets: VecDeque<Packet>,
    bytes: u64,
}

impl Fifo {
    pub(crate) fn push(&mut self, pkt: Packet) {
        self.bytes += pkt.size_bytes as u64;
        self.packets.push_back(pkt);
    }

    pub(crate) fn pop(&mut self) -> Option<Packet> {
        let p = self.packets.pop_front()?;
        self.bytes -= p.size_bytes as u64;
        Some(p)
    }

    pub(crate) fn len(&self) -> usize {
        self.packets.len()
    }
}

/// Time-weighted queue length tracker for per-epoch occupancy statistics.
#[derive(Clone, Debug)]
pub struct OccupancyMeter {
    hard_limit: usize,
    since: SimTime,
    last_change: SimTime,
    current: usize,
    area: u128,
    max: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct OccupancySummary {
    pub mean_pct: f64,
    pub max_pct: f64,
}

impl OccupancyMeter {
    pub fn new(hard_limit: usize, now: SimTime) -> Self {
        OccupancyMeter {
            hard_limit,
            since: now,
            last_change: now,
            current: 0,
            area: 0,
            max: 0,
        }
    }

    pub fn observe(&mut self, now: SimTime, queued: usize) {
        self.area += self.current as u128 * (now - self.last_change).as_nanos() as u128;
        self.last_change = now;
        self.current = queued;
        self.max = self.max.max(queued);
    }

    /// Summarizes `[since, now)` and restarts the window at `now`.
    pub fn take(&mut self, now: SimTime) -> OccupancySummary {
        let current = self.current;
        self.observe(now, current);
        let span = (now - self.since).as_nanos();
        let mean_len = if span == 0 {
            current as f64
        } else {
            self.area as f64 / span as f64
        };
        let out = OccupancySummary {
            mean_pct: 100.0 * mean_len / self.hard_limit as f64,
            max_pct: occupancy_pct(self.max, self.hard_limit),
        };
        self.since = now;
        self.area = 0;
        self.max = current;
        out
    }
}
