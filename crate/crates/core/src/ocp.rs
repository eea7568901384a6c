//! Event-driven simulation of one coalescence epoch, run to absorption.
//!
//! Every domain active at time zero gets one exponential clock with rate `λ(d)`
//! and one uniform that later picks the merge type. Under (A2) a merged domain is
//! never active, so no clock is ever rescheduled: the epoch is the ordered race of
//! the initial clocks, with clocks of absorbed domains discarded lazily through
//! per-domain generation counters.
//!
//! On a half-line the simulated configuration is a right truncation. The engine
//! tracks a frontier position `c` such that points left of `c` coincide with
//! those of the untruncated process: any event at a domain whose right end is at
//! or beyond `c` moves `c` to the left end of the merged domain. A domain that
//! straddles `c` in the untruncated process but not in the simulation is always a
//! merged, hence inactive, domain, so this rule loses nothing.

use crate::error::{Error, Result};
use crate::model::{Configuration, RateSpec, Topology};
use crate::rng::StreamRng;
use serde::{Deserialize, Serialize};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

const NONE: u32 = u32::MAX;

/// Which endpoints of the firing domain are erased.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum MergeKind {
    /// Left endpoint: the domain absorbs its left neighbor.
    Left,
    /// Right endpoint.
    Right,
    /// Both endpoints: triple merge.
    Both,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergeCounts {
    pub left: u64,
    pub right: u64,
    pub both: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub seq: u64,
    pub time: f64,
    /// Left endpoint position of the firing domain.
    pub position: f64,
    pub length: f64,
    pub kind: MergeKind,
}

/// Bookkeeping for one epoch.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct EpochTrace {
    pub events: u64,
    /// Time of the last event; zero if nothing fired.
    pub time: f64,
    pub merges: MergeCounts,
    pub initial_active: usize,
    /// Every `k`-th event when logging is enabled.
    pub log: Vec<EventRecord>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    /// Keep one event in `k` in [`EpochTrace::log`].
    pub log_every: Option<u64>,
}

#[derive(Clone, Copy, Debug)]
struct Entry {
    time: f64,
    domain: u32,
    generation: u32,
    u: f64,
}

impl PartialEq for Entry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    // reversed: BinaryHeap is a max-heap; ties broken by domain creation index
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then_with(|| other.domain.cmp(&self.domain))
    }
}

/// Min-queue of domain clocks with lazy deletion.
#[derive(Clone, Debug, Default)]
pub struct EventQueue {
    heap: BinaryHeap<Entry>,
    generation: Vec<u32>,
}

/// A live clock popped from the queue.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Clock {
    pub time: f64,
    pub domain: usize,
    /// Uniform on `[0, 1)` used for the merge-type split.
    pub u: f64,
}

impl EventQueue {
    pub fn with_domains(n: usize) -> Self {
        Self { heap: BinaryHeap::new(), generation: vec![0; n] }
    }

    pub fn push(&mut self, domain: usize, time: f64, u: f64) {
        let generation = self.generation[domain];
        self.heap.push(Entry { time, domain: domain as u32, generation, u });
    }

    /// Discards every pending clock of `domain`.
    pub fn invalidate(&mut self, domain: usize) {
        self.generation[domain] = self.generation[domain].wrapping_add(1);
    }

    /// Earliest clock whose generation is current.
    pub fn pop_live(&mut self) -> Option<Clock> {
        while let Some(e) = self.heap.pop() {
            if self.generation[e.domain as usize] == e.generation {
                return Some(Clock { time: e.time, domain: e.domain as usize, u: e.u });
            }
        }
        None
    }

    /// Entries still stored, live or stale.
    pub fn stored(&self) -> usize {
        self.heap.len()
    }
}

/// Points in a doubly linked list, cyclic on a torus.
struct Chain {
    pos: Vec<f64>,
    prev: Vec<u32>,
    next: Vec<u32>,
    alive: Vec<bool>,
    count: usize,
    torus: Option<f64>,
}

impl Chain {
    fn new(points: &[f64], topology: Topology) -> Self {
        let n = points.len();
        let torus = match topology {
            Topology::Torus { length } => Some(length),
            _ => None,
        };
        let mut prev: Vec<u32> = (0..n as u32).map(|i| i.wrapping_sub(1)).collect();
        let mut next: Vec<u32> = (1..=n as u32).collect();
        if n > 0 {
            if torus.is_some() {
                prev[0] = n as u32 - 1;
                next[n - 1] = 0;
            } else {
                prev[0] = NONE;
                next[n - 1] = NONE;
            }
        }
        Self { pos: points.to_vec(), prev, next, alive: vec![true; n], count: n, torus }
    }

    /// Length of the domain whose left endpoint is `i`; infinite for a boundary domain.
    fn length(&self, i: usize) -> f64 {
        let j = self.next[i];
        if j == NONE {
            return f64::INFINITY;
        }
        let j = j as usize;
        let d = self.pos[j] - self.pos[i];
        match self.torus {
            Some(l) if j <= i => d + l,
            _ => d,
        }
    }

    fn unlink(&mut self, k: usize) {
        let (p, q) = (self.prev[k], self.next[k]);
        if p != NONE {
            self.next[p as usize] = q;
        }
        if q != NONE {
            self.prev[q as usize] = p;
        }
        self.alive[k] = false;
        self.count -= 1;
    }

    fn collect(&self) -> Vec<f64> {
        self.pos.iter().zip(&self.alive).filter(|(_, a)| **a).map(|(x, _)| *x).collect()
    }
}

/// Indices of the active domains: gap `i` of [`Configuration::gaps`] with length in
/// `[d_min, d_max)`. A torus with a single point has no active domain.
pub fn active_domains(config: &Configuration, spec: &RateSpec) -> Vec<usize> {
    if matches!(config.topology(), Topology::Torus { .. }) && config.len() < 2 {
        return Vec::new();
    }
    config.gaps().into_iter().enumerate().filter(|(_, d)| spec.in_range(*d)).map(|(i, _)| i).collect()
}

/// Runs one epoch from `config` until no active domain remains.
///
/// With identically zero rates the epoch is the identity and any configuration
/// is accepted; otherwise `config` must lie in `𝒩(d_min)`.
pub fn run_epoch(config: &Configuration, spec: &RateSpec, rng: &mut StreamRng, opts: &RunOptions) -> Result<(Configuration, EpochTrace)> {
    if !spec.satisfies_a2() {
        return Err(Error::Rates(format!(
            "assumption (A2) violated: 2*d_min = {} < d_max = {}",
            2.0 * spec.d_min(),
            spec.d_max()
        )));
    }
    if spec.bound() == 0.0 {
        return Ok((config.clone(), EpochTrace::default()));
    }
    config.validate(spec.d_min())?;
    if config.len() > NONE as usize - 1 {
        return Err(Error::Configuration("too many points for one epoch".into()));
    }
    let topology = config.topology();
    let mut chain = Chain::new(config.points(), topology);
    let n = chain.pos.len();
    let mut queue = EventQueue::with_domains(n);
    let mut trace = EpochTrace::default();
    let mut frontier = config.frontier();

    let can_fire = !(chain.torus.is_some() && n < 2);
    if can_fire {
        for i in 0..n {
            let d = chain.length(i);
            let rate = spec.total(d);
            if rate > 0.0 {
                let t = rng.exponential(rate);
                let u = rng.uniform();
                queue.push(i, t, u);
                trace.initial_active += 1;
            }
        }
    }

    while let Some(clock) = queue.pop_live() {
        let i = clock.domain;
        let j = chain.next[i] as usize;
        let d = chain.length(i);
        let (l, r, a) = spec.rates(d);
        let x = clock.u * (l + r + a);
        let kind = if x < l {
            MergeKind::Left
        } else if x < l + r {
            MergeKind::Right
        } else {
            MergeKind::Both
        };
        let right_end = chain.pos[j];
        let p = chain.prev[i];
        queue.invalidate(i);
        match kind {
            MergeKind::Left => {
                chain.unlink(i);
                trace.merges.left += 1;
            }
            MergeKind::Right => {
                queue.invalidate(j);
                chain.unlink(j);
                trace.merges.right += 1;
            }
            MergeKind::Both => {
                queue.invalidate(j);
                chain.unlink(i);
                chain.unlink(j);
                trace.merges.both += 1;
            }
        }
        // the domain ending at the erased left endpoint has a new right end
        if kind != MergeKind::Right && p != NONE && chain.alive[p as usize] {
            queue.invalidate(p as usize);
        }
        if let Some(c) = frontier {
            if right_end >= c {
                let left_end = match kind {
                    MergeKind::Right => chain.pos[i],
                    _ if p != NONE && chain.alive[p as usize] => chain.pos[p as usize],
                    _ => f64::NEG_INFINITY,
                };
                frontier = Some(c.min(left_end));
            }
        }
        trace.events += 1;
        trace.time = clock.time;
        if let Some(k) = opts.log_every {
            if k > 0 && (trace.events - 1) % k == 0 {
                trace.log.push(EventRecord { seq: trace.events - 1, time: clock.time, position: chain.pos[i], length: d, kind });
            }
        }
        if chain.count == 0 {
            break;
        }
    }
    debug_assert!(trace.events as usize <= trace.initial_active);
    Ok((Configuration::from_parts(chain.collect(), topology, frontier), trace))
}
