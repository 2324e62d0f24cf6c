//! Empirical overlap quantities from customer records.
//!
//! All functions take records in arrival order, as produced by
//! [`super::run`].

use super::{ArrivalSpec, CustomerRecord, Customers, Warmup};
use crate::dists::DistSpec;
use crate::error::{domain, Result};
use crate::rng::{Purpose, Stream};
use serde::Serialize;
use std::cmp::Reverse;
use std::collections::BinaryHeap;

/// `O_{n,n+k}` for one pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OverlapSample {
    pub n: u64,
    pub k: u32,
    pub value: f64,
}

/// `((S_n - (A_{n+k} - A_n))⁺ ∧ S_{n+k})`, written as `(D_n - A_{n+k})⁺ ∧ S_{n+k}`.
pub fn overlap_value(first: &CustomerRecord, later: &CustomerRecord) -> f64 {
    (first.departure - later.arrival).max(0.0).min(later.service)
}

/// Every pair `(n, n+k)` with both customers present in `records`.
pub fn overlap_pairs(records: &[CustomerRecord], k: u32) -> Vec<OverlapSample> {
    strided_overlap_pairs(records, k, 0, 1)
}

/// Pairs starting at position `skip`, every `stride` customers. With
/// `stride > k` no customer or inter-arrival gap is shared between pairs, so
/// the samples are independent in a renewal-arrival run.
pub fn strided_overlap_pairs(records: &[CustomerRecord], k: u32, skip: usize, stride: usize) -> Vec<OverlapSample> {
    let k_us = k as usize;
    if k == 0 || records.len() <= k_us {
        return Vec::new();
    }
    (skip..records.len() - k_us)
        .step_by(stride.max(1))
        .map(|i| OverlapSample { n: records[i].index, k, value: overlap_value(&records[i], &records[i + k_us]) })
        .collect()
}

/// Which customers may serve as tags.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TagWindow {
    pub warmup: Warmup,
    /// Arrivals are complete up to this time.
    pub observed_until: f64,
    /// Tags must arrive at least this long before `observed_until`.
    pub guard: f64,
    /// Only customers whose index is a multiple of this are tagged.
    pub every: u64,
}

impl TagWindow {
    pub fn everything() -> Self {
        Self { warmup: Warmup::default(), observed_until: f64::INFINITY, guard: 0.0, every: 1 }
    }

    /// Past warmup, early enough, and with the whole service observed
    /// (otherwise the during-service count would be censored).
    pub fn admits(&self, r: &CustomerRecord) -> bool {
        let warmed = match self.warmup {
            Warmup::Time(w) => r.arrival >= w,
            Warmup::Customers(c) => r.index > c,
        };
        warmed
            && r.index % self.every.max(1) == 0
            && r.arrival <= self.observed_until - self.guard
            && r.departure <= self.observed_until
    }
}

/// Overlap counts for one tagged customer (or a virtual tag at `time`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct CountSample {
    pub index: Option<u64>,
    #[serde(skip)]
    pub time: OrderedTime,
    pub upon: u64,
    pub during: u64,
    pub total: u64,
}

/// Tag time, wrapped so [`CountSample`] can derive `Eq`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OrderedTime(u64);

impl OrderedTime {
    pub fn new(t: f64) -> Self {
        Self(t.to_bits())
    }

    pub fn get(self) -> f64 {
        f64::from_bits(self.0)
    }
}

impl CountSample {
    pub fn time(&self) -> f64 {
        self.time.get()
    }
}

/// Departures of customers that arrived strictly before the current tag,
/// swept forward in time.
struct Present<'a> {
    records: &'a [CustomerRecord],
    pushed: usize,
    departures: BinaryHeap<Reverse<OrderedF64>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrderedF64(f64);
impl Eq for OrderedF64 {}
impl PartialOrd for OrderedF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OrderedF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl<'a> Present<'a> {
    fn new(records: &'a [CustomerRecord]) -> Self {
        Self { records, pushed: 0, departures: BinaryHeap::new() }
    }

    /// Number of `j` with `A_j < t` and `D_j > t` and `D_j >= t + δ`.
    /// Calls must come with nondecreasing `t`.
    fn count(&mut self, t: f64, delta: f64) -> u64 {
        while self.pushed < self.records.len() && self.records[self.pushed].arrival < t {
            self.departures.push(Reverse(OrderedF64(self.records[self.pushed].departure)));
            self.pushed += 1;
        }
        while let Some(Reverse(OrderedF64(d))) = self.departures.peek() {
            if *d <= t || *d < t + delta {
                self.departures.pop();
            } else {
                break;
            }
        }
        self.departures.len() as u64
    }
}

/// Number of arrivals in `(lo, hi]`.
fn arrivals_in(records: &[CustomerRecord], lo: f64, hi: f64) -> u64 {
    if !(hi > lo) {
        return 0;
    }
    let a = records.partition_point(|r| r.arrival <= lo);
    let b = records.partition_point(|r| r.arrival <= hi);
    (b - a) as u64
}

/// `T_k` for every admitted tagged customer: `upon` counts `j` with
/// `A_j < A_k < D_j`, `during` counts arrivals in `(A_k, A_k + S_k]`.
pub fn count_overlaps(records: &[CustomerRecord], window: &TagWindow) -> Vec<CountSample> {
    let mut present = Present::new(records);
    let mut out = Vec::new();
    for r in records {
        if !window.admits(r) {
            continue;
        }
        let upon = present.count(r.arrival, 0.0);
        let during = arrivals_in(records, r.arrival, r.departure);
        out.push(CountSample {
            index: Some(r.index),
            time: OrderedTime::new(r.arrival),
            upon,
            during,
            total: upon + during,
        });
    }
    out
}

/// `O(t, δ)` for one tagged customer, with its parts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ResidualSample {
    pub index: u64,
    /// `Σ_j 1{(A_j + S_j - t)⁺ >= δ} · 1{S >= δ}` over customers present.
    pub upon: u64,
    /// `Z(t, δ)`: arrivals in `(t, t + (S-δ)⁺]` with `S_j >= δ`.
    pub during: u64,
    pub total: u64,
    /// `N((S-δ)⁺)`: all arrivals in `(t, t + (S-δ)⁺]`.
    pub window: u64,
}

/// Residual overlap counts for every admitted tagged customer. Customers
/// present on arrival count only while they are actually in the system
/// (`D_j > t`), so `δ = 0` reproduces [`count_overlaps`].
pub fn count_residual_overlaps(records: &[CustomerRecord], delta: f64, window: &TagWindow) -> Result<Vec<ResidualSample>> {
    if !(delta >= 0.0) {
        return Err(domain(format!("δ must be nonnegative, got {delta}")));
    }
    let mut present = Present::new(records);
    let mut out = Vec::new();
    for r in records {
        if !window.admits(r) {
            continue;
        }
        let queue = present.count(r.arrival, delta);
        let long_enough = r.service >= delta;
        let upon = if long_enough { queue } else { 0 };
        let end = r.arrival + (r.service - delta).max(0.0);
        let (during, in_window) = if end > r.arrival {
            let a = records.partition_point(|c| c.arrival <= r.arrival);
            let b = records.partition_point(|c| c.arrival <= end);
            let kept = records[a..b].iter().filter(|c| c.service >= delta).count() as u64;
            (kept, (b - a) as u64)
        } else {
            (0, 0)
        };
        out.push(ResidualSample { index: r.index, upon, during, total: upon + during, window: in_window });
    }
    Ok(out)
}

/// Counts seen by virtual tagged arrivals at fixed epochs, each with an
/// independent service drawn from `service`. Arrivals are generated as far
/// as the latest tag needs, so nothing is censored.
pub fn virtual_tags(
    arrival: &ArrivalSpec,
    service: &DistSpec,
    seed: u64,
    replication: u64,
    epochs: &[f64],
) -> Result<Vec<CountSample>> {
    if epochs.iter().any(|&t| !(t >= 0.0 && t.is_finite())) {
        return Err(domain("tag epochs must be nonnegative and finite"));
    }
    let mut tag_stream = Stream::new(seed, replication, Purpose::Tags);
    let tags: Vec<(f64, f64)> = epochs.iter().map(|&t| (t, t + service.sample(&mut tag_stream))).collect();
    let until = tags.iter().map(|t| t.1).fold(0.0, f64::max);
    let mut upon = vec![0u64; tags.len()];
    let mut during = vec![0u64; tags.len()];
    for c in Customers::new(arrival, service, seed, replication)? {
        if c.arrival > until {
            break;
        }
        for (i, &(t, end)) in tags.iter().enumerate() {
            if c.arrival < t && c.departure > t {
                upon[i] += 1;
            } else if c.arrival > t && c.arrival <= end {
                during[i] += 1;
            }
        }
    }
    Ok(tags
        .iter()
        .enumerate()
        .map(|(i, &(t, _))| CountSample {
            index: None,
            time: OrderedTime::new(t),
            upon: upon[i],
            during: during[i],
            total: upon[i] + during[i],
        })
        .collect())
}

/// Right-continuous step path of `Q∞(t) = Σ 1{A_j <= t < D_j}`; `values[i]`
/// holds on `[times[i], times[i+1])`, and the path is 0 before `times[0]`.
#[derive(Debug, Clone, PartialEq)]
pub struct QueuePath {
    pub times: Vec<f64>,
    pub values: Vec<u64>,
}

pub fn queue_length_path(records: &[CustomerRecord]) -> QueuePath {
    let mut events: Vec<(f64, i64)> = Vec::with_capacity(2 * records.len());
    for r in records {
        events.push((r.arrival, 1));
        events.push((r.departure, -1));
    }
    events.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut times = Vec::new();
    let mut values = Vec::new();
    let mut level: i64 = 0;
    let mut i = 0;
    while i < events.len() {
        let t = events[i].0;
        while i < events.len() && events[i].0 == t {
            level += events[i].1;
            i += 1;
        }
        let v = level as u64;
        if values.last() != Some(&v) {
            times.push(t);
            values.push(v);
        }
    }
    QueuePath { times, values }
}

impl QueuePath {
    pub fn value_at(&self, t: f64) -> u64 {
        let i = self.times.partition_point(|&s| s <= t);
        if i == 0 {
            0
        } else {
            self.values[i - 1]
        }
    }

    /// `(1/(b-a)) ∫_a^b Q(t) dt`.
    pub fn time_average(&self, a: f64, b: f64) -> Result<f64> {
        if !(b > a) {
            return Err(domain(format!("time average needs a < b, got [{a}, {b}]")));
        }
        let mut area = 0.0;
        let mut level = self.value_at(a) as f64;
        let mut at = a;
        let start = self.times.partition_point(|&s| s <= a);
        for (i, &s) in self.times.iter().enumerate().skip(start) {
            if s >= b {
                break;
            }
            area += level * (s - at);
            at = s;
            level = self.values[i] as f64;
        }
        area += level * (b - at);
        Ok(area / (b - a))
    }
}
