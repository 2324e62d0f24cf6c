//! Closed-form overlap laws.
//!
//! * [`overlap_time`]: steady-state tail of the overlap time between
//!   customers `k` apart (M/M/∞ and GI/D/∞), and the mean queue length.
//! * [`counts`]: how many customers an arrival overlaps with, split into
//!   those present on arrival and those arriving during service.
//! * [`residual`]: the same counts restricted to overlaps lasting at least
//!   `δ`.

pub mod counts;
pub mod overlap_time;
pub mod residual;

pub use counts::*;
pub use overlap_time::*;
pub use residual::*;

use crate::dists::DistSpec;
use crate::error::{config, domain, Result};
use serde::{Deserialize, Serialize};

/// Tail mass below which a [`Pmf`] is truncated.
pub const TAIL_CUTOFF: f64 = 1e-12;
const MAX_SUPPORT: u64 = 2_000_000;

/// Arrival rate `λ` and exponential service rate `μ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MMParams {
    pub lambda: f64,
    pub mu: f64,
}

impl MMParams {
    pub fn new(lambda: f64, mu: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite() && mu > 0.0 && mu.is_finite()) {
            return Err(domain(format!("rates must be positive, got lambda={lambda}, mu={mu}")));
        }
        Ok(Self { lambda, mu })
    }

    /// `ρ = λ/(λ+μ)`: the chance an arrival beats an exponential service.
    pub fn rho(&self) -> f64 {
        self.lambda / (self.lambda + self.mu)
    }
}

/// Piecewise-constant arrival rate on `[0, horizon]`.
///
/// Piece `i` covers `[breakpoints[i], breakpoints[i+1])`; the last piece
/// runs to the horizon and its rate is held beyond it when integrating
/// forward over a service window. The rate is zero before time 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateProfile {
    pub breakpoints: Vec<f64>,
    pub rates: Vec<f64>,
    #[serde(default)]
    pub horizon: Option<f64>,
}

impl RateProfile {
    pub fn constant(rate: f64) -> Self {
        Self { breakpoints: vec![0.0], rates: vec![rate], horizon: None }
    }

    pub fn piecewise(breakpoints: Vec<f64>, rates: Vec<f64>, horizon: Option<f64>) -> Result<Self> {
        let p = Self { breakpoints, rates, horizon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.breakpoints.is_empty() || self.breakpoints.len() != self.rates.len() {
            return Err(config("rate profile needs one rate per breakpoint"));
        }
        if self.breakpoints[0] != 0.0 {
            return Err(config("rate profile must start at time 0"));
        }
        if self.breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(config("rate profile breakpoints must be strictly increasing"));
        }
        if self.rates.iter().any(|&r| !(r >= 0.0) || !r.is_finite()) {
            return Err(config("rate profile rates must be nonnegative and finite"));
        }
        if let Some(h) = self.horizon {
            if !(h > *self.breakpoints.last().unwrap()) {
                return Err(config("rate profile horizon must lie after the last breakpoint"));
            }
        }
        Ok(())
    }

    pub fn horizon(&self) -> f64 {
        self.horizon.unwrap_or(f64::INFINITY)
    }

    pub fn max_rate(&self) -> f64 {
        self.rates.iter().copied().fold(0.0, f64::max)
    }

    pub fn is_constant(&self) -> bool {
        self.rates.windows(2).all(|w| w[0] == w[1])
    }

    pub fn rate_at(&self, t: f64) -> f64 {
        if t < 0.0 {
            return 0.0;
        }
        let i = self.breakpoints.partition_point(|&b| b <= t);
        self.rates[i.saturating_sub(1)]
    }

    /// `∫_a^b λ(u) du`, exact.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        if !(a < b) {
            return 0.0;
        }
        let mut total = 0.0;
        for (i, &start) in self.breakpoints.iter().enumerate() {
            let end = self.breakpoints.get(i + 1).copied().unwrap_or(f64::INFINITY);
            let lo = a.max(start);
            let hi = b.min(end);
            if lo < hi && self.rates[i] > 0.0 {
                total += self.rates[i] * (hi - lo);
            }
        }
        total
    }

    pub(crate) fn check_time(&self, t: f64) -> Result<()> {
        if !(t >= 0.0) {
            return Err(domain(format!("time must be nonnegative, got {t}")));
        }
        if t > self.horizon() {
            return Err(domain(format!("t = {t} lies beyond the profile horizon {}", self.horizon())));
        }
        Ok(())
    }
}

/// A law on `{0, 1, 2, ...}` truncated where the remaining mass is
/// negligible.
///
/// `tail` is an upper bound on the mass beyond the last listed `k`, taken
/// from an analytic tail bound rather than from `1 - Σ probs`; summing the
/// listed probabilities and the tail is therefore a genuine check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pmf {
    pub probs: Vec<f64>,
    pub tail: f64,
}

impl Pmf {
    /// Evaluates `f(0..=K)` for the smallest `K >= min_k` with
    /// `tail_bound(K) < TAIL_CUTOFF`, where `tail_bound(K)` bounds `P(X > K)`.
    pub fn build<F, B>(f: F, tail_bound: B, min_k: u64) -> Result<Self>
    where
        F: Fn(u64) -> Result<f64>,
        B: Fn(u64) -> f64,
    {
        let mut k_max = min_k;
        loop {
            let bound = tail_bound(k_max);
            if bound < TAIL_CUTOFF {
                let probs = (0..=k_max).map(&f).collect::<Result<Vec<_>>>()?;
                return Ok(Self { probs, tail: bound.max(0.0) });
            }
            if k_max >= MAX_SUPPORT {
                return Err(domain("pmf support too large to truncate"));
            }
            // Grow geometrically once past the bulk.
            k_max = if k_max < 64 { k_max + 1 } else { k_max + k_max / 16 };
        }
    }

    /// Point mass.
    pub fn point(k: usize) -> Self {
        let mut probs = vec![0.0; k + 1];
        probs[k] = 1.0;
        Self { probs, tail: 0.0 }
    }

    pub fn from_probs(probs: Vec<f64>) -> Self {
        Self { probs, tail: 0.0 }
    }

    pub fn get(&self, k: usize) -> f64 {
        self.probs.get(k).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    /// `Σ p_k + tail`; 1 for a correctly normalized law.
    pub fn total(&self) -> f64 {
        self.probs.iter().sum::<f64>() + self.tail
    }

    pub fn mean(&self) -> f64 {
        self.probs.iter().enumerate().map(|(k, p)| k as f64 * p).sum()
    }

    pub fn variance(&self) -> f64 {
        let m = self.mean();
        self.probs.iter().enumerate().map(|(k, p)| (k as f64 - m).powi(2) * p).sum()
    }
}

/// `P(O > t)` on a grid, plus the atom `P(O = 0)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailCurve {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub atom: f64,
}

impl TailCurve {
    pub fn tabulate<F: Fn(f64) -> Result<f64>>(grid: &[f64], atom: f64, tail: F) -> Result<Self> {
        if grid.iter().any(|&t| !(t >= 0.0)) {
            return Err(domain("tail curve grid must be nonnegative"));
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(domain("tail curve grid must be strictly increasing"));
        }
        let values = grid.iter().map(|&t| tail(t)).collect::<Result<Vec<_>>>()?;
        Ok(Self { grid: grid.to_vec(), values, atom })
    }

    /// `m + 1` evenly spaced points on `[0, t_max]`.
    pub fn uniform_grid(t_max: f64, m: usize) -> Vec<f64> {
        let m = m.max(1);
        (0..=m).map(|i| t_max * i as f64 / m as f64).collect()
    }
}

/// Bound on `P(N > K)` for a mixed Poisson count `N` with random mean `M`,
/// from factorial moments: `P(N >= K+1) <= E[Mʳ] / (K+1)(K)...(K+2-r)`.
/// `log_moment(r)` must return `ln E[Mʳ]` (or +inf when unavailable).
pub(crate) fn mixed_poisson_tail_bound<L: Fn(u32) -> f64>(k_max: u64, log_moment: L) -> f64 {
    let n = k_max + 1;
    let mut best = f64::INFINITY;
    let mut log_falling = 0.0;
    for r in 1..=150u32 {
        if r as u64 > n {
            break;
        }
        log_falling += ((n - (r as u64 - 1)) as f64).ln();
        let lm = log_moment(r);
        if lm.is_finite() {
            best = best.min(lm - log_falling);
        }
    }
    best.exp().min(1.0)
}

/// `ln E[Sʳ]`, using the support bound for truncated normals so the bound
/// stays cheap.
pub(crate) fn log_service_moment(service: &DistSpec, r: u32) -> f64 {
    match service {
        DistSpec::TruncatedNormal { high, .. } => r as f64 * high.ln(),
        DistSpec::Uniform { high, .. } => r as f64 * high.ln(),
        _ => service.raw_moment(r).ln(),
    }
}
