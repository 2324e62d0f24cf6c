//! GI/G/∞ simulation.
//!
//! No customer ever waits, so the simulator is arrival-driven: each arrival
//! draws its service and its departure is known immediately. Records come
//! out in arrival order; every overlap statistic is a post-pass over them
//! (see [`extract`]).

pub mod extract;

pub use extract::*;

use crate::analytic::RateProfile;
use crate::dists::DistSpec;
use crate::error::{config, Result};
use crate::rng::{Purpose, Stream};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ArrivalSpec {
    Poisson { rate: f64 },
    /// Nonhomogeneous Poisson, sampled by thinning against the maximum rate.
    PoissonProfile { profile: RateProfile },
    Renewal { interarrival: DistSpec },
}

impl ArrivalSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Poisson { rate } => {
                if rate > &0.0 && rate.is_finite() {
                    Ok(())
                } else {
                    Err(config(format!("arrival rate must be positive, got {rate}")))
                }
            }
            Self::PoissonProfile { profile } => {
                profile.validate()?;
                if profile.max_rate() > 0.0 {
                    Ok(())
                } else {
                    Err(config("rate profile is zero everywhere"))
                }
            }
            Self::Renewal { interarrival } => interarrival.validate(),
        }
    }

    /// Long-run arrival rate (the profile's last rate for a profile).
    pub fn rate(&self) -> f64 {
        match self {
            Self::Poisson { rate } => *rate,
            Self::PoissonProfile { profile } => *profile.rates.last().expect("validated profile"),
            Self::Renewal { interarrival } => 1.0 / interarrival.mean(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    Customers(u64),
    Horizon(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Warmup {
    Time(f64),
    Customers(u64),
}

impl Default for Warmup {
    fn default() -> Self {
        Self::Customers(0)
    }
}

fn one() -> u64 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub arrival: ArrivalSpec,
    pub service: DistSpec,
    pub stop: StopRule,
    #[serde(default)]
    pub warmup: Warmup,
    pub seed: u64,
    #[serde(default = "one")]
    pub replications: u64,
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        self.arrival.validate()?;
        self.service.validate()?;
        if self.replications == 0 {
            return Err(config("replications must be at least 1"));
        }
        match (self.stop, self.warmup) {
            (StopRule::Customers(0), _) => Err(config("stop rule needs at least one customer")),
            (StopRule::Horizon(t), _) if !(t > 0.0 && t.is_finite()) => {
                Err(config(format!("horizon must be positive and finite, got {t}")))
            }
            (StopRule::Customers(n), Warmup::Customers(w)) if w >= n => {
                Err(config(format!("warmup of {w} customers leaves none of {n}")))
            }
            (StopRule::Horizon(t), Warmup::Time(w)) if !(w >= 0.0 && w < t) => {
                Err(config(format!("warmup time {w} must lie in [0, {t})")))
            }
            (_, Warmup::Time(w)) if !(w >= 0.0 && w.is_finite()) => {
                Err(config(format!("warmup time must be nonnegative, got {w}")))
            }
            _ => Ok(()),
        }
    }
}

/// One customer. `departure = arrival + service` exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CustomerRecord {
    pub index: u64,
    pub arrival: f64,
    pub service: f64,
    pub departure: f64,
}

/// Endless stream of customers for one `(seed, replication)`.
#[derive(Debug, Clone)]
pub struct Customers {
    arrival: ArrivalSpec,
    service: DistSpec,
    arrivals: Stream,
    services: Stream,
    thinning: Stream,
    clock: f64,
    next_index: u64,
    max_rate: f64,
}

impl Customers {
    pub fn new(arrival: &ArrivalSpec, service: &DistSpec, seed: u64, replication: u64) -> Result<Self> {
        arrival.validate()?;
        service.validate()?;
        let max_rate = match arrival {
            ArrivalSpec::PoissonProfile { profile } => profile.max_rate(),
            _ => 0.0,
        };
        Ok(Self {
            arrival: arrival.clone(),
            service: service.clone(),
            arrivals: Stream::new(seed, replication, Purpose::Arrivals),
            services: Stream::new(seed, replication, Purpose::Services),
            thinning: Stream::new(seed, replication, Purpose::Thinning),
            clock: 0.0,
            next_index: 1,
            max_rate,
        })
    }

    fn next_arrival(&mut self) -> f64 {
        match &self.arrival {
            ArrivalSpec::Poisson { rate } => self.clock - self.arrivals.open01().ln() / rate,
            ArrivalSpec::Renewal { interarrival } => self.clock + interarrival.sample(&mut self.arrivals),
            ArrivalSpec::PoissonProfile { profile } => {
                let mut t = self.clock;
                loop {
                    t -= self.arrivals.open01().ln() / self.max_rate;
                    if self.thinning.open01() * self.max_rate < profile.rate_at(t) {
                        return t;
                    }
                }
            }
        }
    }
}

impl Iterator for Customers {
    type Item = CustomerRecord;

    fn next(&mut self) -> Option<CustomerRecord> {
        let arrival = self.next_arrival();
        let service = self.service.sample(&mut self.services);
        self.clock = arrival;
        let index = self.next_index;
        self.next_index += 1;
        Some(CustomerRecord { index, arrival, service, departure: arrival + service })
    }
}

/// Records of one replication, plus the time up to which arrivals are
/// complete.
#[derive(Debug, Clone, PartialEq)]
pub struct Run {
    pub replication: u64,
    pub records: Vec<CustomerRecord>,
    pub observed_until: f64,
    pub warmup: Warmup,
}

impl Run {
    /// Tag window with the run's warmup and observation end.
    pub fn window(&self) -> TagWindow {
        TagWindow { warmup: self.warmup, observed_until: self.observed_until, guard: 0.0, every: 1 }
    }
}

pub fn run(cfg: &RunConfig, replication: u64) -> Result<Run> {
    cfg.validate()?;
    let mut stream = Customers::new(&cfg.arrival, &cfg.service, cfg.seed, replication)?;
    let (records, observed_until) = match cfg.stop {
        StopRule::Customers(n) => {
            let records: Vec<_> = stream.by_ref().take(n as usize).collect();
            let end = records.last().map_or(0.0, |r| r.arrival);
            (records, end)
        }
        StopRule::Horizon(t) => (stream.take_while(|r| r.arrival <= t).collect(), t),
    };
    Ok(Run { replication, records, observed_until, warmup: cfg.warmup })
}

/// Runs replications `0..cfg.replications` in parallel and applies `f` to
/// each, returning results in replication order.
pub fn replicate<T, F>(cfg: &RunConfig, f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(Run) -> Result<T> + Sync,
{
    cfg.validate()?;
    (0..cfg.replications).into_par_iter().map(|r| run(cfg, r).and_then(&f)).collect()
}

/// Steady-state burn-in for pair statistics: `max(1000, 10/min(λ, μ))`
/// customers, with `μ = 1/E[S]`.
pub fn default_burn_in(arrival: &ArrivalSpec, service: &DistSpec) -> u64 {
    let slowest = arrival.rate().min(1.0 / service.mean());
    (10.0 / slowest).ceil().max(1000.0) as u64
}
