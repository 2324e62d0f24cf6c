//! Empirical statistics and analytic-vs-simulated comparisons.

pub mod suites;

use crate::analytic::Pmf;
use crate::error::{domain, Error, Result};
use crate::special::gamma_q;
use serde::{Deserialize, Serialize};

/// Right-continuous empirical cdf.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

pub fn ecdf(samples: &[f64]) -> Result<Ecdf> {
    if samples.is_empty() {
        return Err(Error::Empty("ecdf needs at least one sample"));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(domain("ecdf samples contain NaN"));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    Ok(Ecdf { sorted })
}

impl Ecdf {
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&s| s <= x) as f64 / self.sorted.len() as f64
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn samples(&self) -> &[f64] {
        &self.sorted
    }

    /// `(x, F(x))` at each distinct sample value.
    pub fn steps(&self) -> Vec<(f64, f64)> {
        let n = self.sorted.len() as f64;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (i, &x) in self.sorted.iter().enumerate() {
            match out.last_mut() {
                Some(last) if last.0 == x => last.1 = (i + 1) as f64 / n,
                _ => out.push((x, (i + 1) as f64 / n)),
            }
        }
        out
    }
}

/// `sup |F_n - F|`, checking both sides of every jump of `F_n`. The left
/// limit of `F` is taken one ulp below each sample value, so laws with
/// atoms (and step cdfs) are handled exactly.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    let e = ecdf(samples)?;
    let mut below = 0.0;
    let mut d: f64 = 0.0;
    for (x, at) in e.steps() {
        let left = cdf(x.next_down());
        d = d.max((below - left).abs()).max((at - cdf(x)).abs());
        below = at;
    }
    Ok(d.clamp(0.0, 1.0))
}

/// Asymptotic KS critical value `c/√n`.
pub fn ks_threshold(coef: f64, n: usize) -> f64 {
    coef / (n as f64).sqrt()
}

/// Empirical pmf of nonnegative integer samples.
pub fn empirical_pmf(counts: &[u64]) -> Result<Pmf> {
    if counts.is_empty() {
        return Err(Error::Empty("empirical pmf needs at least one sample"));
    }
    let max = *counts.iter().max().unwrap() as usize;
    let mut probs = vec![0.0; max + 1];
    for &c in counts {
        probs[c as usize] += 1.0;
    }
    let n = counts.len() as f64;
    probs.iter_mut().for_each(|p| *p /= n);
    Ok(Pmf::from_probs(probs))
}

/// `(1/2) Σ |p_k - q_k|`, with the two tail masses compared as one extra cell.
pub fn tv_distance(p: &Pmf, q: &Pmf) -> f64 {
    let len = p.len().max(q.len());
    let body: f64 = (0..len).map(|k| (p.get(k) - q.get(k)).abs()).sum();
    (0.5 * (body + (p.tail - q.tail).abs())).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ChiSquare {
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    /// `[lo, hi]` count ranges of the pooled cells; the last is open-ended.
    pub cells: Vec<(u64, Option<u64>)>,
}

/// Pearson goodness of fit of integer samples to `pmf`. Adjacent cells are
/// pooled left to right until each expects at least `min_expected`; the
/// last cell collects everything from its lower end upward, including the
/// pmf's truncated tail.
pub fn chi_square_gof(counts: &[u64], pmf: &Pmf, min_expected: f64) -> Result<ChiSquare> {
    if counts.is_empty() {
        return Err(Error::Empty("chi-square needs at least one sample"));
    }
    let n = counts.len() as f64;
    let top = pmf.len().max(*counts.iter().max().unwrap() as usize + 1);
    let mut observed = vec![0.0; top];
    for &c in counts {
        observed[c as usize] += 1.0;
    }
    // (lo, hi, expected, observed)
    let mut cells: Vec<(u64, u64, f64, f64)> = Vec::new();
    let mut cur: Option<(u64, u64, f64, f64)> = None;
    for k in 0..top {
        let e = n * pmf.get(k);
        let c = match cur.take() {
            Some((lo, _, ce, co)) => (lo, k as u64, ce + e, co + observed[k]),
            None => (k as u64, k as u64, e, observed[k]),
        };
        if c.2 >= min_expected {
            cells.push(c);
        } else {
            cur = Some(c);
        }
    }
    // Whatever is left, plus the tail mass, forms the open last cell.
    let tail_e = n * pmf.tail;
    match cur {
        Some(c) => cells.push((c.0, u64::MAX, c.2 + tail_e, c.3)),
        None => match cells.last_mut() {
            Some(last) => {
                last.1 = u64::MAX;
                last.2 += tail_e;
            }
            None => return Err(domain("chi-square has no cells")),
        },
    }
    if cells.len() > 1 && cells.last().unwrap().2 < min_expected {
        let last = cells.pop().unwrap();
        let prev = cells.last_mut().unwrap();
        prev.1 = last.1;
        prev.2 += last.2;
        prev.3 += last.3;
    }
    if cells.len() < 2 {
        return Err(domain("chi-square needs at least two cells after pooling"));
    }
    let statistic: f64 = cells.iter().map(|c| (c.3 - c.2).powi(2) / c.2).sum();
    let df = cells.len() - 1;
    let p_value = gamma_q(df as f64 / 2.0, statistic / 2.0)?;
    let cells = cells.iter().map(|c| (c.0, if c.1 == u64::MAX { None } else { Some(c.1) })).collect();
    Ok(ChiSquare { statistic, df, p_value, cells })
}

/// Rate MLE `1 / mean`.
pub fn mle_exponential_rate(samples: &[f64]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::Empty("exponential MLE needs at least one sample"));
    }
    if samples.iter().any(|&x| !(x > 0.0) || !x.is_finite()) {
        return Err(domain("exponential MLE needs positive finite samples"));
    }
    Ok(samples.len() as f64 / samples.iter().sum::<f64>())
}

pub fn mean(samples: &[f64]) -> f64 {
    samples.iter().sum::<f64>() / samples.len() as f64
}

/// Unbiased sample variance.
pub fn sample_variance(samples: &[f64]) -> f64 {
    let m = mean(samples);
    samples.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (samples.len() as f64 - 1.0)
}

/// Standard error of the sample variance, `sqrt((m₄ - s⁴ (n-3)/(n-1)) / n)`.
pub fn variance_standard_error(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let m = mean(samples);
    let m4 = samples.iter().map(|x| (x - m).powi(4)).sum::<f64>() / n;
    let s2 = sample_variance(samples);
    ((m4 - s2 * s2 * (n - 3.0) / (n - 1.0)) / n).max(0.0).sqrt()
}

/// `(x̄ - m) / (s/√n)`.
pub fn mean_z(samples: &[f64], m: f64) -> f64 {
    let n = samples.len() as f64;
    (mean(samples) - m) / (sample_variance(samples) / n).sqrt()
}

/// `(k - np) / sqrt(np(1-p))`.
pub fn binomial_z(successes: u64, n: u64, p: f64) -> f64 {
    let nf = n as f64;
    (successes as f64 - nf * p) / (nf * p * (1.0 - p)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
    pub densities: Vec<f64>,
}

impl Histogram {
    pub fn from_edges(samples: &[f64], edges: Vec<f64>) -> Result<Self> {
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(domain("histogram edges must be strictly increasing"));
        }
        let mut counts = vec![0u64; edges.len() - 1];
        let last = edges.len() - 2;
        for &x in samples {
            if x < edges[0] || x > edges[last + 1] {
                continue;
            }
            let i = edges.partition_point(|&e| e <= x).saturating_sub(1).min(last);
            counts[i] += 1;
        }
        let n: u64 = counts.iter().sum();
        let densities = counts
            .iter()
            .zip(edges.windows(2))
            .map(|(&c, w)| if n == 0 { 0.0 } else { c as f64 / (n as f64 * (w[1] - w[0])) })
            .collect();
        Ok(Self { edges, counts, densities })
    }

    /// `bins` equal-width bins over `[min, max]`.
    pub fn uniform(samples: &[f64], bins: usize) -> Result<Self> {
        if samples.is_empty() {
            return Ok(Self { edges: Vec::new(), counts: Vec::new(), densities: Vec::new() });
        }
        if bins == 0 {
            return Err(domain("histogram needs at least one bin"));
        }
        let lo = samples.iter().copied().fold(f64::INFINITY, f64::min);
        let mut hi = samples.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if !(hi > lo) {
            hi = lo + 1.0;
        }
        let edges = (0..=bins).map(|i| lo + (hi - lo) * i as f64 / bins as f64).collect();
        Self::from_edges(samples, edges)
    }

    /// Unit bins `[k - 1/2, k + 1/2)` for integer data.
    pub fn integer(counts: &[u64]) -> Result<Self> {
        if counts.is_empty() {
            return Ok(Self { edges: Vec::new(), counts: Vec::new(), densities: Vec::new() });
        }
        let lo = *counts.iter().min().unwrap();
        let hi = *counts.iter().max().unwrap();
        let edges = (lo..=hi + 1).map(|k| k as f64 - 0.5).collect();
        let xs: Vec<f64> = counts.iter().map(|&c| c as f64).collect();
        Self::from_edges(&xs, edges)
    }

    pub fn n(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    Ks,
    Tv,
    ChiSquare,
    ZScore,
    /// `|observed - target|`.
    AbsDeviation,
    /// `|observed - target| / |target|`.
    RelDeviation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub check: String,
    pub params: serde_json::Value,
    pub n: usize,
    pub statistic: Statistic,
    /// The statistic, or the p-value for chi-square.
    pub observed: f64,
    /// Upper bound on `observed`, or the p-value floor for chi-square.
    pub threshold: f64,
    pub pass: bool,
    pub seed: u64,
    pub notes: String,
}

impl VerificationReport {
    pub fn new(
        check: impl Into<String>,
        params: serde_json::Value,
        n: usize,
        statistic: Statistic,
        observed: f64,
        threshold: f64,
        seed: u64,
    ) -> Self {
        let pass = match statistic {
            Statistic::ChiSquare => observed >= threshold,
            Statistic::ZScore => observed.abs() <= threshold,
            _ => observed <= threshold,
        };
        Self { check: check.into(), params, n, statistic, observed, threshold, pass, seed, notes: String::new() }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        let note = note.into();
        if self.notes.is_empty() {
            self.notes = note;
        } else {
            self.notes = format!("{}; {}", self.notes, note);
        }
        self
    }
}

/// Thresholds used by [`compare`] and the suites.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Policy {
    /// KS threshold is `ks_coef / √n`.
    pub ks_coef: f64,
    /// Overrides the KS threshold outright when set.
    pub ks_max: Option<f64>,
    pub tv_max: f64,
    pub z_max: f64,
    pub chi_square_p_min: f64,
    pub min_expected: f64,
}

impl Default for Policy {
    fn default() -> Self {
        Self { ks_coef: 1.63, ks_max: None, tv_max: 0.02, z_max: 3.0, chi_square_p_min: 0.001, min_expected: 5.0 }
    }
}

impl Policy {
    pub fn ks_threshold(&self, n: usize) -> f64 {
        self.ks_max.unwrap_or_else(|| ks_threshold(self.ks_coef, n))
    }
}

/// What a sample is compared against.
pub enum Target<'a> {
    /// Continuous law given by its cdf.
    Cdf(&'a dyn Fn(f64) -> f64),
    /// Law on the nonnegative integers.
    Pmf(&'a Pmf),
    /// Atom `P(X = 0) = atom` plus a continuous positive part with the
    /// given conditional cdf.
    AtomPlusContinuous { atom: f64, positive_cdf: &'a dyn Fn(f64) -> f64 },
}

pub enum Samples<'a> {
    Real(&'a [f64]),
    Counts(&'a [u64]),
}

/// Picks the test by target shape: KS for continuous laws, TV and
/// chi-square for pmfs, and for atom-plus-continuous laws a binomial
/// z-test on the atom together with KS on the positive part.
pub fn compare(check: &str, target: Target<'_>, samples: Samples<'_>, policy: &Policy, seed: u64) -> Result<Vec<VerificationReport>> {
    let params = serde_json::json!({});
    match (target, samples) {
        (Target::Cdf(cdf), Samples::Real(xs)) => {
            let d = ks_distance(xs, cdf)?;
            Ok(vec![VerificationReport::new(format!("{check}/ks"), params, xs.len(), Statistic::Ks, d, policy.ks_threshold(xs.len()), seed)])
        }
        (Target::Pmf(pmf), Samples::Counts(cs)) => {
            let emp = empirical_pmf(cs)?;
            let tv = tv_distance(&emp, pmf);
            let chi = chi_square_gof(cs, pmf, policy.min_expected)?;
            Ok(vec![
                VerificationReport::new(format!("{check}/tv"), params.clone(), cs.len(), Statistic::Tv, tv, policy.tv_max, seed),
                VerificationReport::new(format!("{check}/chi-square"), params, cs.len(), Statistic::ChiSquare, chi.p_value, policy.chi_square_p_min, seed)
                    .with_note(format!("{} cells pooled to expected >= {}; statistic {:.4} on {} df", chi.cells.len(), policy.min_expected, chi.statistic, chi.df)),
            ])
        }
        (Target::AtomPlusContinuous { atom, positive_cdf }, Samples::Real(xs)) => {
            if xs.is_empty() {
                return Err(Error::Empty("comparison needs at least one sample"));
            }
            let zeros = xs.iter().filter(|&&x| x == 0.0).count() as u64;
            let z = binomial_z(zeros, xs.len() as u64, atom);
            let positive: Vec<f64> = xs.iter().copied().filter(|&x| x > 0.0).collect();
            let mut out = vec![VerificationReport::new(format!("{check}/atom"), params.clone(), xs.len(), Statistic::ZScore, z, policy.z_max, seed)
                .with_note(format!("observed P(X=0) {:.6}, expected {:.6}", zeros as f64 / xs.len() as f64, atom))];
            if positive.is_empty() {
                let mut r = VerificationReport::new(format!("{check}/positive-ks"), params, 0, Statistic::Ks, 1.0, 0.0, seed);
                r.pass = false;
                out.push(r.with_note("no positive samples"));
            } else {
                let d = ks_distance(&positive, positive_cdf)?;
                out.push(VerificationReport::new(format!("{check}/positive-ks"), params, positive.len(), Statistic::Ks, d, policy.ks_threshold(positive.len()), seed));
            }
            Ok(out)
        }
        _ => Err(Error::Shape("target and samples are not comparable (continuous vs discrete)".into())),
    }
}
