//! Service and inter-arrival distributions.
//!
//! [`DistSpec`] is a plain description; every evaluation (cdf, moments,
//! expectations of arbitrary functions, k-fold convolutions) dispatches on the
//! variant, using closed forms where they exist and [`crate::quad`]
//! otherwise.

use crate::error::{config, domain, Error, Result};
use crate::quad::Quadrature;
use crate::special::{
    gamma_p, gamma_q, ln_factorial, ln_gamma, normal_cdf, normal_pdf, normal_quantile, normal_sf, regularized_pair,
};
use rand::Rng;
use rand_distr::{Distribution, Exp, Gamma, Normal};
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;

const WEIGHT_TOL: f64 = 1e-12;
/// Standard-normal half width beyond which densities are treated as zero.
const NORMAL_SPAN: f64 = 38.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistSpec {
    Exponential { rate: f64 },
    Erlang { shape: u32, rate: f64 },
    Gamma { shape: f64, rate: f64 },
    Deterministic { value: f64 },
    DeterministicMixture { weights: Vec<f64>, values: Vec<f64> },
    Uniform { low: f64, high: f64 },
    TruncatedNormal { low: f64, high: f64, location: f64, scale: f64 },
    /// Parameterized by the mean and variance of the lognormal itself.
    LogNormal { mean: f64, variance: f64 },
    HyperExponential { weights: Vec<f64>, rates: Vec<f64> },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(config(format!("{name} must be positive and finite, got {v}")))
    }
}

fn check_weights(weights: &[f64], len: usize) -> Result<()> {
    if weights.is_empty() {
        return Err(config("mixture needs at least one branch"));
    }
    if weights.len() != len {
        return Err(config(format!("{} weights for {} branches", weights.len(), len)));
    }
    if weights.iter().any(|&w| !(w >= 0.0) || !w.is_finite()) {
        return Err(config("mixture weights must be nonnegative"));
    }
    let total: f64 = weights.iter().sum();
    if (total - 1.0).abs() > WEIGHT_TOL {
        return Err(config(format!("mixture weights sum to {total}, expected 1")));
    }
    Ok(())
}

/// Probability mass of a standard normal on `[lo, hi]`, computed on the side
/// that avoids cancellation.
fn normal_mass(lo: f64, hi: f64) -> f64 {
    if lo > 0.0 {
        normal_sf(lo) - normal_sf(hi)
    } else {
        normal_cdf(hi) - normal_cdf(lo)
    }
}

impl DistSpec {
    pub fn exponential(rate: f64) -> Self {
        Self::Exponential { rate }
    }

    pub fn deterministic(value: f64) -> Self {
        Self::Deterministic { value }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Exponential { rate } => positive("exponential rate", *rate),
            Self::Erlang { shape, rate } => {
                if *shape == 0 {
                    return Err(config("erlang shape must be at least 1"));
                }
                positive("erlang rate", *rate)
            }
            Self::Gamma { shape, rate } => {
                positive("gamma shape", *shape)?;
                positive("gamma rate", *rate)
            }
            Self::Deterministic { value } => positive("deterministic value", *value),
            Self::DeterministicMixture { weights, values } => {
                check_weights(weights, values.len())?;
                if values.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
                    return Err(config("deterministic mixture values must be nonnegative"));
                }
                positive("deterministic mixture mean", self.mean())
            }
            Self::Uniform { low, high } => {
                if !(*low >= 0.0) || !high.is_finite() || !(low < high) {
                    return Err(config(format!("uniform needs 0 <= low < high, got [{low}, {high}]")));
                }
                Ok(())
            }
            Self::TruncatedNormal { low, high, location, scale } => {
                if !(*low >= 0.0) || !high.is_finite() || !(low < high) {
                    return Err(config(format!("truncated normal needs 0 <= low < high, got [{low}, {high}]")));
                }
                if !location.is_finite() {
                    return Err(config("truncated normal location must be finite"));
                }
                positive("truncated normal scale", *scale)?;
                let (lo, hi) = ((low - location) / scale, (high - location) / scale);
                if normal_mass(lo, hi) <= 0.0 {
                    return Err(config("truncated normal interval carries no mass"));
                }
                Ok(())
            }
            Self::LogNormal { mean, variance } => {
                positive("lognormal mean", *mean)?;
                positive("lognormal variance", *variance)
            }
            Self::HyperExponential { weights, rates } => {
                check_weights(weights, rates.len())?;
                rates.iter().try_for_each(|&r| positive("hyper-exponential rate", r))
            }
        }
    }

    /// True when the law has no continuous part.
    pub fn is_discrete(&self) -> bool {
        matches!(self, Self::Deterministic { .. } | Self::DeterministicMixture { .. })
    }

    /// `(location, scale)` of the underlying normal for the lognormal variant.
    pub fn lognormal_params(mean: f64, variance: f64) -> (f64, f64) {
        let s2 = (1.0 + variance / (mean * mean)).ln();
        (mean.ln() - 0.5 * s2, s2.sqrt())
    }

    fn truncnorm_std(low: f64, high: f64, location: f64, scale: f64) -> (f64, f64, f64) {
        let lo = (low - location) / scale;
        let hi = (high - location) / scale;
        (lo, hi, normal_mass(lo, hi))
    }

    pub fn mean(&self) -> f64 {
        match self {
            Self::Exponential { rate } => 1.0 / rate,
            Self::Erlang { shape, rate } => *shape as f64 / rate,
            Self::Gamma { shape, rate } => shape / rate,
            Self::Deterministic { value } => *value,
            Self::DeterministicMixture { weights, values } => weights.iter().zip(values).map(|(p, v)| p * v).sum(),
            Self::Uniform { low, high } => 0.5 * (low + high),
            Self::TruncatedNormal { low, high, location, scale } => {
                let (lo, hi, z) = Self::truncnorm_std(*low, *high, *location, *scale);
                location + scale * (normal_pdf(lo) - normal_pdf(hi)) / z
            }
            Self::LogNormal { mean, .. } => *mean,
            Self::HyperExponential { weights, rates } => weights.iter().zip(rates).map(|(p, r)| p / r).sum(),
        }
    }

    pub fn variance(&self) -> f64 {
        match self {
            Self::Exponential { rate } => 1.0 / (rate * rate),
            Self::Erlang { shape, rate } => *shape as f64 / (rate * rate),
            Self::Gamma { shape, rate } => shape / (rate * rate),
            Self::Deterministic { .. } => 0.0,
            Self::Uniform { low, high } => (high - low).powi(2) / 12.0,
            Self::LogNormal { variance, .. } => *variance,
            _ => {
                let m = self.mean();
                self.raw_moment(2) - m * m
            }
        }
    }

    /// `E[Sʳ]`.
    pub fn raw_moment(&self, r: u32) -> f64 {
        let rf = r as f64;
        match self {
            Self::Exponential { rate } => (ln_factorial(r as u64) - rf * rate.ln()).exp(),
            Self::Erlang { shape, rate } => {
                let a = *shape as f64;
                (ln_gamma(a + rf) - ln_gamma(a) - rf * rate.ln()).exp()
            }
            Self::Gamma { shape, rate } => (ln_gamma(shape + rf) - ln_gamma(*shape) - rf * rate.ln()).exp(),
            Self::Deterministic { value } => value.powi(r as i32),
            Self::DeterministicMixture { weights, values } => {
                weights.iter().zip(values).map(|(p, v)| p * v.powi(r as i32)).sum()
            }
            Self::Uniform { low, high } => {
                (high.powi(r as i32 + 1) - low.powi(r as i32 + 1)) / ((rf + 1.0) * (high - low))
            }
            Self::LogNormal { mean, variance } => {
                let (m, s) = Self::lognormal_params(*mean, *variance);
                (rf * m + 0.5 * rf * rf * s * s).exp()
            }
            Self::HyperExponential { weights, rates } => weights
                .iter()
                .zip(rates)
                .map(|(p, mu)| p * (ln_factorial(r as u64) - rf * mu.ln()).exp())
                .sum(),
            Self::TruncatedNormal { .. } => {
                // Bounded support: quadrature cannot fail badly here.
                self.expect(|x| x.powi(r as i32)).unwrap_or(f64::NAN)
            }
        }
    }

    /// Upper end of the support (infinite for unbounded laws).
    pub fn support_max(&self) -> f64 {
        match self {
            Self::Deterministic { value } => *value,
            Self::DeterministicMixture { values, .. } => values.iter().copied().fold(0.0, f64::max),
            Self::Uniform { high, .. } | Self::TruncatedNormal { high, .. } => *high,
            _ => f64::INFINITY,
        }
    }

    /// Density of the continuous variants; zero for the deterministic ones.
    pub fn pdf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        match self {
            Self::Exponential { rate } => rate * (-rate * x).exp(),
            Self::Erlang { shape, rate } => gamma_pdf(*shape as f64, *rate, x),
            Self::Gamma { shape, rate } => gamma_pdf(*shape, *rate, x),
            Self::Deterministic { .. } | Self::DeterministicMixture { .. } => 0.0,
            Self::Uniform { low, high } => {
                if x >= *low && x <= *high {
                    1.0 / (high - low)
                } else {
                    0.0
                }
            }
            Self::TruncatedNormal { low, high, location, scale } => {
                if x < *low || x > *high {
                    return 0.0;
                }
                let (_, _, z) = Self::truncnorm_std(*low, *high, *location, *scale);
                normal_pdf((x - location) / scale) / (scale * z)
            }
            Self::LogNormal { mean, variance } => {
                if x == 0.0 {
                    return 0.0;
                }
                let (m, s) = Self::lognormal_params(*mean, *variance);
                normal_pdf((x.ln() - m) / s) / (x * s)
            }
            Self::HyperExponential { weights, rates } => {
                weights.iter().zip(rates).map(|(p, r)| p * r * (-r * x).exp()).sum()
            }
        }
    }

    /// `G(x) = P(S <= x)`, right-continuous.
    pub fn cdf(&self, x: f64) -> f64 {
        if x.is_nan() {
            return f64::NAN;
        }
        if x < 0.0 {
            return 0.0;
        }
        match self {
            Self::Exponential { rate } => -(-rate * x).exp_m1(),
            Self::Erlang { shape, rate } => regularized_pair(*shape as f64, rate * x).0,
            Self::Gamma { shape, rate } => regularized_pair(*shape, rate * x).0,
            Self::Deterministic { value } => step(x, *value),
            Self::DeterministicMixture { weights, values } => {
                weights.iter().zip(values).map(|(p, v)| p * step(x, *v)).sum()
            }
            Self::Uniform { low, high } => ((x - low) / (high - low)).clamp(0.0, 1.0),
            Self::TruncatedNormal { low, high, location, scale } => {
                if x <= *low {
                    return 0.0;
                }
                if x >= *high {
                    return 1.0;
                }
                let (lo, _, z) = Self::truncnorm_std(*low, *high, *location, *scale);
                (normal_mass(lo, (x - location) / scale) / z).clamp(0.0, 1.0)
            }
            Self::LogNormal { mean, variance } => {
                if x == 0.0 {
                    return 0.0;
                }
                let (m, s) = Self::lognormal_params(*mean, *variance);
                normal_cdf((x.ln() - m) / s)
            }
            Self::HyperExponential { weights, rates } => {
                weights.iter().zip(rates).map(|(p, r)| -p * (-r * x).exp_m1()).sum()
            }
        }
    }

    /// `Ḡ(x) = P(S > x)`, computed directly to keep precision in the tail.
    pub fn sf(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 1.0;
        }
        match self {
            Self::Exponential { rate } => (-rate * x).exp(),
            Self::Erlang { shape, rate } => regularized_pair(*shape as f64, rate * x).1,
            Self::Gamma { shape, rate } => regularized_pair(*shape, rate * x).1,
            Self::LogNormal { mean, variance } => {
                if x == 0.0 {
                    return 1.0;
                }
                let (m, s) = Self::lognormal_params(*mean, *variance);
                normal_sf((x.ln() - m) / s)
            }
            Self::HyperExponential { weights, rates } => {
                weights.iter().zip(rates).map(|(p, r)| p * (-r * x).exp()).sum()
            }
            _ => 1.0 - self.cdf(x),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            Self::Exponential { rate } => Exp::new(*rate).expect("validated rate").sample(rng),
            Self::Erlang { shape, rate } => {
                Gamma::new(*shape as f64, 1.0 / rate).expect("validated erlang").sample(rng)
            }
            Self::Gamma { shape, rate } => Gamma::new(*shape, 1.0 / rate).expect("validated gamma").sample(rng),
            Self::Deterministic { value } => *value,
            Self::DeterministicMixture { weights, values } => values[pick(weights, rng)],
            Self::Uniform { low, high } => rng.random_range(*low..*high),
            Self::TruncatedNormal { low, high, location, scale } => {
                let (lo, hi, z) = Self::truncnorm_std(*low, *high, *location, *scale);
                let std = if z >= 0.25 {
                    let normal = Normal::new(0.0, 1.0).expect("unit normal");
                    loop {
                        let v: f64 = normal.sample(rng);
                        if v >= lo && v <= hi {
                            break v;
                        }
                    }
                } else {
                    let u: f64 = rng.random();
                    let v = if lo > 0.0 {
                        -normal_quantile(normal_sf(lo) - u * z)
                    } else {
                        normal_quantile(normal_cdf(lo) + u * z)
                    };
                    v.clamp(lo, hi)
                };
                location + scale * std
            }
            Self::LogNormal { mean, variance } => {
                let (m, s) = Self::lognormal_params(*mean, *variance);
                let z: f64 = Normal::new(0.0, 1.0).expect("unit normal").sample(rng);
                (m + s * z).exp()
            }
            Self::HyperExponential { weights, rates } => {
                let rate = rates[pick(weights, rng)];
                Exp::new(rate).expect("validated rate").sample(rng)
            }
        }
    }

    /// `E[h(S)]`.
    pub fn expect<H: Fn(f64) -> f64>(&self, h: H) -> Result<f64> {
        self.expect_over(h, f64::NEG_INFINITY, f64::INFINITY, &[])
    }

    /// `E[h(S); lo < S <= hi]`, with optional points where `h` has kinks.
    pub fn expect_over<H: Fn(f64) -> f64>(&self, h: H, lo: f64, hi: f64, breaks: &[f64]) -> Result<f64> {
        self.expect_dyn(&Quadrature::default(), &h, lo, hi, breaks)
    }

    /// [`Self::expect_over`] with explicit quadrature tolerances.
    pub fn expect_over_with<H: Fn(f64) -> f64>(
        &self,
        quad: &Quadrature,
        h: H,
        lo: f64,
        hi: f64,
        breaks: &[f64],
    ) -> Result<f64> {
        self.expect_dyn(quad, &h, lo, hi, breaks)
    }

    fn expect_dyn(&self, quad: &Quadrature, h: &dyn Fn(f64) -> f64, lo: f64, hi: f64, breaks: &[f64]) -> Result<f64> {
        if !(lo < hi) {
            return Ok(0.0);
        }
        let inside = |v: f64| lo < v && v <= hi;
        match self {
            Self::Deterministic { value } => Ok(if inside(*value) { h(*value) } else { 0.0 }),
            Self::DeterministicMixture { weights, values } => Ok(weights
                .iter()
                .zip(values)
                .filter(|(_, v)| inside(**v))
                .map(|(p, v)| p * h(*v))
                .sum()),
            Self::HyperExponential { weights, rates } => {
                let mut total = 0.0;
                for (p, r) in weights.iter().zip(rates) {
                    if *p > 0.0 {
                        total += p * Self::Exponential { rate: *r }.expect_dyn(quad, h, lo, hi, breaks)?;
                    }
                }
                Ok(total)
            }
            Self::LogNormal { mean, variance } => {
                let (m, s) = Self::lognormal_params(*mean, *variance);
                let to_z = |x: f64| if x <= 0.0 { f64::NEG_INFINITY } else { (x.ln() - m) / s };
                let zlo = to_z(lo).max(-NORMAL_SPAN);
                let zhi = to_z(hi).min(NORMAL_SPAN);
                if !(zlo < zhi) {
                    return Ok(0.0);
                }
                let mut zbreaks: Vec<f64> = breaks.iter().map(|&b| to_z(b)).collect();
                zbreaks.push(0.0);
                quad.integrate_with(|z| h((m + s * z).exp()) * normal_pdf(z), zlo, zhi, &zbreaks)
            }
            Self::Uniform { low, high } => {
                let (a, b) = (lo.max(*low), hi.min(*high));
                if !(a < b) {
                    return Ok(0.0);
                }
                let d = high - low;
                quad.integrate_with(|x| h(x) / d, a, b, breaks)
            }
            Self::TruncatedNormal { low, high, location, scale } => {
                let a = lo.max(*low).max(location - NORMAL_SPAN * scale);
                let b = hi.min(*high).min(location + NORMAL_SPAN * scale);
                if !(a < b) {
                    return Ok(0.0);
                }
                let mut pts = breaks.to_vec();
                pts.push(*location);
                quad.integrate_with(|x| density_weighted(h, self.pdf(x), x), a, b, &pts)
            }
            Self::Exponential { .. } | Self::Erlang { .. } | Self::Gamma { .. } => {
                let a = lo.max(0.0);
                let mut pts = breaks.to_vec();
                let mode = self.mean();
                pts.push(mode);
                let f = |x: f64| density_weighted(h, self.pdf(x), x);
                if hi.is_finite() {
                    quad.integrate_with(f, a, hi, &pts)
                } else {
                    quad.integrate_to_infinity(f, a, mode, &pts)
                }
            }
        }
    }

    /// `∫₀ˣ Ḡ(u) du = E[min(S, x)]`.
    pub fn integrated_survival(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(0.0);
        }
        if x == f64::INFINITY {
            return Ok(self.mean());
        }
        match self {
            Self::Exponential { rate } => Ok(-(-rate * x).exp_m1() / rate),
            Self::Erlang { shape, rate } => Ok(gamma_truncated_mean(*shape as f64, *rate, x)),
            Self::Gamma { shape, rate } => Ok(gamma_truncated_mean(*shape, *rate, x)),
            Self::Deterministic { value } => Ok(x.min(*value)),
            Self::DeterministicMixture { weights, values } => {
                Ok(weights.iter().zip(values).map(|(p, v)| p * x.min(*v)).sum())
            }
            Self::Uniform { low, high } => Ok(if x <= *low {
                x
            } else if x >= *high {
                0.5 * (low + high)
            } else {
                let d = high - low;
                low + (d * d - (high - x).powi(2)) / (2.0 * d)
            }),
            Self::HyperExponential { weights, rates } => {
                Ok(weights.iter().zip(rates).map(|(p, r)| -p * (-r * x).exp_m1() / r).sum())
            }
            Self::LogNormal { mean, variance } => {
                let (m, s) = Self::lognormal_params(*mean, *variance);
                let z = (x.ln() - m) / s;
                Ok(mean * normal_cdf(z - s) + x * normal_sf(z))
            }
            Self::TruncatedNormal { .. } => self.expect_over(|s| s.min(x), f64::NEG_INFINITY, f64::INFINITY, &[x]),
        }
    }

    /// `E[(S - δ)⁺]`.
    pub fn mean_excess(&self, delta: f64) -> Result<f64> {
        match self {
            Self::Exponential { rate } => Ok((-rate * delta.max(0.0)).exp() / rate),
            _ => Ok((self.mean() - self.integrated_survival(delta)?).max(0.0)),
        }
    }

    /// `E[((S - δ)⁺)²]`.
    pub fn second_moment_excess(&self, delta: f64) -> Result<f64> {
        match self {
            Self::Exponential { rate } => Ok(2.0 * (-rate * delta.max(0.0)).exp() / (rate * rate)),
            _ => self.expect_over(|s| (s - delta).powi(2), delta, f64::INFINITY, &[]),
        }
    }
}

fn step(x: f64, at: f64) -> f64 {
    if x >= at {
        1.0
    } else {
        0.0
    }
}

fn density_weighted(h: &dyn Fn(f64) -> f64, density: f64, x: f64) -> f64 {
    if density == 0.0 {
        0.0
    } else {
        h(x) * density
    }
}

fn gamma_pdf(shape: f64, rate: f64, x: f64) -> f64 {
    if x == 0.0 {
        return if shape == 1.0 {
            rate
        } else if shape < 1.0 {
            f64::INFINITY
        } else {
            0.0
        };
    }
    ((shape - 1.0) * x.ln() + shape * rate.ln() - rate * x - ln_gamma(shape)).exp()
}

/// `E[min(S, x)]` for `S ~ Gamma(shape, rate)`.
fn gamma_truncated_mean(shape: f64, rate: f64, x: f64) -> f64 {
    let below = shape / rate * regularized_pair(shape + 1.0, rate * x).0;
    below + x * regularized_pair(shape, rate * x).1
}

fn pick<R: Rng + ?Sized>(weights: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(weights.len() - 1)
}

/// Stationary-excess cdf `G_e(t) = (1/E[S]) ∫₀ᵗ Ḡ(u) du`.
pub fn excess_cdf(spec: &DistSpec, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(domain(format!("excess cdf needs t >= 0, got {t}")));
    }
    let mean = spec.mean();
    if !(mean > 0.0) || !mean.is_finite() {
        return Err(domain("excess cdf needs a finite positive mean"));
    }
    Ok((spec.integrated_survival(t)? / mean).clamp(0.0, 1.0))
}

/// Which half of the Exp-minus-Erlang law a value came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum LawBranch {
    /// `z > 0`: a density value.
    Density,
    /// `z <= 0`: the printed `1 - ...` expression, which behaves as a
    /// cumulative value rather than a density.
    Cumulative,
}

fn check_rates(mu: f64, k: u32, lambda: f64) -> Result<()> {
    if !(mu > 0.0) || !(lambda > 0.0) || !mu.is_finite() || !lambda.is_finite() {
        return Err(domain(format!("rates must be positive, got mu={mu}, lambda={lambda}")));
    }
    if k == 0 {
        return Err(domain("erlang stage count must be at least 1"));
    }
    Ok(())
}

/// Law of `Z = X - Y`, `X ~ Exp(μ)`, `Y ~ Erlang(k, λ)`, as the two-branch
/// expression: density `μ ρᵏ e^{-μz}` for `z > 0` (with `ρ = λ/(λ+μ)`), and
/// `1 - μ ρᵏ e^{-λz} Σ_{j<k} ((λ+μ)z)ʲ/j!` for `z <= 0`.
///
/// The `z <= 0` expression is not a density and only agrees with
/// `P(Z <= z)` at isolated points (e.g. `z = 0` when `λ = μ`, `k = 1`); use
/// [`exp_minus_erlang_cdf`] for the actual distribution function.
pub fn exp_minus_erlang_law(mu: f64, k: u32, lambda: f64, z: f64) -> Result<(f64, LawBranch)> {
    check_rates(mu, k, lambda)?;
    let rho = lambda / (lambda + mu);
    let coef = mu * rho.powi(k as i32);
    if z > 0.0 {
        return Ok((coef * (-mu * z).exp(), LawBranch::Density));
    }
    let s = (lambda + mu) * z;
    let mut term = 1.0;
    let mut sum = 0.0;
    for j in 0..k {
        if j > 0 {
            term *= s / j as f64;
        }
        sum += term;
    }
    Ok((1.0 - coef * (-lambda * z).exp() * sum, LawBranch::Cumulative))
}

/// `P(Z <= z)` for `Z = X - Y`, `X ~ Exp(μ)`, `Y ~ Erlang(k, λ)`.
///
/// For `z <= 0`, with `w = -z` and `ρ = λ/(λ+μ)`:
/// `(1-ρ) e^{-λw} Σ_{j<k} ρʲ Σ_{i<=j} ((λ+μ)w)ⁱ/i!`; for `z > 0` it is
/// `1 - ρᵏ e^{-μz}`.
pub fn exp_minus_erlang_cdf(mu: f64, k: u32, lambda: f64, z: f64) -> Result<f64> {
    check_rates(mu, k, lambda)?;
    let rho = lambda / (lambda + mu);
    if z > 0.0 {
        return Ok(1.0 - rho.powi(k as i32) * (-mu * z).exp());
    }
    let w = -z;
    let s = (lambda + mu) * w;
    let mut inner = 0.0;
    let mut term = 1.0;
    let mut rho_j = 1.0;
    let mut total = 0.0;
    for j in 0..k {
        if j > 0 {
            term *= s / j as f64;
            rho_j *= rho;
        }
        inner += term;
        total += rho_j * inner;
    }
    Ok(((1.0 - rho) * (-lambda * w).exp() * total).clamp(0.0, 1.0))
}

/// `F^{(k)}(x)`: cdf of the sum of `k` i.i.d. draws from `spec`.
///
/// Closed forms for exponential, Erlang, gamma (shape `kα`), uniform
/// (scaled Irwin–Hall, `k <= 20`) and the deterministic variants; the
/// remaining laws use nested quadrature, accurate to 1e-8 but with cost
/// growing geometrically in `k`.
pub fn kfold_convolution_cdf(spec: &DistSpec, k: u32, x: f64) -> Result<f64> {
    if k == 0 {
        return Err(domain("convolution order must be at least 1"));
    }
    if x < 0.0 {
        return Ok(0.0);
    }
    let kf = k as f64;
    match spec {
        DistSpec::Exponential { rate } => gamma_p(kf, rate * x),
        DistSpec::Erlang { shape, rate } => gamma_p(kf * *shape as f64, rate * x),
        DistSpec::Gamma { shape, rate } => gamma_p(kf * shape, rate * x),
        DistSpec::Deterministic { value } => Ok(step(x, kf * value)),
        DistSpec::DeterministicMixture { weights, values } => Ok(mixture_kfold_cdf(weights, values, k, x)),
        DistSpec::Uniform { low, high } if k <= 20 => {
            let y = (x - kf * low) / (high - low);
            Ok(irwin_hall_cdf(k, y))
        }
        _ => nested_convolution_cdf(spec, k, x),
    }
}

fn nested_convolution_cdf(spec: &DistSpec, k: u32, x: f64) -> Result<f64> {
    if k == 1 {
        return Ok(spec.cdf(x));
    }
    let failure = std::cell::Cell::new(None::<Error>);
    let v = spec.expect_over(
        |s| match nested_convolution_cdf(spec, k - 1, x - s) {
            Ok(v) => v,
            Err(e) => {
                failure.set(Some(e));
                0.0
            }
        },
        f64::NEG_INFINITY,
        x,
        &[],
    )?;
    match failure.into_inner() {
        Some(e) => Err(e),
        None => Ok(v.clamp(0.0, 1.0)),
    }
}

fn irwin_hall_cdf(k: u32, y: f64) -> f64 {
    let kf = k as f64;
    if y <= 0.0 {
        return 0.0;
    }
    if y >= kf {
        return 1.0;
    }
    // Evaluate on the nearer side of the symmetric law.
    let (y, flip) = if y > 0.5 * kf { (kf - y, true) } else { (y, false) };
    let mut sum = 0.0;
    let mut binom = 1.0;
    for j in 0..=(y.floor() as u32) {
        if j > 0 {
            binom *= (k - j + 1) as f64 / j as f64;
        }
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * binom * (y - j as f64).powi(k as i32);
    }
    let v = (sum / (ln_factorial(k as u64)).exp()).clamp(0.0, 1.0);
    if flip {
        1.0 - v
    } else {
        v
    }
}

/// Enumerates multisets of branch counts summing to `k`.
fn mixture_kfold_cdf(weights: &[f64], values: &[f64], k: u32, x: f64) -> f64 {
    fn walk(weights: &[f64], values: &[f64], left: u32, sum: f64, log_coef: f64, x: f64, acc: &mut f64) {
        if weights.len() == 1 {
            let total = sum + left as f64 * values[0];
            if total <= x {
                let w = weights[0];
                let lw = if left == 0 { 0.0 } else if w == 0.0 { return } else { left as f64 * w.ln() };
                *acc += (log_coef - ln_factorial(left as u64) + lw).exp();
            }
            return;
        }
        for n in 0..=left {
            let w = weights[0];
            if n > 0 && w == 0.0 {
                break;
            }
            let lw = if n == 0 { 0.0 } else { n as f64 * w.ln() };
            walk(
                &weights[1..],
                &values[1..],
                left - n,
                sum + n as f64 * values[0],
                log_coef - ln_factorial(n as u64) + lw,
                x,
                acc,
            );
        }
    }
    let mut acc = 0.0;
    walk(weights, values, k, 0.0, ln_factorial(k as u64), x, &mut acc);
    acc.clamp(0.0, 1.0)
}

/// Regularized upper incomplete gamma, re-exported for callers that think in
/// terms of Erlang tails.
pub fn erlang_sf(k: u32, rate: f64, x: f64) -> Result<f64> {
    gamma_q(k as f64, rate * x.max(0.0))
}

impl fmt::Display for DistSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let pairs = |w: &[f64], v: &[f64]| w.iter().zip(v).map(|(a, b)| format!("{a}:{b}")).collect::<Vec<_>>().join(",");
        match self {
            Self::Exponential { rate } => write!(f, "exp({rate})"),
            Self::Erlang { shape, rate } => write!(f, "erlang({shape},{rate})"),
            Self::Gamma { shape, rate } => write!(f, "gamma({shape},{rate})"),
            Self::Deterministic { value } => write!(f, "det({value})"),
            Self::DeterministicMixture { weights, values } => write!(f, "detmix({})", pairs(weights, values)),
            Self::Uniform { low, high } => write!(f, "uniform({low},{high})"),
            Self::TruncatedNormal { low, high, location, scale } => write!(f, "tnorm({low},{high},{location},{scale})"),
            Self::LogNormal { mean, variance } => write!(f, "lognormal({mean},{variance})"),
            Self::HyperExponential { weights, rates } => write!(f, "hyperexp({})", pairs(weights, rates)),
        }
    }
}

/// Parses the compact form used on the command line, e.g. `exp(1)`,
/// `erlang(2,0.5)`, `uniform(0,10)`, `hyperexp(0.5:1,0.5:2)`.
impl FromStr for DistSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let open = s.find('(').ok_or_else(|| config(format!("expected name(args), got {s:?}")))?;
        if !s.ends_with(')') {
            return Err(config(format!("missing closing parenthesis in {s:?}")));
        }
        let name = s[..open].trim().to_ascii_lowercase();
        let body = &s[open + 1..s.len() - 1];
        let nums = || -> Result<Vec<f64>> {
            body.split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|_| config(format!("bad number {t:?} in {s:?}"))))
                .collect()
        };
        let pairs = || -> Result<(Vec<f64>, Vec<f64>)> {
            let mut a = Vec::new();
            let mut b = Vec::new();
            for item in body.split(',') {
                let (w, v) = item.split_once(':').ok_or_else(|| config(format!("expected weight:value, got {item:?}")))?;
                a.push(w.trim().parse::<f64>().map_err(|_| config(format!("bad weight {w:?}")))?);
                b.push(v.trim().parse::<f64>().map_err(|_| config(format!("bad value {v:?}")))?);
            }
            Ok((a, b))
        };
        let arity = |v: Vec<f64>, n: usize| -> Result<Vec<f64>> {
            if v.len() == n {
                Ok(v)
            } else {
                Err(config(format!("{name} takes {n} arguments, got {}", v.len())))
            }
        };
        let spec = match name.as_str() {
            "exp" | "exponential" => Self::Exponential { rate: arity(nums()?, 1)?[0] },
            "erlang" => {
                let v = arity(nums()?, 2)?;
                if v[0].fract() != 0.0 || v[0] < 1.0 || v[0] > u32::MAX as f64 {
                    return Err(config(format!("erlang shape must be a positive integer, got {}", v[0])));
                }
                Self::Erlang { shape: v[0] as u32, rate: v[1] }
            }
            "gamma" => {
                let v = arity(nums()?, 2)?;
                Self::Gamma { shape: v[0], rate: v[1] }
            }
            "det" | "deterministic" => Self::Deterministic { value: arity(nums()?, 1)?[0] },
            "detmix" => {
                let (weights, values) = pairs()?;
                Self::DeterministicMixture { weights, values }
            }
            "uniform" | "unif" => {
                let v = arity(nums()?, 2)?;
                Self::Uniform { low: v[0], high: v[1] }
            }
            "tnorm" | "truncnorm" => {
                let v = arity(nums()?, 4)?;
                Self::TruncatedNormal { low: v[0], high: v[1], location: v[2], scale: v[3] }
            }
            "lognormal" | "lnorm" => {
                let v = arity(nums()?, 2)?;
                Self::LogNormal { mean: v[0], variance: v[1] }
            }
            "hyperexp" | "hyper" => {
                let (weights, rates) = pairs()?;
                Self::HyperExponential { weights, rates }
            }
            _ => return Err(config(format!("unknown distribution {name:?}"))),
        };
        spec.validate()?;
        Ok(spec)
    }
}
