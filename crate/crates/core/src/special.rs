//! Incomplete gamma functions and a few log-space helpers.
//!
//! The regularized pair `P(a,x)`, `Q(a,x)` is computed by the power series
//! when `x < a + 1` and by a modified-Lentz continued fraction otherwise; the
//! other member of the pair is the complement. Raw (unregularized) values are
//! the regularized ones times `Γ(a)`.

use crate::error::{domain, Result};
use statrs::function::{erf, gamma};

const EPS: f64 = 1e-16;
const MAX_ITER: usize = 100_000;
const TINY: f64 = 1e-300;

pub fn ln_gamma(a: f64) -> f64 {
    gamma::ln_gamma(a)
}

pub fn gamma_fn(a: f64) -> f64 {
    gamma::gamma(a)
}

/// `ln k!`
pub fn ln_factorial(k: u64) -> f64 {
    ln_gamma(k as f64 + 1.0)
}

/// Arguments to the incomplete gamma functions.
///
/// With a scale `c` the functions evaluate the scaled integrals
/// `∫₀ˣ t^{a-1} e^{-ct} dt = γ(a, cx)/cᵃ` and
/// `∫ₓ^∞ t^{a-1} e^{-ct} dt = Γ(a, cx)/cᵃ`; the regularized forms are
/// unaffected by the scale prefactor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaArgs {
    pub a: f64,
    pub x: f64,
    pub c: f64,
}

impl GammaArgs {
    pub fn new(a: f64, x: f64) -> Result<Self> {
        Self::scaled(a, x, 1.0)
    }

    pub fn scaled(a: f64, x: f64, c: f64) -> Result<Self> {
        if !(a > 0.0) || !a.is_finite() {
            return Err(domain(format!("incomplete gamma needs a > 0, got {a}")));
        }
        if !(x >= 0.0) {
            return Err(domain(format!("incomplete gamma needs x >= 0, got {x}")));
        }
        if !(c > 0.0) || !c.is_finite() {
            return Err(domain(format!("incomplete gamma scale must be positive, got {c}")));
        }
        Ok(Self { a, x, c })
    }

    fn arg(&self) -> f64 {
        self.c * self.x
    }

    fn prefactor(&self) -> f64 {
        if self.c == 1.0 {
            1.0
        } else {
            (-self.a * self.c.ln()).exp()
        }
    }

    /// `(P, Q)` at the transformed argument `c·x`.
    pub fn regularized(&self) -> (f64, f64) {
        regularized_pair(self.a, self.arg())
    }

    pub fn lower(&self) -> f64 {
        self.regularized().0 * gamma_fn(self.a) * self.prefactor()
    }

    pub fn upper(&self) -> f64 {
        self.regularized().1 * gamma_fn(self.a) * self.prefactor()
    }
}

/// `γ(a, x) = ∫₀ˣ t^{a-1} e^{-t} dt`
pub fn lower_incomplete_gamma(a: f64, x: f64) -> Result<f64> {
    Ok(GammaArgs::new(a, x)?.lower())
}

/// `Γ(a, x) = ∫ₓ^∞ t^{a-1} e^{-t} dt`
pub fn upper_incomplete_gamma(a: f64, x: f64) -> Result<f64> {
    Ok(GammaArgs::new(a, x)?.upper())
}

/// `P(a, x) = γ(a, x)/Γ(a)`
pub fn gamma_p(a: f64, x: f64) -> Result<f64> {
    Ok(GammaArgs::new(a, x)?.regularized().0)
}

/// `Q(a, x) = Γ(a, x)/Γ(a)`
pub fn gamma_q(a: f64, x: f64) -> Result<f64> {
    Ok(GammaArgs::new(a, x)?.regularized().1)
}

/// Regularized `(P, Q)`; callers have validated `a > 0`, `x >= 0`.
pub(crate) fn regularized_pair(a: f64, x: f64) -> (f64, f64) {
    if x == 0.0 {
        return (0.0, 1.0);
    }
    if x == f64::INFINITY {
        return (1.0, 0.0);
    }
    // log of x^a e^{-x} / Γ(a)
    let log_front = a * x.ln() - x - ln_gamma(a);
    if x < a + 1.0 {
        let p = (log_front.exp() * lower_series(a, x)).min(1.0);
        (p, 1.0 - p)
    } else {
        let q = (log_front.exp() * upper_continued_fraction(a, x)).min(1.0);
        (1.0 - q, q)
    }
}

/// `Σ xⁿ / (a (a+1) ... (a+n))`
fn lower_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut denom = a;
    for _ in 0..MAX_ITER {
        denom += 1.0;
        term *= x / denom;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            break;
        }
    }
    sum
}

/// Continued fraction `1/(x+1-a- 1(1-a)/(x+3-a- 2(2-a)/(x+5-a- ...)))`.
fn upper_continued_fraction(a: f64, x: f64) -> f64 {
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..MAX_ITER {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Poisson pmf `e^{-m} m^k / k!`, evaluated in log space.
pub fn poisson_pmf(k: u64, mean: f64) -> f64 {
    if mean <= 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    (k as f64 * mean.ln() - mean - ln_factorial(k)).exp()
}

/// Chernoff bound on `P(Poisson(m) > k)`; 1 when `k + 1 <= m`.
pub fn poisson_tail_bound(k: u64, mean: f64) -> f64 {
    let n = k as f64 + 1.0;
    if mean <= 0.0 {
        return 0.0;
    }
    if n <= mean {
        return 1.0;
    }
    (-mean + n * (1.0 + mean.ln() - n.ln())).exp().min(1.0)
}

/// Standard normal cdf.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * erf::erfc(-z / std::f64::consts::SQRT_2)
}

/// Standard normal survival `1 - Φ(z)`, accurate in the upper tail.
pub fn normal_sf(z: f64) -> f64 {
    0.5 * erf::erfc(z / std::f64::consts::SQRT_2)
}

/// Inverse of the standard normal cdf.
pub fn normal_quantile(p: f64) -> f64 {
    -std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * p)
}

pub fn normal_pdf(z: f64) -> f64 {
    (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt()
}
