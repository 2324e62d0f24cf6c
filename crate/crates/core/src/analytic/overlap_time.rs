//! Overlap time between customers `n` and `n+k`, and mean queue length.

use super::{MMParams, RateProfile, TailCurve};
use crate::dists::{kfold_convolution_cdf, DistSpec};
use crate::error::{domain, Result};
use crate::special::gamma_p;

fn check_lag(k: u32) -> Result<()> {
    if k == 0 {
        Err(domain("customer lag k must be at least 1"))
    } else {
        Ok(())
    }
}

fn check_t(t: f64) -> Result<()> {
    if t >= 0.0 {
        Ok(())
    } else {
        Err(domain(format!("t must be nonnegative, got {t}")))
    }
}

/// Steady-state `P(O_k > t) = (λ/(λ+μ))ᵏ e^{-2μt}` in M/M/∞.
pub fn overlap_tail_mm(p: MMParams, k: u32, t: f64) -> Result<f64> {
    check_lag(k)?;
    check_t(t)?;
    Ok(p.rho().powi(k as i32) * (-2.0 * p.mu * t).exp())
}

/// `P(O_k = 0) = 1 - (λ/(λ+μ))ᵏ` in M/M/∞.
pub fn overlap_atom_mm(p: MMParams, k: u32) -> Result<f64> {
    check_lag(k)?;
    Ok(1.0 - p.rho().powi(k as i32))
}

pub fn overlap_tail_curve_mm(p: MMParams, k: u32, grid: &[f64]) -> Result<TailCurve> {
    TailCurve::tabulate(grid, overlap_atom_mm(p, k)?, |t| overlap_tail_mm(p, k, t))
}

/// Steady-state `P(O_k > t) = F^{(k)}((Δ - t)⁺)` in GI/D/∞, where `F` is
/// the inter-arrival cdf.
pub fn overlap_tail_gid(interarrival: &DistSpec, k: u32, delta: f64, t: f64) -> Result<f64> {
    check_lag(k)?;
    check_t(t)?;
    if !(delta > 0.0) {
        return Err(domain(format!("deterministic service must be positive, got {delta}")));
    }
    if t >= delta {
        return Ok(0.0);
    }
    kfold_convolution_cdf(interarrival, k, delta - t)
}

/// Gamma(α, λ)/D/∞ case: `γ(kα, λ(Δ-t)⁺)/Γ(kα)`.
pub fn overlap_tail_gamma_d(shape: f64, rate: f64, k: u32, delta: f64, t: f64) -> Result<f64> {
    check_lag(k)?;
    check_t(t)?;
    gamma_p(k as f64 * shape, rate * (delta - t).max(0.0))
}

pub fn overlap_tail_curve_gid(interarrival: &DistSpec, k: u32, delta: f64, grid: &[f64]) -> Result<TailCurve> {
    let positive = overlap_tail_gid(interarrival, k, delta, 0.0)?;
    TailCurve::tabulate(grid, 1.0 - positive, |t| overlap_tail_gid(interarrival, k, delta, t))
}

/// Solution of `q' = λ - μq`, `q(0) = q0`.
pub fn qinf_mm(p: MMParams, q0: f64, t: f64) -> Result<f64> {
    check_t(t)?;
    if !(q0 >= 0.0) {
        return Err(domain(format!("initial queue length must be nonnegative, got {q0}")));
    }
    let decay = (-p.mu * t).exp();
    Ok(q0 * decay + p.lambda / p.mu * (1.0 - decay))
}

/// `q∞(t) = ∫₀ᵗ Ḡ(t-u) λ(u) du` for a system empty at time 0.
///
/// Each constant piece contributes `λᵢ ∫ Ḡ`, evaluated through
/// [`DistSpec::integrated_survival`].
pub fn qinf_general(rate: &RateProfile, service: &DistSpec, t: f64) -> Result<f64> {
    rate.check_time(t)?;
    let mut total = 0.0;
    for (i, &start) in rate.breakpoints.iter().enumerate() {
        if start >= t {
            break;
        }
        let end = rate.breakpoints.get(i + 1).copied().unwrap_or(f64::INFINITY).min(t);
        let r = rate.rates[i];
        if r > 0.0 {
            // ∫_start^end Ḡ(t-u) du = I(t - start) - I(t - end)
            total += r * (service.integrated_survival(t - start)? - service.integrated_survival(t - end)?);
        }
    }
    Ok(total)
}
