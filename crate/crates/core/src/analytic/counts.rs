//! Number of customers a tagged arrival overlaps with.
//!
//! The count splits into the queue found on arrival, Poisson with mean
//! `q∞(t)`, and the arrivals during the tagged service, Poisson with the
//! random mean `Λ(t, t+S)`. With a constant rate the second part alone is
//! the "during service" law, which has closed forms for several service
//! distributions.

use super::{log_service_moment, mixed_poisson_tail_bound, qinf_general, MMParams, Pmf, RateProfile};
use crate::dists::DistSpec;
use crate::error::{config, domain, Result};
use crate::quad::Quadrature;
use crate::special::{ln_factorial, ln_gamma, normal_pdf, poisson_pmf, poisson_tail_bound, regularized_pair};
use serde::{Deserialize, Serialize};

fn check_rate(lambda: f64) -> Result<()> {
    if lambda > 0.0 && lambda.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("arrival rate must be positive, got {lambda}")))
    }
}

fn geometric(rho: f64, k: u64) -> f64 {
    (1.0 - rho) * rho.powf(k as f64)
}

/// `P(N(t+S) - N(t) = k)` for a constant rate `λ`, using the closed form
/// for the service law where one exists:
///
/// * exponential: geometric `(1-ρ)ρᵏ`, `ρ = λ/(λ+μ)`
/// * Erlang / gamma: negative binomial `C(k+α-1, k)(1-ρ)^α ρᵏ`
/// * uniform: `[γ(k+1, λb) - γ(k+1, λa)] / (λ(b-a) k!)`
/// * hyper-exponential: mixed geometric `Σ pⱼ(1-ρⱼ)ρⱼᵏ`
/// * deterministic (mixture): Poisson (mixture)
/// * truncated normal: change-of-measure integral
/// * lognormal: `(λᵏ/k!) E[Sᵏ e^{-λS}]` by quadrature
pub fn during_service_pmf(lambda: f64, service: &DistSpec, k: u64) -> Result<f64> {
    check_rate(lambda)?;
    match service {
        DistSpec::Exponential { rate } => Ok(geometric(lambda / (lambda + rate), k)),
        DistSpec::Erlang { shape, rate } => Ok(negative_binomial(*shape as f64, lambda / (lambda + rate), k)),
        DistSpec::Gamma { shape, rate } => Ok(negative_binomial(*shape, lambda / (lambda + rate), k)),
        DistSpec::Uniform { low, high } => Ok(uniform_window(lambda, *low, *high, k)),
        DistSpec::HyperExponential { weights, rates } => {
            Ok(weights.iter().zip(rates).map(|(p, mu)| p * geometric(lambda / (lambda + mu), k)).sum())
        }
        DistSpec::Deterministic { value } => Ok(poisson_pmf(k, lambda * value)),
        DistSpec::DeterministicMixture { weights, values } => {
            Ok(weights.iter().zip(values).map(|(p, v)| p * poisson_pmf(k, lambda * v)).sum())
        }
        DistSpec::TruncatedNormal { low, high, location, scale } => {
            truncated_normal_window(lambda, *low, *high, *location, *scale, k)
        }
        DistSpec::LogNormal { .. } => during_service_pmf_laplace(lambda, service, k),
    }
}

/// The general form `(λᵏ/k!) E[Sᵏ e^{-λS}]`, by quadrature for every
/// service law (used to cross-check the closed forms).
pub fn during_service_pmf_laplace(lambda: f64, service: &DistSpec, k: u64) -> Result<f64> {
    check_rate(lambda)?;
    // The integrand peaks sharply near λx = k once k is large.
    let h = |x: f64| poisson_pmf(k, lambda * x);
    service.expect_over_with(&Quadrature::relative(), h, f64::NEG_INFINITY, f64::INFINITY, &[k as f64 / lambda])
}

fn negative_binomial(shape: f64, rho: f64, k: u64) -> f64 {
    let kf = k as f64;
    (ln_gamma(kf + shape) - ln_gamma(shape) - ln_factorial(k) + shape * (1.0 - rho).ln() + kf * rho.ln()).exp()
}

fn uniform_window(lambda: f64, a: f64, b: f64, k: u64) -> f64 {
    let shape = k as f64 + 1.0;
    let (pa, qa) = regularized_pair(shape, lambda * a);
    let (pb, qb) = regularized_pair(shape, lambda * b);
    // γ(k+1, x)/k! = P(k+1, x); take the difference on the better side.
    let diff = if pa > 0.5 { qa - qb } else { pb - pa };
    (diff / (lambda * (b - a))).max(0.0)
}

/// Truncated normal service on `[a, b]` with location `m`, scale `σ`.
///
/// Completing the square, `e^{-λx} e^{-(x-m)²/2σ²} =
/// e^{λ²σ²/2 - λm} e^{-(x-m')²/2σ²}` with `m' = m - λσ²`, so the pmf is
/// `(λᵏ/k!) e^{λ²σ²/2-λm} / Z · ∫_a^b xᵏ φ((x-m')/σ)/σ dx`, a truncated
/// moment of the shifted normal. Evaluated in log space because the
/// prefactor and the shifted mass can each over- or underflow.
fn truncated_normal_window(lambda: f64, a: f64, b: f64, m: f64, sigma: f64, k: u64) -> Result<f64> {
    let kf = k as f64;
    let shifted = m - lambda * sigma * sigma;
    let (alpha, beta) = ((a - m) / sigma, (b - m) / sigma);
    let z = if alpha > 0.0 {
        crate::special::normal_sf(alpha) - crate::special::normal_sf(beta)
    } else {
        crate::special::normal_cdf(beta) - crate::special::normal_cdf(alpha)
    };
    if !(z > 0.0) {
        return Err(config("truncated normal interval carries no mass"));
    }
    let log_front = if k == 0 { 0.0 } else { kf * lambda.ln() } - ln_factorial(k) + 0.5 * (lambda * sigma).powi(2)
        - lambda * m
        - z.ln()
        - sigma.ln()
        - (2.0 * std::f64::consts::PI).sqrt().ln();
    let integrand = |x: f64| {
        let log_xk = if k == 0 { 0.0 } else if x <= 0.0 { return 0.0 } else { kf * x.ln() };
        (log_front + log_xk - 0.5 * ((x - shifted) / sigma).powi(2)).exp()
    };
    // Mode of xᵏ φ((x-m')/σ): root of x² - m'x - kσ² = 0.
    let mode = 0.5 * (shifted + (shifted * shifted + 4.0 * kf * sigma * sigma).sqrt());
    let span = 38.0 * sigma;
    let lo = a.max(mode - span).max(a);
    let hi = b.min(mode + span).max(lo);
    let _ = normal_pdf; // φ appears inline above
    Quadrature::default().integrate_with(integrand, lo, hi, &[mode.clamp(lo, hi)])
}

/// Truncated during-service law for a constant rate.
pub fn during_service_dist(lambda: f64, service: &DistSpec) -> Result<Pmf> {
    check_rate(lambda)?;
    service.validate()?;
    let mean = lambda * service.mean();
    let start = mean.ceil() as u64;
    match service {
        DistSpec::Exponential { rate } => {
            let rho = lambda / (lambda + rate);
            Pmf::build(|k| during_service_pmf(lambda, service, k), |k| rho.powf(k as f64 + 1.0), start)
        }
        DistSpec::HyperExponential { weights, rates } => Pmf::build(
            |k| during_service_pmf(lambda, service, k),
            |k| weights.iter().zip(rates).map(|(p, mu)| p * (lambda / (lambda + mu)).powf(k as f64 + 1.0)).sum(),
            start,
        ),
        DistSpec::Deterministic { value } => Pmf::build(
            |k| during_service_pmf(lambda, service, k),
            |k| poisson_tail_bound(k, lambda * value),
            start,
        ),
        _ => Pmf::build(
            |k| during_service_pmf(lambda, service, k),
            |k| mixed_poisson_tail_bound(k, |r| r as f64 * lambda.ln() + log_service_moment(service, r)),
            start,
        ),
    }
}

/// `P(O(t) = k) = ∫ e^{-(Λ(t,s)+q∞(t))} (Λ(t,s)+q∞(t))ᵏ/k! dG(s)` for a
/// system that is empty at time 0.
pub fn total_overlap_pmf_transient(rate: &RateProfile, service: &DistSpec, t: f64, k: u64) -> Result<f64> {
    rate.check_time(t)?;
    let q = qinf_general(rate, service, t)?;
    transient_mixture(rate, service, t, q, k)
}

fn transient_mixture(rate: &RateProfile, service: &DistSpec, t: f64, q: f64, k: u64) -> Result<f64> {
    let kinks: Vec<f64> = rate.breakpoints.iter().filter(|&&b| b > t).map(|&b| b - t).collect();
    let h = |s: f64| poisson_pmf(k, rate.integral(t, t + s) + q);
    service.expect_over_with(&Quadrature::relative(), h, f64::NEG_INFINITY, f64::INFINITY, &kinks)
}

pub fn total_overlap_dist_transient(rate: &RateProfile, service: &DistSpec, t: f64) -> Result<Pmf> {
    rate.check_time(t)?;
    service.validate()?;
    let q = qinf_general(rate, service, t)?;
    let lmax = rate.max_rate().max(f64::MIN_POSITIVE);
    let start = (q + lmax * service.mean()).ceil() as u64;
    // Λ(t,S) + q <= λmax·S + q, and (x + y)ʳ <= 2^{r-1}(xʳ + yʳ).
    let log_moment = |r: u32| {
        let a = r as f64 * lmax.ln() + log_service_moment(service, r);
        let b = if q > 0.0 { r as f64 * q.ln() } else { f64::NEG_INFINITY };
        let hi = a.max(b);
        (r as f64 - 1.0) * std::f64::consts::LN_2 + hi + ((a - hi).exp() + (b - hi).exp()).ln()
    };
    Pmf::build(|k| transient_mixture(rate, service, t, q, k), |k| mixed_poisson_tail_bound(k, log_moment), start)
}

/// `P(Geometric(ρ) + Poisson(q) = k)` in the incomplete-gamma form
/// `ρᵏ(1-ρ) e^{(μ/λ)q} Γ(k+1, q/ρ)/Γ(k+1)`, where `μ/λ = (1-ρ)/ρ`.
pub fn geometric_poisson_pmf(rho: f64, q: f64, k: u64) -> f64 {
    let (_, upper) = regularized_pair(k as f64 + 1.0, q / rho);
    if upper == 0.0 {
        return 0.0;
    }
    (k as f64 * rho.ln() + (1.0 - rho).ln() + (1.0 - rho) / rho * q + upper.ln()).exp()
}

/// The same law as a direct convolution sum.
pub fn geometric_poisson_convolution(rho: f64, q: f64, k: u64) -> f64 {
    (0..=k).map(|j| geometric(rho, j) * poisson_pmf(k - j, q)).sum()
}

fn mm_q(p: MMParams, t: f64) -> Result<f64> {
    if !(t >= 0.0) {
        return Err(domain(format!("t must be nonnegative, got {t}")));
    }
    Ok(p.lambda / p.mu * -(-p.mu * t).exp_m1())
}

/// M/M/∞ transient law of `O(t)`, incomplete-gamma form.
pub fn total_overlap_pmf_mm(p: MMParams, t: f64, k: u64) -> Result<f64> {
    Ok(geometric_poisson_pmf(p.rho(), mm_q(p, t)?, k))
}

/// M/M/∞ transient law of `O(t)`, as Geometric(ρ) ⊛ Poisson(q∞(t)).
pub fn total_overlap_pmf_mm_convolution(p: MMParams, t: f64, k: u64) -> Result<f64> {
    Ok(geometric_poisson_convolution(p.rho(), mm_q(p, t)?, k))
}

fn geometric_poisson_bound(rhos: &[(f64, f64)], q: f64, k: u64) -> f64 {
    // P(G + P > K) <= P(G > K/2) + P(P > K/2)
    let half = k / 2;
    let geo: f64 = rhos.iter().map(|(w, rho)| w * rho.powf(half as f64 + 1.0)).sum();
    geo + poisson_tail_bound(k - half - 1, q)
}

pub fn total_overlap_dist_mm(p: MMParams, t: f64) -> Result<Pmf> {
    let q = mm_q(p, t)?;
    let rho = p.rho();
    let start = (2.0 * (q + p.lambda / p.mu)).ceil() as u64 + 2;
    Pmf::build(|k| Ok(geometric_poisson_pmf(rho, q, k)), |k| geometric_poisson_bound(&[(1.0, rho)], q, k), start)
}

/// Which variance expression [`total_overlap_mean_var_mm`] returns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceForm {
    /// `λ²/μ² + (λ/μ)(2 - e^{-μt})`: variance of Geometric(ρ) plus
    /// independent Poisson(q∞(t)).
    #[default]
    Decomposition,
    /// `λ²/μ² + (λ/μ)(1 - e^{-μt})`, kept for comparison only.
    Printed,
}

/// Mean `(λ/μ)(2 - e^{-μt})` and variance of `O(t)` in M/M/∞.
pub fn total_overlap_mean_var_mm(p: MMParams, t: f64, form: VarianceForm) -> Result<(f64, f64)> {
    if !(t >= 0.0) {
        return Err(domain(format!("t must be nonnegative, got {t}")));
    }
    let ratio = p.lambda / p.mu;
    let decay = (-p.mu * t).exp();
    let mean = ratio * (2.0 - decay);
    let variance = match form {
        VarianceForm::Decomposition => ratio * ratio + ratio * (2.0 - decay),
        VarianceForm::Printed => ratio * ratio + ratio * (1.0 - decay),
    };
    Ok((mean, variance))
}

fn check_hyper(weights: &[f64], rates: &[f64]) -> Result<()> {
    DistSpec::HyperExponential { weights: weights.to_vec(), rates: rates.to_vec() }.validate()
}

/// Mean queue length of M/H_ℓ/∞ started empty: `Σ pⱼ (λ/μⱼ)(1 - e^{-μⱼt})`.
pub fn qinf_mh(weights: &[f64], rates: &[f64], lambda: f64, t: f64) -> f64 {
    weights.iter().zip(rates).map(|(p, mu)| p * lambda / mu * -(-mu * t).exp_m1()).sum()
}

/// M/H_ℓ/∞ law of `O(t)` by conditioning on the tagged customer's branch:
/// `Σ pⱼ [Geometric(ρⱼ) ⊛ Poisson(q∞(t))](k)`, with `q∞` the mean queue
/// length of the whole hyper-exponential system.
pub fn total_overlap_pmf_mh(weights: &[f64], rates: &[f64], lambda: f64, t: f64, k: u64) -> Result<f64> {
    check_rate(lambda)?;
    check_hyper(weights, rates)?;
    if !(t >= 0.0) {
        return Err(domain(format!("t must be nonnegative, got {t}")));
    }
    let q = qinf_mh(weights, rates, lambda, t);
    Ok(weights.iter().zip(rates).map(|(p, mu)| p * geometric_poisson_pmf(lambda / (lambda + mu), q, k)).sum())
}

pub fn total_overlap_dist_mh(weights: &[f64], rates: &[f64], lambda: f64, t: f64) -> Result<Pmf> {
    check_rate(lambda)?;
    check_hyper(weights, rates)?;
    let q = qinf_mh(weights, rates, lambda, t);
    let rhos: Vec<(f64, f64)> = weights.iter().zip(rates).map(|(p, mu)| (*p, lambda / (lambda + mu))).collect();
    let mean: f64 = q + weights.iter().zip(rates).map(|(p, mu)| p * lambda / mu).sum::<f64>();
    Pmf::build(
        |k| total_overlap_pmf_mh(weights, rates, lambda, t, k),
        |k| geometric_poisson_bound(&rhos, q, k),
        (2.0 * mean).ceil() as u64 + 2,
    )
}

/// Both mean expressions for M/H_ℓ/∞.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MhMeans {
    /// `Σ pⱼ λ/μⱼ + q∞(t)`: mean of the conditioning law.
    pub conditioning: f64,
    /// `Σ pⱼ (λ/μⱼ)(2 - e^{-μⱼt})`, the per-branch expression.
    pub per_branch: f64,
}

pub fn total_overlap_mean_mh(weights: &[f64], rates: &[f64], lambda: f64, t: f64) -> Result<MhMeans> {
    check_rate(lambda)?;
    check_hyper(weights, rates)?;
    let during: f64 = weights.iter().zip(rates).map(|(p, mu)| p * lambda / mu).sum();
    let per_branch = weights.iter().zip(rates).map(|(p, mu)| p * lambda / mu * (2.0 - (-mu * t).exp())).sum();
    Ok(MhMeans { conditioning: during + qinf_mh(weights, rates, lambda, t), per_branch })
}

/// `∫_{(t-Δ)⁺}^{t+Δ} λ(u) du`: the Poisson mean of `O(t)` in M_t/D/∞.
pub fn deterministic_window_mean(rate: &RateProfile, delta: f64, t: f64) -> Result<f64> {
    rate.check_time(t)?;
    if !(delta > 0.0) {
        return Err(domain(format!("deterministic service must be positive, got {delta}")));
    }
    Ok(rate.integral((t - delta).max(0.0), t + delta))
}

/// M_t/D/∞: `O(t)` is Poisson with mean [`deterministic_window_mean`].
pub fn total_overlap_pmf_mtd(rate: &RateProfile, delta: f64, t: f64, k: u64) -> Result<f64> {
    Ok(poisson_pmf(k, deterministic_window_mean(rate, delta, t)?))
}

/// Poisson law with mean `Σ pⱼ ∫_{(t-Δⱼ)⁺}^{t+Δⱼ} λ(u) du`, the printed
/// form for a deterministic-mixture service. Its mean is exact, but the
/// law itself is a Poisson mixture over the tagged customer's own branch
/// (see [`total_overlap_pmf_transient`]), so the two differ unless `ℓ = 1`.
pub fn total_overlap_pmf_mtd_mixture_poisson(
    rate: &RateProfile,
    weights: &[f64],
    values: &[f64],
    t: f64,
    k: u64,
) -> Result<f64> {
    DistSpec::DeterministicMixture { weights: weights.to_vec(), values: values.to_vec() }.validate()?;
    rate.check_time(t)?;
    let mean = weights.iter().zip(values).map(|(p, d)| p * rate.integral((t - d).max(0.0), t + d)).sum();
    Ok(poisson_pmf(k, mean))
}
