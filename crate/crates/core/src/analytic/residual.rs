//! Residual overlap counts: overlaps lasting at least `δ`.
//!
//! `O(t, δ)` splits into arrivals during `(t, t + (S-δ)⁺]` whose own
//! service is at least `δ`, plus the customers present at `t` with at least
//! `δ` of service left, counted only when the tagged `S >= δ`.

use super::{during_service_pmf, log_service_moment, mixed_poisson_tail_bound, Pmf};
use crate::dists::DistSpec;
use crate::error::{domain, Result};
use crate::quad::Quadrature;
use crate::special::poisson_pmf;
use serde::Serialize;

fn check_delta(delta: f64) -> Result<()> {
    if delta >= 0.0 && delta.is_finite() {
        Ok(())
    } else {
        Err(domain(format!("δ must be nonnegative and finite, got {delta}")))
    }
}

/// `P(S >= δ)`. Differs from `sf` only at atoms of discrete laws.
pub fn survival_at_least(service: &DistSpec, delta: f64) -> f64 {
    match service {
        DistSpec::Deterministic { value } => {
            if *value >= delta {
                1.0
            } else {
                0.0
            }
        }
        DistSpec::DeterministicMixture { weights, values } => {
            weights.iter().zip(values).filter(|(_, v)| **v >= delta).map(|(p, _)| p).sum()
        }
        _ => service.sf(delta),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ResidualMoments {
    pub mean: f64,
    /// The four-term expression that treats the during-service part and the
    /// indicator-scaled queue part as uncorrelated.
    pub variance: f64,
    /// `variance` plus `2 Cov`, where `Cov = λ E[(S-δ)⁺] Ḡ(δ) G(δ) q` and
    /// `q = λ ∫₀ᵗ Ḡ(t+δ-u) du`. Both parts are driven by the same `S`.
    pub variance_exact: f64,
}

/// Mean and variance of `O(t, δ)` with a constant arrival rate and a
/// system empty at time 0. `t = ∞` gives the stationary values.
pub fn residual_mean_var(lambda: f64, service: &DistSpec, t: f64, delta: f64) -> Result<ResidualMoments> {
    check_delta(delta)?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(domain(format!("arrival rate must be positive, got {lambda}")));
    }
    if !(t >= 0.0) {
        return Err(domain(format!("t must be nonnegative, got {t}")));
    }
    service.validate()?;
    let survive = survival_at_least(service, delta);
    let fail = 1.0 - survive;
    let e1 = service.mean_excess(delta)?;
    let var_x = (service.second_moment_excess(delta)? - e1 * e1).max(0.0);
    let q = lambda * (service.integrated_survival(t + delta)? - service.integrated_survival(delta)?);

    let mean = lambda * e1 * survive + survive * q;
    let variance = (lambda * lambda * var_x + lambda * e1) * survive * survive
        + survive * fail * lambda * e1
        + q * (survive * fail + survive * survive)
        + survive * fail * q * q;
    let cov = lambda * e1 * survive * fail * q;
    Ok(ResidualMoments { mean, variance, variance_exact: variance + 2.0 * cov })
}

/// `P(N((S-δ)⁺) = k)`: Poisson arrivals during the part of service beyond `δ`.
pub fn residual_during_pmf(lambda: f64, service: &DistSpec, delta: f64, k: u64) -> Result<f64> {
    check_delta(delta)?;
    if delta == 0.0 {
        return during_service_pmf(lambda, service, k);
    }
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(domain(format!("arrival rate must be positive, got {lambda}")));
    }
    if let DistSpec::Exponential { rate } = service {
        let rho = lambda / (lambda + rate);
        let decay = (-rate * delta).exp();
        return Ok(if k == 0 { 1.0 - rho * decay } else { (1.0 - rho) * rho.powf(k as f64) * decay });
    }
    let h = |s: f64| poisson_pmf(k, lambda * (s - delta));
    let beyond = service.expect_over_with(&Quadrature::relative(), h, delta, f64::INFINITY, &[delta + k as f64 / lambda])?;
    Ok(if k == 0 { service.cdf(delta) + beyond } else { beyond })
}

pub fn residual_during_dist(lambda: f64, service: &DistSpec, delta: f64) -> Result<Pmf> {
    check_delta(delta)?;
    service.validate()?;
    let start = (lambda * service.mean()).ceil() as u64;
    if let DistSpec::Exponential { rate } = service {
        let rho = lambda / (lambda + rate);
        let decay = (-rate * delta).exp();
        return Pmf::build(|k| residual_during_pmf(lambda, service, delta, k), |k| decay * rho.powf(k as f64 + 1.0), start);
    }
    // (S-δ)⁺ <= S, so the moments of λS bound those of the Poisson mean.
    Pmf::build(
        |k| residual_during_pmf(lambda, service, delta, k),
        |k| mixed_poisson_tail_bound(k, |r| r as f64 * lambda.ln() + log_service_moment(service, r)),
        start,
    )
}

struct ZParams {
    rho: f64,
    decay: f64,
    survive: f64,
    fail: f64,
}

fn z_params(lambda: f64, mu: f64, cohort: &DistSpec, delta: f64) -> Result<ZParams> {
    check_delta(delta)?;
    if !(lambda > 0.0 && lambda.is_finite() && mu > 0.0 && mu.is_finite()) {
        return Err(domain(format!("rates must be positive, got lambda={lambda}, mu={mu}")));
    }
    cohort.validate()?;
    let survive = survival_at_least(cohort, delta);
    Ok(ZParams { rho: lambda / (lambda + mu), decay: (-mu * delta).exp(), survive, fail: 1.0 - survive })
}

/// `P(Z(t, δ) = k)` for an Exp(μ) tagged service and cohort services `G`:
/// `(Ḡρ)ᵏ (1-ρ) e^{-μδ} / (1-ρG)^{k+1}` for `k >= 1`.
///
/// At `k = 0` this returns the complement of the `k >= 1` mass,
/// `1 - e^{-μδ} + (1-ρ)e^{-μδ}/(1-ρG)`, which adds the event `S <= δ`
/// (no window at all) to the zero count.
pub fn residual_z_pmf(lambda: f64, mu: f64, cohort: &DistSpec, delta: f64, k: u64) -> Result<f64> {
    let ZParams { rho, decay, survive, fail } = z_params(lambda, mu, cohort, delta)?;
    let denom = 1.0 - rho * fail;
    if k == 0 {
        return Ok(1.0 - decay + (1.0 - rho) * decay / denom);
    }
    let ratio = survive * rho / denom;
    Ok(ratio.powf(k as f64) * (1.0 - rho) * decay / denom)
}

pub fn residual_z_dist(lambda: f64, mu: f64, cohort: &DistSpec, delta: f64) -> Result<Pmf> {
    let ZParams { rho, decay, survive, fail } = z_params(lambda, mu, cohort, delta)?;
    let denom = 1.0 - rho * fail;
    let ratio = survive * rho / denom;
    let front = (1.0 - rho) * decay / denom;
    Pmf::build(
        |k| residual_z_pmf(lambda, mu, cohort, delta, k),
        |k| if ratio == 0.0 { 0.0 } else { front * ratio.powf(k as f64 + 1.0) / (1.0 - ratio) },
        0,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{total_overlap_mean_var_mm, MMParams, VarianceForm};
    use approx::assert_relative_eq;

    #[test]
    fn residual_mean_examples() {
        let exp = DistSpec::exponential(1.0);
        let m = residual_mean_var(10.0, &exp, f64::INFINITY, 0.5).unwrap();
        assert_relative_eq!(m.mean, 20.0 * (-1.0f64).exp(), max_relative = 1e-12);
        assert_relative_eq!(m.mean, 7.3576, epsilon = 1e-4);
        assert!(residual_mean_var(10.0, &exp, 1.0, -0.1).is_err());
    }

    #[test]
    fn delta_zero_reduces_to_total_overlap() {
        let p = MMParams::new(10.0, 1.0).unwrap();
        let exp = DistSpec::exponential(1.0);
        for &t in &[0.0, 1.0, 5.0] {
            let r = residual_mean_var(10.0, &exp, t, 0.0).unwrap();
            let (mean, var) = total_overlap_mean_var_mm(p, t, VarianceForm::Decomposition).unwrap();
            assert_relative_eq!(r.mean, mean, max_relative = 1e-12);
            // Ḡ(0) = 1, G(0) = 0: no covariance and the forms coincide.
            assert_relative_eq!(r.variance, r.variance_exact);
            assert_relative_eq!(r.variance, var, max_relative = 1e-12);
        }
    }

    #[test]
    fn exact_variance_matches_brute_force_decomposition() {
        // Var(D + QI) by conditioning on S, independently of the formula.
        let (lambda, mu, delta, t) = (10.0, 1.0, 0.5, 5.0);
        let exp = DistSpec::exponential(mu);
        let p: f64 = (-mu * delta).exp();
        let q = lambda * ((-mu * delta).exp() - (-mu * (t + delta)).exp()) / mu;
        // D | S ~ Poisson(λp(S-δ)⁺); D and I are functions of S; Q ⊥ S.
        let e_d = exp.expect(|s| lambda * p * (s - delta).max(0.0)).unwrap();
        let e_d2 = exp
            .expect(|s| {
                let m = lambda * p * (s - delta).max(0.0);
                m + m * m
            })
            .unwrap();
        let e_i = p;
        let e_di = exp.expect(|s| if s >= delta { lambda * p * (s - delta) } else { 0.0 }).unwrap();
        let e_o = e_d + q * e_i;
        let e_o2 = e_d2 + 2.0 * q * e_di + (q + q * q) * e_i;
        let r = residual_mean_var(lambda, &exp, t, delta).unwrap();
        assert_relative_eq!(r.mean, e_o, max_relative = 1e-10);
        assert_relative_eq!(r.variance_exact, e_o2 - e_o * e_o, max_relative = 1e-9);
        assert!(r.variance_exact > r.variance);
    }

    #[test]
    fn residual_during_examples() {
        let exp = DistSpec::exponential(1.0);
        assert_relative_eq!(
            residual_during_pmf(10.0, &exp, 0.5, 0).unwrap(),
            1.0 - 10.0 / 11.0 * (-0.5f64).exp(),
            max_relative = 1e-15
        );
        assert_relative_eq!(residual_during_pmf(10.0, &exp, 0.5, 0).unwrap(), 0.448608, epsilon = 1e-6);
        let pmf = residual_during_dist(10.0, &exp, 0.5).unwrap();
        assert!((pmf.total() - 1.0).abs() < 1e-9);
        for spec in [exp.clone(), DistSpec::Uniform { low: 0.0, high: 3.0 }, DistSpec::Gamma { shape: 2.0, rate: 1.5 }] {
            for k in 0..25 {
                assert_eq!(residual_during_pmf(4.0, &spec, 0.0, k).unwrap(), during_service_pmf(4.0, &spec, k).unwrap());
            }
        }
    }

    #[test]
    fn residual_during_general_matches_exponential_closed_form() {
        // Exponential written as a one-branch hyper-exponential takes the
        // general quadrature path.
        let hyper = DistSpec::HyperExponential { weights: vec![1.0], rates: vec![1.3] };
        let exp = DistSpec::exponential(1.3);
        for k in 0..30 {
            let a = residual_during_pmf(6.0, &hyper, 0.7, k).unwrap();
            let b = residual_during_pmf(6.0, &exp, 0.7, k).unwrap();
            assert!((a - b).abs() < 1e-11, "k={k}: {a} vs {b}");
        }
        let unif = DistSpec::Uniform { low: 0.0, high: 3.0 };
        let pmf = residual_during_dist(4.0, &unif, 1.0).unwrap();
        assert!((pmf.total() - 1.0).abs() < 1e-9);
        assert_relative_eq!(pmf.mean(), 4.0 * unif.mean_excess(1.0).unwrap(), max_relative = 1e-8);
    }

    #[test]
    fn z_examples() {
        let exp = DistSpec::exponential(1.0);
        let rho = 10.0 / 11.0;
        for k in 0..40 {
            assert_relative_eq!(
                residual_z_pmf(10.0, 1.0, &exp, 0.0, k).unwrap(),
                (1.0 - rho) * f64::powi(rho, k as i32),
                max_relative = 1e-12
            );
        }
        let z1 = residual_z_pmf(10.0, 1.0, &exp, 0.5, 1).unwrap();
        let (gb, g) = ((-0.5f64).exp(), 1.0 - (-0.5f64).exp());
        assert_relative_eq!(z1, gb * rho * (1.0 - rho) * gb / (1.0 - rho * g).powi(2), max_relative = 1e-14);
        assert_relative_eq!(z1, 0.0736, epsilon = 1e-4);
        let pmf = residual_z_dist(10.0, 1.0, &exp, 0.5).unwrap();
        assert!((pmf.total() - 1.0).abs() < 1e-9);
        // Without the complement, the k >= 0 expression sums to e^{-μδ}.
        let printed0 = (1.0 - rho) * gb / (1.0 - rho * g);
        let printed_total = pmf.total() - pmf.probs[0] + printed0;
        assert_relative_eq!(printed_total, gb, max_relative = 1e-9);
    }

    #[test]
    fn z_mean_is_thinned_window() {
        // E[Z] = λ Ḡ(δ) E[(S-δ)⁺] = λ Ḡ(δ) e^{-μδ}/μ.
        let cohort = DistSpec::Uniform { low: 0.0, high: 2.0 };
        let pmf = residual_z_dist(3.0, 0.8, &cohort, 0.5).unwrap();
        let oracle = 3.0 * 0.75 * (-0.8f64 * 0.5).exp() / 0.8;
        assert_relative_eq!(pmf.mean(), oracle, max_relative = 1e-9);
    }
}
