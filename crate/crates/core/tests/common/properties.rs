// Invariant checks shared by the `properties` and `acceptance` targets.
// Each returns a short summary on success and the first violation otherwise.

use overlap_core::analytic::counts::*;
use overlap_core::analytic::overlap_time::*;
use overlap_core::analytic::residual::*;
use overlap_core::analytic::{MMParams, Pmf, RateProfile};
use overlap_core::dists::{exp_minus_erlang_law, kfold_convolution_cdf, DistSpec};
use overlap_core::quad::Quadrature;
use overlap_core::rng::{Purpose, Stream};
use overlap_core::sim::*;
use overlap_core::special::{gamma_fn, lower_incomplete_gamma, upper_incomplete_gamma};
use overlap_core::verify::suites::{fig4_5, SuiteOptions};
use overlap_core::verify::*;
use rand::Rng;

pub type Outcome = Result<String, String>;

fn rng(tag: u64) -> Stream {
    Stream::new(0x5eed_0000 + tag, 0, Purpose::Aux)
}

fn check(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e<E: std::fmt::Display>(err: E) -> String {
    err.to_string()
}

pub fn all_specs() -> Vec<DistSpec> {
    vec![
        DistSpec::Exponential { rate: 1.5 },
        DistSpec::Erlang { shape: 3, rate: 2.0 },
        DistSpec::Gamma { shape: 0.7, rate: 1.3 },
        DistSpec::Deterministic { value: 1.2 },
        DistSpec::DeterministicMixture { weights: vec![0.3, 0.7], values: vec![0.5, 2.0] },
        DistSpec::Uniform { low: 0.0, high: 10.0 },
        DistSpec::TruncatedNormal { low: 0.0, high: 3.0, location: 1.0, scale: 0.8 },
        DistSpec::LogNormal { mean: 1.0, variance: 1.0 },
        DistSpec::HyperExponential { weights: vec![0.4, 0.6], rates: vec![0.5, 3.0] },
    ]
}

pub fn incomplete_gamma_identity() -> Outcome {
    let mut r = rng(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let a = r.random_range(0.05..60.0);
        let x = r.random_range(0.0..120.0);
        let lower = lower_incomplete_gamma(a, x).map_err(e)?;
        let upper = upper_incomplete_gamma(a, x).map_err(e)?;
        let rel = ((lower + upper) - gamma_fn(a)).abs() / gamma_fn(a);
        worst = worst.max(rel);
        check(rel < 1e-12, || format!("γ + Γ != Γ(a) at a={a}, x={x}: rel {rel:e}"))?;
    }
    Ok(format!("1000 pairs, worst relative error {worst:.2e}"))
}

pub fn cdfs_monotone_and_bounded() -> Outcome {
    for spec in all_specs() {
        let hi = 3.0 * spec.support_max().min(spec.mean() * 10.0);
        let mut prev = 0.0;
        for i in 0..1000 {
            let x = -0.5 + (hi + 0.5) * i as f64 / 999.0;
            let f = spec.cdf(x);
            check((0.0..=1.0).contains(&f) && f >= prev, || format!("{spec:?}: cdf({x}) = {f} after {prev}"))?;
            prev = f;
        }
    }
    Ok("9 laws on 1000-point grids".into())
}

pub fn samples_match_cdf() -> Outcome {
    let mut worst = 0.0f64;
    for (i, spec) in all_specs().into_iter().enumerate() {
        let mut r = rng(100 + i as u64);
        let xs: Vec<f64> = (0..100_000).map(|_| spec.sample(&mut r)).collect();
        let d = ks_distance(&xs, |x| spec.cdf(x)).map_err(e)?;
        worst = worst.max(d);
        check(d < 0.012, || format!("{spec:?}: KS {d}"))?;
    }
    Ok(format!("9 laws, n = 1e5 each, worst KS {worst:.4}"))
}

pub fn exp_minus_erlang_positive_branch_mass() -> Outcome {
    let mut worst = 0.0f64;
    for &(mu, k, lambda) in &[(1.0, 1, 0.5), (1.0, 3, 0.5), (2.0, 2, 5.0), (0.3, 4, 1.7)] {
        let density = |z: f64| exp_minus_erlang_law(mu, k, lambda, z).map(|v| v.0).unwrap_or(f64::NAN);
        let mass = Quadrature::default().integrate_to_infinity(density, 0.0, 1.0 / mu, &[]).map_err(e)?;
        let want = (lambda / (lambda + mu)).powi(k as i32);
        worst = worst.max((mass - want).abs());
        check((mass - want).abs() < 1e-9, || format!("μ={mu}, k={k}, λ={lambda}: mass {mass} vs {want}"))?;
    }
    Ok(format!("4 parameter sets, worst error {worst:.2e}"))
}

pub fn kfold_matches_summed_samples() -> Outcome {
    let cases: Vec<(DistSpec, u32)> = vec![
        (DistSpec::Exponential { rate: 0.5 }, 3),
        (DistSpec::Uniform { low: 1.0, high: 2.0 }, 4),
        (DistSpec::Gamma { shape: 0.7, rate: 1.3 }, 2),
        (DistSpec::DeterministicMixture { weights: vec![0.3, 0.7], values: vec![0.5, 2.0] }, 3),
        (DistSpec::TruncatedNormal { low: 0.0, high: 3.0, location: 1.0, scale: 0.8 }, 2),
        (DistSpec::LogNormal { mean: 1.0, variance: 1.0 }, 2),
    ];
    let mut worst = 0.0f64;
    for (i, (spec, k)) in cases.iter().enumerate() {
        let mut r = rng(200 + i as u64);
        let xs: Vec<f64> = (0..100_000).map(|_| (0..*k).map(|_| spec.sample(&mut r)).sum()).collect();
        let d = ks_distance(&xs, |x| kfold_convolution_cdf(spec, *k, x).unwrap_or(f64::NAN)).map_err(e)?;
        worst = worst.max(d);
        check(d < 0.012, || format!("{spec:?}, k={k}: KS {d}"))?;
    }
    Ok(format!("{} cases, worst KS {worst:.4}", cases.len()))
}

fn normalized(name: &str, pmf: Result<Pmf, overlap_core::Error>) -> Result<f64, String> {
    let pmf = pmf.map_err(|err| format!("{name}: {err}"))?;
    let gap = (pmf.total() - 1.0).abs();
    check(gap < 1e-9 && pmf.tail < 1e-12, || format!("{name}: total {} tail {:e}", pmf.total(), pmf.tail))?;
    Ok(gap)
}

pub fn pmfs_normalized() -> Outcome {
    let mut worst = 0.0f64;
    let mut n = 0;
    for spec in all_specs() {
        worst = worst.max(normalized(&format!("during {spec:?}"), during_service_dist(10.0, &spec))?);
        worst = worst.max(normalized(&format!("residual during {spec:?}"), residual_during_dist(10.0, &spec, 0.5))?);
        n += 2;
    }
    let p = MMParams::new(10.0, 1.0).map_err(e)?;
    let profile = RateProfile::piecewise(vec![0.0, 5.0], vec![5.0, 15.0], Some(10.0)).map_err(e)?;
    let more = [
        ("total mm t=0", total_overlap_dist_mm(p, 0.0)),
        ("total mm t=5", total_overlap_dist_mm(p, 5.0)),
        ("total mm t=inf", total_overlap_dist_mm(p, f64::INFINITY)),
        ("total mh", total_overlap_dist_mh(&[0.4, 0.6], &[0.5, 3.0], 10.0, 5.0)),
        ("transient uniform", total_overlap_dist_transient(&RateProfile::constant(10.0), &DistSpec::Uniform { low: 0.0, high: 10.0 }, 20.0)),
        ("transient profile", total_overlap_dist_transient(&profile, &DistSpec::exponential(1.0), 6.0)),
        ("z exp", residual_z_dist(10.0, 1.0, &DistSpec::exponential(1.0), 0.5)),
        ("z uniform cohort", residual_z_dist(10.0, 1.0, &DistSpec::Uniform { low: 0.0, high: 2.0 }, 0.5)),
    ];
    for (name, pmf) in more {
        worst = worst.max(normalized(name, pmf)?);
        n += 1;
    }
    Ok(format!("{n} laws, worst |Σp + tail - 1| {worst:.2e}"))
}

pub fn overlap_tail_mm_shape() -> Outcome {
    for &(l, m) in &[(0.5, 1.0), (10.0, 1.0), (1.0, 3.0)] {
        let p = MMParams::new(l, m).map_err(e)?;
        for k in 1..=6u32 {
            let at0 = overlap_tail_mm(p, k, 0.0).map_err(e)?;
            let atom = overlap_atom_mm(p, k).map_err(e)?;
            check(atom + at0 == 1.0, || format!("λ={l}, μ={m}, k={k}: atom + tail = {}", atom + at0))?;
            let mut prev = at0;
            for i in 1..200 {
                let t = i as f64 * 0.05;
                let v = overlap_tail_mm(p, k, t).map_err(e)?;
                let next_k = overlap_tail_mm(p, k + 1, t).map_err(e)?;
                check(v <= prev && next_k <= v, || format!("not monotone at λ={l}, μ={m}, k={k}, t={t}"))?;
                prev = v;
            }
        }
    }
    Ok("3 regimes, k ≤ 6".into())
}

pub fn mm_incomplete_gamma_vs_convolution() -> Outcome {
    let mut r = rng(3);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let p = MMParams::new(r.random_range(0.1..20.0), r.random_range(0.2..5.0)).map_err(e)?;
        let t = r.random_range(0.0..10.0);
        for k in 0..=200 {
            let a = total_overlap_pmf_mm(p, t, k).map_err(e)?;
            let b = total_overlap_pmf_mm_convolution(p, t, k).map_err(e)?;
            worst = worst.max((a - b).abs());
            check((a - b).abs() < 1e-10, || format!("{p:?}, t={t}, k={k}: {a} vs {b}"))?;
        }
    }
    Ok(format!("50 sets × k ≤ 200, worst {worst:.2e}"))
}

pub fn transient_matches_mm() -> Outcome {
    let mut r = rng(4);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let (l, m) = (r.random_range(0.5..15.0), r.random_range(0.5..3.0));
        let t = r.random_range(0.1..8.0);
        let p = MMParams::new(l, m).map_err(e)?;
        for k in 0..=100 {
            let a = total_overlap_pmf_transient(&RateProfile::constant(l), &DistSpec::exponential(m), t, k).map_err(e)?;
            let b = total_overlap_pmf_mm(p, t, k).map_err(e)?;
            worst = worst.max((a - b).abs());
            check((a - b).abs() < 1e-7, || format!("λ={l}, μ={m}, t={t}, k={k}: {a} vs {b}"))?;
        }
    }
    Ok(format!("5 sets × k ≤ 100, worst {worst:.2e}"))
}

pub fn laplace_matches_closed_forms() -> Outcome {
    let mut r = rng(5);
    let mut worst = 0.0f64;
    let mut sets = 0;
    for family in 0..5 {
        for _ in 0..20 {
            let lambda = r.random_range(0.2..12.0);
            let spec = match family {
                0 => DistSpec::Exponential { rate: r.random_range(0.2..4.0) },
                1 => DistSpec::Erlang { shape: r.random_range(1..6), rate: r.random_range(0.3..4.0) },
                2 => {
                    let low = r.random_range(0.0..2.0);
                    DistSpec::Uniform { low, high: low + r.random_range(0.1..5.0) }
                }
                3 => DistSpec::Deterministic { value: r.random_range(0.1..4.0) },
                _ => {
                    let w = r.random_range(0.05..0.95);
                    DistSpec::HyperExponential { weights: vec![w, 1.0 - w], rates: vec![r.random_range(0.2..4.0), r.random_range(0.2..4.0)] }
                }
            };
            let k_max = (3.0 * lambda * spec.mean() + 15.0) as u64;
            for k in 0..=k_max {
                let a = during_service_pmf(lambda, &spec, k).map_err(e)?;
                let b = during_service_pmf_laplace(lambda, &spec, k).map_err(e)?;
                worst = worst.max((a - b).abs());
                check((a - b).abs() < 1e-8, || format!("λ={lambda}, {spec:?}, k={k}: {a} vs {b}"))?;
            }
            sets += 1;
        }
    }
    Ok(format!("{sets} parameter sets over 5 families, worst {worst:.2e}"))
}

pub fn residual_at_zero_is_during() -> Outcome {
    for spec in all_specs() {
        for k in 0..40 {
            let a = residual_during_pmf(10.0, &spec, 0.0, k).map_err(e)?;
            let b = during_service_pmf(10.0, &spec, k).map_err(e)?;
            check(a.to_bits() == b.to_bits(), || format!("{spec:?}, k={k}: {a} vs {b}"))?;
        }
    }
    Ok("9 laws, k < 40, bitwise equal".into())
}

pub fn overlap_tail_gid_shape() -> Outcome {
    for spec in [DistSpec::exponential(0.5), DistSpec::Uniform { low: 0.0, high: 1.0 }, DistSpec::Gamma { shape: 2.5, rate: 3.0 }] {
        for k in 1..=4 {
            let mut prev = 1.0;
            for i in 0..=100 {
                let t = i as f64 / 100.0;
                let v = overlap_tail_gid(&spec, k, 1.0, t).map_err(e)?;
                check(v <= prev, || format!("{spec:?}, k={k}: increases at t={t}"))?;
                prev = v;
            }
            check(prev == 0.0, || format!("{spec:?}, k={k}: tail at Δ is {prev}"))?;
        }
    }
    Ok("3 inter-arrival laws, k ≤ 4".into())
}

fn mm_config(seed: u64, customers: u64) -> RunConfig {
    RunConfig {
        arrival: ArrivalSpec::Poisson { rate: 0.5 },
        service: DistSpec::exponential(1.0),
        stop: StopRule::Customers(customers),
        warmup: Warmup::default(),
        seed,
        replications: 1,
    }
}

pub fn overlap_samples_bounded() -> Outcome {
    let recs = run(&mm_config(9, 50_000), 0).map_err(e)?.records;
    for k in 1..=4 {
        for s in overlap_pairs(&recs, k) {
            let bound = recs[s.n as usize - 1].service.min(recs[(s.n + u64::from(k)) as usize - 1].service);
            check(s.value >= 0.0 && s.value <= bound, || format!("k={k}, n={}: {} outside [0, {bound}]", s.n, s.value))?;
        }
    }
    Ok("50 000 customers, k ≤ 4".into())
}

pub fn no_waiting() -> Outcome {
    let recs = run(&mm_config(10, 100_000), 0).map_err(e)?.records;
    for r in &recs {
        check(r.departure == r.arrival + r.service, || format!("customer {}: departure != arrival + service", r.index))?;
    }
    let sojourn: f64 = recs.iter().map(|r| r.departure - r.arrival).sum();
    let service: f64 = recs.iter().map(|r| r.service).sum();
    check((sojourn - service).abs() <= 1e-9 * service, || format!("Σ sojourn {sojourn} vs Σ service {service}"))?;
    Ok(format!("100 000 customers, Σ sojourn - Σ service = {:.2e}", sojourn - service))
}

pub fn upon_arrival_counts_poisson() -> Outcome {
    let reports = fig4_5(&SuiteOptions { seed: 21, ..SuiteOptions::default() }).map_err(e)?;
    let r = reports.iter().find(|r| r.check == "fig4-5/upon-chi-square").ok_or("missing upon-arrival report")?;
    check(r.pass, || format!("p = {}", r.observed))?;
    Ok(format!("chi-square p = {:.4} at n = {}", r.observed, r.n))
}

pub fn replications_independent_and_repeatable() -> Outcome {
    let cfg = mm_config(42, 10_000);
    let a = run(&cfg, 0).map_err(e)?.records;
    let again = run(&cfg, 0).map_err(e)?.records;
    let b = run(&cfg, 1).map_err(e)?.records;
    check(a == again, || "same (seed, replication) differs".into())?;
    check(a.iter().zip(&b).all(|(x, y)| x.arrival != y.arrival), || "replications 0 and 1 share arrivals".into())?;
    let par = replicate(&RunConfig { replications: 4, ..cfg.clone() }, |r| Ok(r.records)).map_err(e)?;
    check(par[0] == a && par[1] == b, || "parallel replication differs from serial".into())?;
    Ok("repeatable, disjoint, order-independent".into())
}

pub fn distances_bounded() -> Outcome {
    let mut r = rng(6);
    for _ in 0..200 {
        let xs: Vec<f64> = (0..50).map(|_| r.random_range(-1.0..3.0)).collect();
        let d = ks_distance(&xs, |x| x.clamp(0.0, 1.0)).map_err(e)?;
        let own = ecdf(&xs).map_err(e)?;
        let d0 = ks_distance(&xs, |x| own.eval(x)).map_err(e)?;
        check((0.0..=1.0).contains(&d) && d0 == 0.0, || format!("KS {d}, self {d0}"))?;
        let a: Vec<u64> = (0..50).map(|_| r.random_range(0..8)).collect();
        let b: Vec<u64> = (0..50).map(|_| r.random_range(0..12)).collect();
        let (pa, pb) = (empirical_pmf(&a).map_err(e)?, empirical_pmf(&b).map_err(e)?);
        let tv = tv_distance(&pa, &pb);
        check((0.0..=1.0).contains(&tv) && tv_distance(&pa, &pa) == 0.0, || format!("TV {tv}"))?;
    }
    Ok("200 random pairs".into())
}

pub fn compare_deterministic_and_pooled() -> Outcome {
    let mut r = rng(7);
    let counts: Vec<u64> = (0..20_000).map(|_| DistSpec::exponential(1.0).sample(&mut r).floor() as u64).collect();
    let pmf = Pmf::build(|k| Ok((-(k as f64)).exp() * (1.0 - (-1.0f64).exp())), |k| (-(k as f64 + 1.0)).exp(), 0).map_err(e)?;
    let policy = Policy::default();
    let a = compare("geometric", Target::Pmf(&pmf), Samples::Counts(&counts), &policy, 1).map_err(e)?;
    let b = compare("geometric", Target::Pmf(&pmf), Samples::Counts(&counts), &policy, 1).map_err(e)?;
    check(a == b, || "compare differs between calls".into())?;
    let chi = chi_square_gof(&counts, &pmf, 5.0).map_err(e)?;
    let n = counts.len() as f64;
    let expected = |&(lo, hi): &(u64, Option<u64>)| {
        let mass: f64 = (lo..=hi.unwrap_or(pmf.len() as u64)).map(|k| pmf.get(k as usize)).sum();
        n * (mass + if hi.is_none() { pmf.tail } else { 0.0 })
    };
    check(chi.cells.iter().all(|c| expected(c) >= 5.0), || "cell with expected < 5".into())?;
    check(a.iter().any(|r| r.notes.contains("pooled")), || "pooling rule missing from report".into())?;
    Ok(format!("{} pooled cells, all expected ≥ 5", chi.cells.len()))
}

pub fn suite_reports_byte_identical() -> Outcome {
    let opts = SuiteOptions { n: 5000, seed: 3, ..SuiteOptions::default() };
    let a = serde_json::to_string(&overlap_core::verify::suites::fig8(&opts).map_err(e)?).map_err(e)?;
    let b = serde_json::to_string(&overlap_core::verify::suites::fig8(&opts).map_err(e)?).map_err(e)?;
    check(a == b, || "reports differ between reruns".into())?;
    Ok(format!("{} bytes, identical", a.len()))
}

pub const ALL: &[(&str, fn() -> Outcome)] = &[
    ("incomplete gamma identity", incomplete_gamma_identity),
    ("cdfs monotone and bounded", cdfs_monotone_and_bounded),
    ("samples match cdf", samples_match_cdf),
    ("exp minus erlang positive mass", exp_minus_erlang_positive_branch_mass),
    ("k-fold convolution vs summed samples", kfold_matches_summed_samples),
    ("pmf normalization", pmfs_normalized),
    ("overlap tail monotone, atom + tail = 1", overlap_tail_mm_shape),
    ("incomplete gamma vs convolution pmf", mm_incomplete_gamma_vs_convolution),
    ("transient vs M/M pmf", transient_matches_mm),
    ("general vs closed during-service pmf", laplace_matches_closed_forms),
    ("residual at δ = 0", residual_at_zero_is_during),
    ("GI/D tail shape", overlap_tail_gid_shape),
    ("overlap samples bounded", overlap_samples_bounded),
    ("no waiting", no_waiting),
    ("upon-arrival counts Poisson", upon_arrival_counts_poisson),
    ("replications", replications_independent_and_repeatable),
    ("distances bounded", distances_bounded),
    ("compare deterministic, pooling", compare_deterministic_and_pooled),
    ("reports byte-identical", suite_reports_byte_identical),
];
