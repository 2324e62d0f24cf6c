//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! Every mixing integral in [`crate::analytic`] goes through here. The
//! scheme bisects the panel with the largest error estimate until the summed
//! estimate drops below `max(abs_tol, rel_tol·|I|)`. If the panel budget runs
//! out first, the result is still accepted when the estimate is within
//! [`CONTRACT_TOL`]; otherwise [`Error::Quadrature`] is returned.
//!
//! Semi-infinite ranges use the map `x = a + s·u/(1-u)`, `u ∈ [0, 1)`, where
//! `s` is a caller-supplied length scale (typically the distribution mean).

use crate::error::{Error, Result};
use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Absolute accuracy every public quadrature-backed result is held to.
pub const CONTRACT_TOL: f64 = 1e-8;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the nodes XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for Quadrature {
    fn default() -> Self {
        Self { abs_tol: 1e-13, rel_tol: 1e-12, max_panels: 4000 }
    }
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Panel {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let fc = f(center);
    let mut kron = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, (&x, &w)) in XGK[..7].iter().zip(&WGK[..7]).enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kron += w * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let value = kron * half;
    let error = ((kron - gauss) * half).abs();
    Panel { lo, hi, value, error }
}

impl Quadrature {
    /// Relative tolerance only, for integrals whose value may be far below
    /// the default absolute floor (e.g. deep pmf tail terms).
    pub fn relative() -> Self {
        Self { abs_tol: 1e-300, ..Self::default() }
    }

    /// `∫ f` over `[lo, hi]`, seeded with the given interior break points.
    pub fn integrate_with<F: Fn(f64) -> f64>(&self, f: F, lo: f64, hi: f64, breaks: &[f64]) -> Result<f64> {
        if lo == hi {
            return Ok(0.0);
        }
        if lo > hi {
            return self.integrate_with(f, hi, lo, breaks).map(|v| -v);
        }
        let mut cuts: Vec<f64> = Vec::with_capacity(breaks.len() + 2);
        cuts.push(lo);
        cuts.extend(breaks.iter().copied().filter(|&b| b > lo && b < hi));
        cuts.push(hi);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();

        let mut heap: BinaryHeap<Panel> = cuts.windows(2).map(|w| kronrod(&f, w[0], w[1])).collect();
        loop {
            let (total, err) = heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
            if !total.is_finite() {
                return Err(Error::Quadrature { lo, hi, error: f64::INFINITY });
            }
            let target = self.abs_tol.max(self.rel_tol * total.abs());
            if err <= target {
                return Ok(total);
            }
            if heap.len() >= self.max_panels {
                return if err <= CONTRACT_TOL { Ok(total) } else { Err(Error::Quadrature { lo, hi, error: err }) };
            }
            let worst = heap.pop().expect("at least one panel");
            let mid = 0.5 * (worst.lo + worst.hi);
            if mid <= worst.lo || mid >= worst.hi {
                // Panel cannot be split further in floating point.
                heap.push(Panel { error: 0.0, ..worst });
                continue;
            }
            heap.push(kronrod(&f, worst.lo, mid));
            heap.push(kronrod(&f, mid, worst.hi));
        }
    }

    pub fn integrate<F: Fn(f64) -> f64>(&self, f: F, lo: f64, hi: f64) -> Result<f64> {
        self.integrate_with(f, lo, hi, &[])
    }

    /// `∫_lo^∞ f`, with `scale` setting where the mapped range concentrates.
    pub fn integrate_to_infinity<F: Fn(f64) -> f64>(&self, f: F, lo: f64, scale: f64, breaks: &[f64]) -> Result<f64> {
        let s = if scale > 0.0 && scale.is_finite() { scale } else { 1.0 };
        let mapped = |u: f64| {
            let v = 1.0 - u;
            let x = lo + s * u / v;
            let y = f(x);
            if y == 0.0 {
                0.0
            } else {
                y * s / (v * v)
            }
        };
        let to_u = |x: f64| (x - lo) / (x - lo + s);
        let mut ubreaks: Vec<f64> = breaks.iter().filter(|&&b| b > lo).map(|&b| to_u(b)).collect();
        // Uniform seeding in u keeps early panels from straddling sharp peaks.
        ubreaks.extend((1..16).map(|i| i as f64 / 16.0));
        self.integrate_with(mapped, 0.0, 1.0, &ubreaks)
    }
}

pub fn integrate<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64) -> Result<f64> {
    Quadrature::default().integrate(f, lo, hi)
}
