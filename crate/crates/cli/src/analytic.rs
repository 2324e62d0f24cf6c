//! `analytic <selector>`: evaluate one formula and print it.

use crate::output::{fmt9, to_json_string, Cell, Format, Table};
use crate::Failure;
use clap::{Args, ValueEnum};
use overlap_core::analytic::counts::*;
use overlap_core::analytic::overlap_time::*;
use overlap_core::analytic::residual::*;
use overlap_core::analytic::{MMParams, Pmf, RateProfile, TailCurve};
use overlap_core::dists::DistSpec;
use overlap_core::special::{poisson_pmf, poisson_tail_bound};
use serde_json::json;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Selector {
    /// P(O_k > t) in M/M/inf; a curve when --t is omitted.
    OverlapTailMm,
    /// P(O_k = 0) in M/M/inf.
    OverlapAtomMm,
    /// P(O_k > t) in GI/D/inf; needs --interarrival and --delta.
    OverlapTailGid,
    /// Gamma inter-arrivals, deterministic service: --shape, --rate.
    OverlapTailGammaD,
    /// E[Q(t)] in M/M/inf from Q(0) = --q0.
    QinfMm,
    /// E[Q(t)] for a rate profile and a general service law.
    QinfGeneral,
    /// Arrivals during one service time.
    DuringPmf,
    /// Total overlap count in M/M/inf at time --t (inf for stationary).
    TotalPmfMm,
    TotalMeanVarMm,
    /// Total overlap count for a rate profile and a general service law.
    TotalPmfTransient,
    /// Hyper-exponential service: --weights, --rates.
    TotalPmfMh,
    TotalMeanMh,
    /// Deterministic service --delta under a rate profile.
    TotalPmfMtd,
    WindowMeanMtd,
    ResidualMeanVar,
    /// N((S - delta)+), arrivals during the service beyond --delta.
    ResidualDuring,
    /// Z(t, delta) with Exp(--mu) tagged service and --cohort services.
    ResidualZ,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Form {
    Decomposition,
    Printed,
}

#[derive(Debug, Args)]
pub struct AnalyticArgs {
    pub selector: Selector,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub k: Option<u64>,
    /// Time; `inf` for the stationary law where supported.
    #[arg(long)]
    pub t: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub q0: Option<f64>,
    #[arg(long)]
    pub shape: Option<f64>,
    #[arg(long)]
    pub rate: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub weights: Vec<f64>,
    #[arg(long, value_delimiter = ',')]
    pub rates: Vec<f64>,
    /// Service law, e.g. `exp(1)`, `uniform(0,10)`, `lognormal(1,1)`.
    #[arg(long)]
    pub service: Option<String>,
    #[arg(long)]
    pub interarrival: Option<String>,
    /// Service law of the other customers for residual-z (default Exp(mu)).
    #[arg(long)]
    pub cohort: Option<String>,
    /// Piecewise rate `start:rate,...`, e.g. `0:5,5:15`; overrides --lambda.
    #[arg(long)]
    pub profile: Option<String>,
    #[arg(long)]
    pub horizon: Option<f64>,
    /// Curve grid upper end (tail selectors without --t).
    #[arg(long)]
    pub t_max: Option<f64>,
    #[arg(long, default_value_t = 101)]
    pub points: usize,
    #[arg(long, value_enum, default_value_t = Form::Decomposition)]
    pub form: Form,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    pub format: Format,
}

fn need<T: Copy>(v: Option<T>, name: &str) -> Result<T, Failure> {
    v.ok_or_else(|| Failure::Config(format!("missing --{name}")))
}

fn law(text: &str) -> Result<DistSpec, Failure> {
    let spec: DistSpec = text.parse()?;
    spec.validate()?;
    Ok(spec)
}

impl AnalyticArgs {
    fn lambda(&self) -> Result<f64, Failure> {
        need(self.lambda, "lambda")
    }

    fn mm(&self) -> Result<MMParams, Failure> {
        Ok(MMParams::new(self.lambda()?, need(self.mu, "mu")?)?)
    }

    fn lag(&self) -> Result<u32, Failure> {
        let k = need(self.k, "k")?;
        u32::try_from(k).map_err(|_| Failure::Config(format!("--k {k} is too large")))
    }

    /// `--service`, or Exp(`--mu`).
    fn service(&self) -> Result<DistSpec, Failure> {
        match (&self.service, self.mu) {
            (Some(s), _) => law(s),
            (None, Some(mu)) => law(&format!("exp({mu})")),
            (None, None) => Err(Failure::Config("missing --service (or --mu for exponential service)".into())),
        }
    }

    fn profile(&self) -> Result<RateProfile, Failure> {
        let Some(text) = &self.profile else {
            return Ok(RateProfile::constant(self.lambda()?));
        };
        let mut breakpoints = Vec::new();
        let mut rates = Vec::new();
        for piece in text.split(',') {
            let parsed = piece.split_once(':').and_then(|(a, b)| Some((a.trim().parse::<f64>().ok()?, b.trim().parse::<f64>().ok()?)));
            let (start, rate) = parsed.ok_or_else(|| Failure::Config(format!("bad profile piece {piece:?}; expected start:rate")))?;
            breakpoints.push(start);
            rates.push(rate);
        }
        Ok(RateProfile::piecewise(breakpoints, rates, self.horizon)?)
    }

    fn grid(&self) -> Result<Vec<f64>, Failure> {
        let hi = need(self.t_max, "t (or --t-max for a curve)")?;
        if !(hi > 0.0) || self.points < 2 {
            return Err(Failure::Config("curve needs --t-max > 0 and --points >= 2".into()));
        }
        Ok((0..self.points).map(|i| hi * i as f64 / (self.points - 1) as f64).collect())
    }
}

enum Answer {
    Scalar(f64),
    Record(Vec<(&'static str, f64)>),
    Pmf(Pmf),
    Curve(TailCurve),
}

fn pmf_or_point(k: Option<u64>, point: impl Fn(u64) -> overlap_core::Result<f64>, dist: impl Fn() -> overlap_core::Result<Pmf>) -> Result<Answer, Failure> {
    Ok(match k {
        Some(k) => Answer::Scalar(point(k)?),
        None => Answer::Pmf(dist()?),
    })
}

fn evaluate(a: &AnalyticArgs) -> Result<Answer, Failure> {
    use Selector::*;
    Ok(match a.selector {
        OverlapTailMm => {
            let (p, k) = (a.mm()?, a.lag()?);
            match a.t {
                Some(t) => Answer::Scalar(overlap_tail_mm(p, k, t)?),
                None => Answer::Curve(overlap_tail_curve_mm(p, k, &a.grid()?)?),
            }
        }
        OverlapAtomMm => Answer::Scalar(overlap_atom_mm(a.mm()?, a.lag()?)?),
        OverlapTailGid => {
            let gaps = law(a.interarrival.as_deref().ok_or_else(|| Failure::Config("missing --interarrival".into()))?)?;
            let (k, delta) = (a.lag()?, need(a.delta, "delta")?);
            match a.t {
                Some(t) => Answer::Scalar(overlap_tail_gid(&gaps, k, delta, t)?),
                None => Answer::Curve(overlap_tail_curve_gid(&gaps, k, delta, &a.grid()?)?),
            }
        }
        OverlapTailGammaD => Answer::Scalar(overlap_tail_gamma_d(
            need(a.shape, "shape")?,
            need(a.rate, "rate")?,
            a.lag()?,
            need(a.delta, "delta")?,
            need(a.t, "t")?,
        )?),
        QinfMm => Answer::Scalar(qinf_mm(a.mm()?, a.q0.unwrap_or(0.0), need(a.t, "t")?)?),
        QinfGeneral => Answer::Scalar(qinf_general(&a.profile()?, &a.service()?, need(a.t, "t")?)?),
        DuringPmf => {
            let (l, s) = (a.lambda()?, a.service()?);
            pmf_or_point(a.k, |k| during_service_pmf(l, &s, k), || during_service_dist(l, &s))?
        }
        TotalPmfMm => {
            let (p, t) = (a.mm()?, a.t.unwrap_or(f64::INFINITY));
            pmf_or_point(a.k, |k| total_overlap_pmf_mm(p, t, k), || total_overlap_dist_mm(p, t))?
        }
        TotalMeanVarMm => {
            let form = match a.form {
                Form::Decomposition => VarianceForm::Decomposition,
                Form::Printed => VarianceForm::Printed,
            };
            let (m, v) = total_overlap_mean_var_mm(a.mm()?, a.t.unwrap_or(f64::INFINITY), form)?;
            Answer::Record(vec![("mean", m), ("variance", v)])
        }
        TotalPmfTransient => {
            let (r, s, t) = (a.profile()?, a.service()?, need(a.t, "t")?);
            pmf_or_point(a.k, |k| total_overlap_pmf_transient(&r, &s, t, k), || total_overlap_dist_transient(&r, &s, t))?
        }
        TotalPmfMh => {
            let (l, t) = (a.lambda()?, a.t.unwrap_or(f64::INFINITY));
            pmf_or_point(a.k, |k| total_overlap_pmf_mh(&a.weights, &a.rates, l, t, k), || total_overlap_dist_mh(&a.weights, &a.rates, l, t))?
        }
        TotalMeanMh => {
            let m = total_overlap_mean_mh(&a.weights, &a.rates, a.lambda()?, a.t.unwrap_or(f64::INFINITY))?;
            Answer::Record(vec![("conditioning", m.conditioning), ("per_branch", m.per_branch)])
        }
        TotalPmfMtd => {
            let (r, delta, t) = (a.profile()?, need(a.delta, "delta")?, need(a.t, "t")?);
            let m = deterministic_window_mean(&r, delta, t)?;
            pmf_or_point(
                a.k,
                |k| total_overlap_pmf_mtd(&r, delta, t, k),
                || Pmf::build(|k| Ok(poisson_pmf(k, m)), |k| poisson_tail_bound(k, m), 0),
            )?
        }
        WindowMeanMtd => Answer::Scalar(deterministic_window_mean(&a.profile()?, need(a.delta, "delta")?, need(a.t, "t")?)?),
        ResidualMeanVar => {
            let m = residual_mean_var(a.lambda()?, &a.service()?, a.t.unwrap_or(f64::INFINITY), need(a.delta, "delta")?)?;
            Answer::Record(vec![("mean", m.mean), ("variance", m.variance), ("variance_exact", m.variance_exact)])
        }
        ResidualDuring => {
            let (l, s, d) = (a.lambda()?, a.service()?, need(a.delta, "delta")?);
            pmf_or_point(a.k, |k| residual_during_pmf(l, &s, d, k), || residual_during_dist(l, &s, d))?
        }
        ResidualZ => {
            let (l, mu, d) = (a.lambda()?, need(a.mu, "mu")?, need(a.delta, "delta")?);
            let cohort = match &a.cohort {
                Some(c) => law(c)?,
                None => DistSpec::exponential(mu),
            };
            pmf_or_point(a.k, |k| residual_z_pmf(l, mu, &cohort, d, k), || residual_z_dist(l, mu, &cohort, d))?
        }
    })
}

/// Text printed to stdout.
pub fn render(a: &AnalyticArgs) -> Result<String, Failure> {
    let answer = evaluate(a)?;
    match a.format {
        Format::Json => {
            let v = match answer {
                Answer::Scalar(x) => json!({ "value": x }),
                Answer::Record(fields) => serde_json::Value::Object(fields.into_iter().map(|(k, v)| (k.to_string(), json!(v))).collect()),
                Answer::Pmf(p) => json!(p),
                Answer::Curve(c) => json!(c),
            };
            to_json_string(&v)
        }
        Format::Csv => match answer {
            Answer::Scalar(x) => Ok(format!("{}\n", fmt9(x))),
            Answer::Record(fields) => {
                let mut t = Table::new(&fields.iter().map(|f| f.0).collect::<Vec<_>>());
                t.push(fields.iter().map(|f| Cell::Real(f.1)).collect());
                t.csv_string()
            }
            Answer::Pmf(p) => {
                let mut t = Table::new(&["k", "p"]);
                for (k, &x) in p.probs.iter().enumerate() {
                    t.push(vec![Cell::Int(k as u64), Cell::Real(x)]);
                }
                t.csv_string()
            }
            Answer::Curve(c) => {
                let mut t = Table::new(&["t", "tail"]);
                for (&x, &y) in c.grid.iter().zip(&c.values) {
                    t.push(vec![Cell::Real(x), Cell::Real(y)]);
                }
                t.csv_string()
            }
        },
    }
}
