//! `overlap-lab`: simulate infinite-server queues, evaluate the overlap
//! formulas, run the verification suites and emit plot-ready tables.
//!
//! Exit codes: 0 success, 1 I/O error, 2 configuration error, 3 a
//! verification check failed.

mod analytic;
mod config;
mod output;
mod plotdata;

use clap::{Args, Parser, Subcommand};
use config::{Config, DEFAULT_N};
use output::{to_json_string, write_file, Cell, Format, Table};
use overlap_core::dists::DistSpec;
use overlap_core::sim::{
    count_overlaps, count_residual_overlaps, overlap_pairs, replicate, ArrivalSpec, Run, StopRule, Warmup,
};
use overlap_core::verify::suites::{run_suite, Suite, SuiteOptions};
use serde::Serialize;
use serde_json::json;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Debug)]
pub enum Failure {
    Io(String),
    Config(String),
    Verification { failed: usize, total: usize },
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Io(_) => 1,
            Failure::Config(_) => 2,
            Failure::Verification { .. } => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Io(m) => write!(f, "I/O error: {m}"),
            Failure::Config(m) => write!(f, "configuration error: {m}"),
            Failure::Verification { failed, total } => write!(f, "{failed} of {total} verification checks failed"),
        }
    }
}

impl From<overlap_core::Error> for Failure {
    fn from(e: overlap_core::Error) -> Self {
        Failure::Config(e.to_string())
    }
}

#[derive(Debug, Parser)]
#[command(name = "overlap-lab", version, about = "Overlap times and overlap counts in infinite-server queues")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate and write customers, overlaps and counts.
    Simulate(SimulateArgs),
    /// Evaluate one analytic formula.
    Analytic(analytic::AnalyticArgs),
    /// Run a verification suite and write report.json.
    Verify(VerifyArgs),
    /// Histogram and empirical cdf of one CSV column.
    Plotdata(plotdata::PlotArgs),
}

#[derive(Debug, Args)]
struct SimulateArgs {
    /// JSON configuration; flags override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Poisson arrivals at this rate.
    #[arg(long, conflicts_with = "interarrival")]
    arrival_rate: Option<f64>,
    /// Renewal arrivals with this inter-arrival law, e.g. `det(1)`.
    #[arg(long)]
    interarrival: Option<String>,
    /// Service law, e.g. `exp(1)`.
    #[arg(long)]
    service: Option<String>,
    /// Stop after this many customers.
    #[arg(long, conflicts_with = "horizon")]
    customers: Option<u64>,
    /// Stop at this time.
    #[arg(long)]
    horizon: Option<f64>,
    #[arg(long)]
    replications: Option<u64>,
    /// Comma-separated lags for overlaps_k{K}.csv.
    #[arg(long, value_delimiter = ',')]
    lags: Option<Vec<u32>>,
    /// Write residual_counts.csv for this threshold.
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long, value_enum, value_delimiter = ',')]
    format: Option<Vec<Format>>,
}

#[derive(Debug, Args)]
struct VerifyArgs {
    /// fig1-2, fig3, fig4-5, fig6, fig7, fig8, variance-arbitration or all.
    suite: Option<String>,
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    ks_max: Option<f64>,
    #[arg(long)]
    tv_max: Option<f64>,
    #[arg(long)]
    z_max: Option<f64>,
    #[arg(long)]
    chi_square_p_min: Option<f64>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Analytic(a) => analytic::render(&a).map(|text| print!("{text}")),
        Command::Verify(a) => verify(a),
        Command::Plotdata(a) => plotdata::run(&a).map(|out| {
            for w in out.warnings {
                eprintln!("warning: {w}");
            }
            for f in out.files {
                println!("{}", f.display());
            }
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("overlap-lab: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn simulate(a: SimulateArgs) -> Result<(), Failure> {
    let mut cfg = Config::load(a.config.as_deref())?;
    if let Some(rate) = a.arrival_rate {
        cfg.arrival = Some(ArrivalSpec::Poisson { rate });
    }
    if let Some(text) = &a.interarrival {
        cfg.arrival = Some(ArrivalSpec::Renewal { interarrival: text.parse::<DistSpec>()? });
    }
    if let Some(text) = &a.service {
        cfg.service = Some(text.parse()?);
    }
    if let Some(n) = a.customers {
        cfg.stop = Some(StopRule::Customers(n));
    }
    if let Some(t) = a.horizon {
        cfg.stop = Some(StopRule::Horizon(t));
    }
    if let Some(r) = a.replications {
        cfg.replications = r;
    }
    if let Some(l) = a.lags {
        cfg.lags = l;
    }
    if a.delta.is_some() {
        cfg.delta = a.delta;
    }
    if let Some(f) = a.format {
        cfg.formats = f;
    }
    if let Some(o) = a.out {
        cfg.output_dir = o;
    }
    cfg.resolve_seed(a.seed)?;
    let run_cfg = cfg.run_config()?;

    let tables = replicate(&run_cfg, |run| Ok(tabulate(&run, &cfg)))?.into_iter().collect::<Result<Vec<_>, Failure>>()?;
    let mut summaries = Vec::new();
    for (r, (files, summary)) in tables.into_iter().enumerate() {
        let dir = if cfg.replications > 1 { cfg.output_dir.join(format!("rep{r}")) } else { cfg.output_dir.clone() };
        for (stem, table) in &files {
            table.write(&dir, stem, &cfg.formats)?;
        }
        summaries.push(summary);
    }
    write_file(&cfg.output_dir.join("report.json"), &to_json_string(&json!({ "config": cfg, "replications": summaries }))?)?;
    println!("wrote {}", cfg.output_dir.display());
    Ok(())
}

fn warmed(warmup: Warmup, index: u64, arrival: f64) -> bool {
    match warmup {
        Warmup::Customers(w) => index > w,
        Warmup::Time(w) => arrival >= w,
    }
}

fn mean(xs: impl Iterator<Item = f64>) -> Option<f64> {
    let (s, n) = xs.fold((0.0, 0u64), |(s, n), x| (s + x, n + 1));
    (n > 0).then(|| s / n as f64)
}

type Tables = Vec<(String, Table)>;

/// All tables for one replication, plus its summary for report.json.
fn tabulate(run: &Run, cfg: &Config) -> Result<(Tables, serde_json::Value), Failure> {
    let recs = &run.records;
    let mut out: Tables = Vec::new();

    let mut customers = Table::new(&["index", "arrival", "service", "departure"]);
    for r in recs {
        customers.push(vec![Cell::Int(r.index), Cell::Real(r.arrival), Cell::Real(r.service), Cell::Real(r.departure)]);
    }
    out.push(("customers".into(), customers));

    let mut lag_summaries = Vec::new();
    for &k in &cfg.lags {
        let mut t = Table::new(&["n", "k", "overlap"]);
        let mut positive = 0u64;
        for s in overlap_pairs(recs, k) {
            let first = &recs[(s.n - recs[0].index) as usize];
            if !warmed(run.warmup, first.index, first.arrival) {
                continue;
            }
            positive += u64::from(s.value > 0.0);
            t.push(vec![Cell::Int(s.n), Cell::Int(u64::from(s.k)), Cell::Real(s.value)]);
        }
        let pairs = t.rows.len();
        lag_summaries.push(json!({
            "k": k,
            "pairs": pairs,
            "positive_fraction": if pairs > 0 { Some(positive as f64 / pairs as f64) } else { None },
        }));
        out.push((format!("overlaps_k{k}"), t));
    }

    let window = run.window();
    let counts = count_overlaps(recs, &window);
    let mut t = Table::new(&["index", "upon", "during", "total"]);
    for c in &counts {
        t.push(vec![Cell::Int(c.index.unwrap_or(0)), Cell::Int(c.upon), Cell::Int(c.during), Cell::Int(c.total)]);
    }
    out.push(("counts".into(), t));
    let mut summary = json!({
        "replication": run.replication,
        "customers": recs.len(),
        "observed_until": run.observed_until,
        "overlaps": lag_summaries,
        "counts": {
            "tagged": counts.len(),
            "mean_upon": mean(counts.iter().map(|c| c.upon as f64)),
            "mean_during": mean(counts.iter().map(|c| c.during as f64)),
            "mean_total": mean(counts.iter().map(|c| c.total as f64)),
        },
    });

    if let Some(delta) = cfg.delta {
        let res = count_residual_overlaps(recs, delta, &window)?;
        let mut t = Table::new(&["index", "upon", "during", "total", "window"]);
        for c in &res {
            t.push(vec![Cell::Int(c.index), Cell::Int(c.upon), Cell::Int(c.during), Cell::Int(c.total), Cell::Int(c.window)]);
        }
        out.push(("residual_counts".into(), t));
        summary["residual"] = json!({
            "delta": delta,
            "tagged": res.len(),
            "mean_total": mean(res.iter().map(|c| c.total as f64)),
            "mean_during": mean(res.iter().map(|c| c.during as f64)),
        });
    }
    Ok((out, summary))
}

#[derive(Serialize)]
struct VerifyEcho<'a> {
    figure: &'a str,
    n: usize,
    seed: u64,
    thresholds: overlap_core::verify::Policy,
}

fn verify(a: VerifyArgs) -> Result<(), Failure> {
    let mut cfg = Config::load(a.config.as_deref())?;
    if let Some(s) = a.suite {
        cfg.figure = Some(s);
    }
    if let Some(n) = a.n {
        cfg.n = Some(n);
    }
    if let Some(o) = a.out {
        cfg.output_dir = o;
    }
    let t = &mut cfg.thresholds;
    if a.ks_max.is_some() {
        t.ks_max = a.ks_max;
    }
    t.tv_max = a.tv_max.unwrap_or(t.tv_max);
    t.z_max = a.z_max.unwrap_or(t.z_max);
    t.chi_square_p_min = a.chi_square_p_min.unwrap_or(t.chi_square_p_min);
    let seed = cfg.resolve_seed(a.seed)?;
    let figure = cfg.figure.clone().ok_or_else(|| Failure::Config(format!("no suite given; expected one of {}", Suite::NAMES.join(", "))))?;
    let suite: Suite = figure.parse()?;
    let n = *cfg.n.get_or_insert(DEFAULT_N);

    let reports = run_suite(suite, &SuiteOptions { n, seed, policy: cfg.thresholds })?;
    let dir: &Path = &cfg.output_dir;
    write_file(&dir.join("report.json"), &to_json_string(&reports)?)?;
    let echo = VerifyEcho { figure: suite.name(), n, seed, thresholds: cfg.thresholds };
    write_file(&dir.join("config.json"), &to_json_string(&echo)?)?;

    for r in &reports {
        println!("{} {} observed={} threshold={}", if r.pass { "PASS" } else { "FAIL" }, r.check, output::fmt9(r.observed), output::fmt9(r.threshold));
    }
    let failed = reports.iter().filter(|r| !r.pass).count();
    if failed > 0 {
        return Err(Failure::Verification { failed, total: reports.len() });
    }
    Ok(())
}
