//! Acceptance criteria 1-9, one line each. Run with
//! `cargo test -p overlap-core --test acceptance`.

mod common;

use overlap_core::verify::suites::{self, SuiteOptions};
use overlap_core::verify::VerificationReport;
use std::process::ExitCode;
use std::time::Instant;

struct Verdict {
    pass: bool,
    detail: String,
}

fn from_reports(reports: &[VerificationReport]) -> Verdict {
    let failed: Vec<_> = reports.iter().filter(|r| !r.pass).collect();
    let detail = if failed.is_empty() {
        format!("{} checks", reports.len())
    } else {
        let names: Vec<String> = failed.iter().map(|r| format!("{} (observed {:.6}, threshold {:.6})", r.check, r.observed, r.threshold)).collect();
        format!("{} of {} checks failed: {}", failed.len(), reports.len(), names.join("; "))
    };
    Verdict { pass: failed.is_empty() && !reports.is_empty(), detail }
}

fn select(reports: &[VerificationReport], prefixes: &[&str]) -> Vec<VerificationReport> {
    reports.iter().filter(|r| prefixes.iter().any(|p| r.check.starts_with(p))).cloned().collect()
}

fn suite(f: fn(&SuiteOptions) -> overlap_core::Result<Vec<VerificationReport>>, opts: &SuiteOptions) -> Vec<VerificationReport> {
    f(opts).unwrap_or_else(|err| panic!("suite did not run: {err}"))
}

fn main() -> ExitCode {
    let opts = SuiteOptions::default();
    let mut all_pass = true;
    let mut report = |n: u32, what: &str, run: &mut dyn FnMut() -> Verdict| {
        let start = Instant::now();
        let v = run();
        all_pass &= v.pass;
        println!(
            "criterion {n} {}: {what}: {} [{:.1}s]",
            if v.pass { "PASS" } else { "FAIL" },
            v.detail,
            start.elapsed().as_secs_f64()
        );
    };

    report(1, "M/M/inf overlap time atom, Exp(2mu) positive part, MLE rate", &mut || from_reports(&suite(suites::fig1_2, &opts)));
    let fig3 = suite(suites::fig3, &opts);
    report(2, "M/D/inf overlap time ECDF vs Erlang tail", &mut || from_reports(&select(&fig3, &["fig3/"])));
    report(3, "M/M/inf stationary overlap counts", &mut || from_reports(&suite(suites::fig4_5, &opts)));
    report(4, "M_t/D/inf counts at 5 epochs vs Poisson", &mut || from_reports(&select(&fig3, &["mtd/"])));
    report(5, "uniform service overlap counts", &mut || from_reports(&suite(suites::fig7, &opts)));
    report(6, "residual overlaps", &mut || {
        let r = suite(suites::fig8, &opts);
        let mut v = from_reports(&select(&r, &["fig8/residual-mean", "fig8/z-tv", "fig8/window-tv"]));
        if let Some(var) = r.iter().find(|r| r.check == "fig8/variance-z") {
            v.detail = format!("{}; variance: {}", v.detail, var.notes);
        }
        v
    });
    report(7, "variance arbitration", &mut || {
        let r = suite(suites::variance_arbitration, &opts);
        let mut v = from_reports(&r);
        if let Some(z) = r.iter().find(|r| r.check.ends_with("supported-z")) {
            v.detail = format!("{}; {}", v.detail, z.notes);
        }
        v
    });
    report(8, "invariants and properties", &mut || {
        let mut failed = Vec::new();
        for (name, check) in common::properties::ALL {
            if let Err(msg) = check() {
                failed.push(format!("{name}: {msg}"));
            }
        }
        let n = common::properties::ALL.len();
        Verdict {
            pass: failed.is_empty(),
            detail: if failed.is_empty() { format!("{n} properties") } else { failed.join("; ") },
        }
    });
    report(9, "lognormal service during-service pmf", &mut || {
        let r = suite(suites::fig6, &opts);
        let mut v = from_reports(&r);
        v.detail = format!("{}; {}", v.detail, r.iter().map(|r| r.notes.as_str()).collect::<Vec<_>>().join("; "));
        v
    });

    if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
