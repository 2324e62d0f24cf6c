use std::fs;
use std::path::Path;
use std::process::{Command, Output};
use tempfile::TempDir;

fn lab(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_overlap-lab"))
        .args(args)
        .current_dir(cwd)
        .env_remove("OVERLAP_LAB_SEED")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn column(path: &Path, name: &str) -> Vec<f64> {
    let mut r = csv::Reader::from_path(path).unwrap();
    let idx = r.headers().unwrap().iter().position(|h| h == name).unwrap();
    r.records().map(|rec| rec.unwrap()[idx].parse().unwrap()).collect()
}

const DETERMINISTIC: &str = r#"{
    "arrival": {"type": "renewal", "interarrival": {"type": "deterministic", "value": 1.0}},
    "service": {"type": "deterministic", "value": 0.5},
    "stop": {"customers": 3},
    "seed": 1
}"#;

#[test]
fn deterministic_run_writes_three_customers() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("det.json"), DETERMINISTIC).unwrap();
    let o = lab(&["simulate", "--config", "det.json", "--out", "out"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = fs::read_to_string(dir.path().join("out/customers.csv")).unwrap();
    assert_eq!(text, "index,arrival,service,departure\n1,1,0.5,1.5\n2,2,0.5,2.5\n3,3,0.5,3.5\n");
    assert!(fs::read_to_string(dir.path().join("out/counts.csv")).unwrap().starts_with("index,upon,during,total\n"));
    assert!(fs::read_to_string(dir.path().join("out/overlaps_k1.csv")).unwrap().starts_with("n,k,overlap\n"));
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("out/report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["seed"], 1);
    assert!(!dir.path().join("out/residual_counts.csv").exists());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    let args = |out: &'static str| {
        vec!["simulate", "--arrival-rate", "0.5", "--service", "exp(1)", "--customers", "100000", "--seed", "42", "--delta", "0.5", "--out", out]
    };
    assert_eq!(code(&lab(&args("a"), dir.path())), 0);
    assert_eq!(code(&lab(&args("b"), dir.path())), 0);
    let mut names: Vec<_> = fs::read_dir(dir.path().join("a")).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert_eq!(names.len(), 8);
    for name in names {
        let a = fs::read(dir.path().join("a").join(&name)).unwrap();
        let b = fs::read(dir.path().join("b").join(&name)).unwrap();
        if name == "report.json" {
            // The echoed output directory is the only difference.
            let strip = |v: Vec<u8>| String::from_utf8(v).unwrap().replace("\"output_dir\": \"a\"", "").replace("\"output_dir\": \"b\"", "");
            assert_eq!(strip(a), strip(b));
        } else {
            assert_eq!(a, b, "{name:?} differs");
        }
    }
}

#[test]
fn echoed_config_reproduces_the_run() {
    let dir = TempDir::new().unwrap();
    let o = lab(&["simulate", "--arrival-rate", "2", "--service", "uniform(0,1)", "--customers", "2000", "--out", "first"], dir.path());
    assert_eq!(code(&o), 0);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("first/report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["seed"], 7, "default seed is echoed");
    fs::write(dir.path().join("echo.json"), serde_json::to_string(&report["config"]).unwrap()).unwrap();
    assert_eq!(code(&lab(&["simulate", "--config", "echo.json", "--out", "second"], dir.path())), 0);
    for f in ["customers.csv", "counts.csv", "overlaps_k3.csv"] {
        assert_eq!(fs::read(dir.path().join("first").join(f)).unwrap(), fs::read(dir.path().join("second").join(f)).unwrap(), "{f}");
    }
}

#[test]
fn seed_falls_back_to_environment() {
    let dir = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_overlap-lab"))
        .args(["simulate", "--arrival-rate", "1", "--service", "exp(1)", "--customers", "10", "--out", "o"])
        .env("OVERLAP_LAB_SEED", "99")
        .current_dir(dir.path())
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("o/report.json")).unwrap()).unwrap();
    assert_eq!(report["config"]["seed"], 99);
}

#[test]
fn mm_counts_average_twenty() {
    let dir = TempDir::new().unwrap();
    let o = lab(&["simulate", "--arrival-rate", "10", "--service", "exp(1)", "--customers", "100000", "--seed", "5", "--out", "o"], dir.path());
    assert_eq!(code(&o), 0);
    let total = column(&dir.path().join("o/counts.csv"), "total");
    let mean = total.iter().sum::<f64>() / total.len() as f64;
    assert!((mean - 20.0).abs() < 0.6, "{mean}");
}

#[test]
fn configuration_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("bad.json"), r#"{"sed": 1}"#).unwrap();
    assert_eq!(code(&lab(&["simulate", "--config", "bad.json"], dir.path())), 2);
    fs::write(dir.path().join("neg.json"), DETERMINISTIC.replace("0.5", "-0.5")).unwrap();
    assert_eq!(code(&lab(&["simulate", "--config", "neg.json"], dir.path())), 2);
    assert_eq!(code(&lab(&["simulate", "--customers", "10"], dir.path())), 2);
    assert_eq!(code(&lab(&["analytic", "no-such-formula"], dir.path())), 2);
    assert_eq!(code(&lab(&["analytic", "overlap-tail-mm", "--mu", "1", "--k", "1", "--t", "0"], dir.path())), 2);
    assert_eq!(code(&lab(&["analytic", "overlap-tail-mm", "--lambda", "-1", "--mu", "1", "--k", "1", "--t", "0"], dir.path())), 2);
    assert_eq!(code(&lab(&["verify", "fig9"], dir.path())), 2);
}

#[test]
fn missing_files_exit_one() {
    let dir = TempDir::new().unwrap();
    assert_eq!(code(&lab(&["simulate", "--config", "absent.json"], dir.path())), 1);
    assert_eq!(code(&lab(&["plotdata", "absent.csv"], dir.path())), 1);
}

#[test]
fn analytic_values() {
    let dir = TempDir::new().unwrap();
    let run = |args: &[&str]| {
        let o = lab(args, dir.path());
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        stdout(&o)
    };
    assert_eq!(run(&["analytic", "overlap-tail-mm", "--lambda", "0.5", "--mu", "1", "--k", "1", "--t", "0"]), "0.333333333\n");
    assert_eq!(run(&["analytic", "total-pmf-mm", "--lambda", "10", "--mu", "1", "--t", "0", "--k", "0"]), "0.0909090909\n");
    // 1 - (10/11) e^{-1/2}
    assert_eq!(run(&["analytic", "residual-during", "--lambda", "10", "--mu", "1", "--delta", "0.5", "--k", "0"]), "0.448608491\n");
    assert_eq!(run(&["analytic", "total-mean-var-mm", "--lambda", "10", "--mu", "1", "--t", "5", "--form", "printed"]), "mean,variance\n19.9326205,109.932621\n");
    let pmf = run(&["analytic", "during-pmf", "--lambda", "10", "--mu", "1"]);
    assert!(pmf.starts_with("k,p\n0,0.0909090909\n1,0.0826446281\n"));
    let curve = run(&["analytic", "overlap-tail-mm", "--lambda", "0.5", "--mu", "1", "--k", "2", "--t-max", "2", "--points", "5"]);
    assert_eq!(curve.lines().count(), 6);
    let json: serde_json::Value = serde_json::from_str(&run(&["analytic", "during-pmf", "--lambda", "3", "--service", "uniform(0,2)", "--format", "json"])).unwrap();
    let total: f64 = json["probs"].as_array().unwrap().iter().map(|p| p.as_f64().unwrap()).sum::<f64>() + json["tail"].as_f64().unwrap();
    assert!((total - 1.0).abs() < 1e-8);
    assert_eq!(run(&["analytic", "window-mean-mtd", "--profile", "0:5,5:15", "--horizon", "10", "--delta", "1", "--t", "5"]), "20\n");
}

#[test]
fn verify_fig1_2_passes_and_reruns_identically() {
    let dir = TempDir::new().unwrap();
    let o = lab(&["verify", "fig1-2", "--n", "100000", "--seed", "7", "--out", "v"], dir.path());
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let text = fs::read_to_string(dir.path().join("v/report.json")).unwrap();
    let reports: Vec<serde_json::Value> = serde_json::from_str(&text).unwrap();
    assert_eq!(reports.len(), 16);
    assert!(reports.iter().all(|r| r["pass"] == true && r["seed"] == 7));
    for k in 1..=4 {
        assert!(reports.iter().any(|r| r["check"] == format!("fig1-2/k{k}/positive-ks")));
    }
    let o = lab(&["verify", "--config", "v/config.json", "--out", "w"], dir.path());
    assert_eq!(code(&o), 0);
    assert_eq!(text, fs::read_to_string(dir.path().join("w/report.json")).unwrap());
}

#[test]
fn verify_fig3_passes() {
    let dir = TempDir::new().unwrap();
    let o = lab(&["verify", "fig3", "--out", "v"], dir.path());
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    assert!(stdout(&o).contains("PASS fig3/k4/ks"));
}

#[test]
fn verify_variance_arbitration_names_a_variant() {
    let dir = TempDir::new().unwrap();
    let o = lab(&["verify", "variance-arbitration", "--out", "v"], dir.path());
    assert_eq!(code(&o), 0, "{}", stdout(&o));
    let reports: Vec<serde_json::Value> = serde_json::from_str(&fs::read_to_string(dir.path().join("v/report.json")).unwrap()).unwrap();
    let z = reports.iter().find(|r| r["check"] == "variance-arbitration/supported-z").unwrap();
    assert!(z["notes"].as_str().unwrap().contains("supported variant: λ²/μ² + (λ/μ)(2 - e^{-μt})"));
    assert_eq!(z["n"], 1_000_000);
}

#[test]
fn failed_checks_exit_three_with_reports() {
    let dir = TempDir::new().unwrap();
    let o = lab(&["verify", "fig7", "--n", "2000", "--tv-max", "0", "--out", "v"], dir.path());
    assert_eq!(code(&o), 3);
    let reports: Vec<serde_json::Value> = serde_json::from_str(&fs::read_to_string(dir.path().join("v/report.json")).unwrap()).unwrap();
    assert!(reports.iter().any(|r| r["pass"] == false));
}

#[test]
fn plotdata_histograms() {
    let dir = TempDir::new().unwrap();
    let o = lab(&["simulate", "--arrival-rate", "0.5", "--service", "exp(1)", "--customers", "20000", "--seed", "3", "--out", "s"], dir.path());
    assert_eq!(code(&o), 0);

    assert_eq!(code(&lab(&["plotdata", "s/overlaps_k1.csv", "--bins", "50"], dir.path())), 0);
    let hist = dir.path().join("s/overlaps_k1_hist.csv");
    assert!(fs::read_to_string(&hist).unwrap().starts_with("bin_left,bin_right,count,density\n"));
    let (l, r, d) = (column(&hist, "bin_left"), column(&hist, "bin_right"), column(&hist, "density"));
    assert_eq!(d.len(), 50);
    let integral: f64 = l.iter().zip(&r).zip(&d).map(|((a, b), p)| (b - a) * p).sum();
    assert!((integral - 1.0).abs() < 1e-9, "{integral}");
    let cdf = dir.path().join("s/overlaps_k1_cdf.csv");
    assert!(fs::read_to_string(&cdf).unwrap().starts_with("x,F(x)\n"));
    assert_eq!(*column(&cdf, "F(x)").last().unwrap(), 1.0);

    assert_eq!(code(&lab(&["plotdata", "s/counts.csv"], dir.path())), 0);
    let hist = dir.path().join("s/counts_hist.csv");
    let (l, r, d) = (column(&hist, "bin_left"), column(&hist, "bin_right"), column(&hist, "density"));
    assert!(l.iter().zip(&r).all(|(a, b)| b - a == 1.0 && (a + 0.5).fract() == 0.0));
    assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
}

#[test]
fn plotdata_empty_positive_part_is_header_only() {
    let dir = TempDir::new().unwrap();
    // Service so short that no two customers ever overlap.
    let o = lab(&["simulate", "--arrival-rate", "0.01", "--service", "exp(1e6)", "--customers", "500", "--lags", "1", "--out", "s"], dir.path());
    assert_eq!(code(&o), 0);
    let o = lab(&["plotdata", "s/overlaps_k1.csv"], dir.path());
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("warning"));
    assert_eq!(fs::read_to_string(dir.path().join("s/overlaps_k1_hist.csv")).unwrap(), "bin_left,bin_right,count,density\n");
    assert_eq!(fs::read_to_string(dir.path().join("s/overlaps_k1_cdf.csv")).unwrap(), "x,F(x)\n");
}

#[test]
fn json_format_mirrors_csv() {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("det.json"), DETERMINISTIC).unwrap();
    let o = lab(&["simulate", "--config", "det.json", "--format", "csv,json", "--out", "o"], dir.path());
    assert_eq!(code(&o), 0);
    let rows: Vec<serde_json::Value> = serde_json::from_str(&fs::read_to_string(dir.path().join("o/customers.json")).unwrap()).unwrap();
    assert_eq!(rows.len(), 3);
    assert_eq!(rows[2]["departure"], 3.5);
}
