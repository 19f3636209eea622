use haarspec_cli::{run, Args, Command, Config};
use std::path::Path;
use std::process::Command as Proc;

fn bin() -> Proc {
    Proc::new(env!("CARGO_BIN_EXE_haarspec"))
}

fn exit_code(args: &[&str]) -> i32 {
    bin().args(args).output().unwrap().status.code().unwrap()
}

fn run_to(dir: &Path, name: &str, args: &[&str]) -> String {
    let out = dir.join(name);
    let mut argv = vec!["haarspec"];
    argv.extend_from_slice(args);
    let o = out.to_str().unwrap().to_string();
    argv.extend_from_slice(&["--out", &o]);
    assert_eq!(run(argv), 0, "{args:?}");
    std::fs::read_to_string(out).unwrap()
}

fn table(text: &str) -> (Vec<String>, Vec<String>, Vec<Vec<String>>) {
    let header: Vec<String> = text.lines().filter_map(|l| l.strip_prefix("# ")).map(String::from).collect();
    let mut body = text.lines().filter(|l| !l.starts_with('#'));
    let cols: Vec<String> = body.next().unwrap().split(',').map(String::from).collect();
    let rows = body.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, cols, rows)
}

fn col(text: &str, name: &str) -> Vec<String> {
    let (_, cols, rows) = table(text);
    let k = cols.iter().position(|c| c == name).unwrap();
    rows.into_iter().map(|r| r[k].clone()).collect()
}

fn num(text: &str, name: &str) -> Vec<f64> {
    col(text, name).iter().map(|s| s.parse().unwrap()).collect()
}

#[test]
fn header_reproduces_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let first = run_to(dir.path(), "a.csv", &["simulate", "--delta", "3", "--n", "40", "--trials", "3", "--seed", "7"]);
    let (header, _, _) = table(&first);
    assert!(header.contains(&"command = simulate".to_string()));
    assert!(header.contains(&"seed = 7".to_string()));
    assert!(header.contains(&"n = 40".to_string()));
    let cfg = dir.path().join("echo.cfg");
    std::fs::write(&cfg, header.join("\n")).unwrap();
    let again = run_to(dir.path(), "b.csv", &["--config", cfg.to_str().unwrap()]);
    assert_eq!(first, again);
    // the output file itself works as a config
    let third = run_to(dir.path(), "c.csv", &["--config", dir.path().join("a.csv").to_str().unwrap()]);
    assert_eq!(first, third);
}

#[test]
fn outputs_with_derived_header_lines_reproduce() {
    let dir = tempfile::tempdir().unwrap();
    let first = run_to(dir.path(), "a.csv", &["bulk-density", "--delta", "3", "--grid", "0.1:0.1:0.8"]);
    assert!(first.contains("# lambda_r = "));
    let again = run_to(dir.path(), "b.csv", &["--config", dir.path().join("a.csv").to_str().unwrap()]);
    assert_eq!(first, again);
    let json = run_to(dir.path(), "a.json", &["optimal-sweep", "--delta", "4", "--grid", "0.1,0.01", "--format", "json"]);
    let back = run_to(dir.path(), "b.json", &["--config", dir.path().join("a.json").to_str().unwrap()]);
    assert_eq!(json, back);
}

#[test]
fn flags_override_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.cfg");
    std::fs::write(&cfg, "command = theory-curve\ntrimmer = lal\ndelta = 2.5\n").unwrap();
    use clap::Parser;
    let args = Args::parse_from(["haarspec", "--config", cfg.to_str().unwrap(), "--trimmer", "mm"]);
    let c = Config::resolve(&args).unwrap();
    assert_eq!(c.command, Command::TheoryCurve);
    assert_eq!(c.trimmer, "mm");
    assert_eq!(c.delta, Some(2.5));
}

#[test]
fn simulate_is_byte_identical_across_runs_and_threads() {
    let dir = tempfile::tempdir().unwrap();
    let base = ["simulate", "--delta-grid", "2:1:3", "--n", "60", "--trials", "6", "--seed", "3"];
    let a = run_to(dir.path(), "a.csv", &base);
    let b = run_to(dir.path(), "b.csv", &base);
    let mut serial = base.to_vec();
    serial.extend_from_slice(&["--threads", "1"]);
    let c = run_to(dir.path(), "c.csv", &serial);
    let mut par = base.to_vec();
    par.extend_from_slice(&["--threads", "4"]);
    let d = run_to(dir.path(), "d.csv", &par);
    assert_eq!(a, b);
    assert_eq!(a, c);
    assert_eq!(a, d);
}

#[test]
fn trial_dump_has_one_record_per_trial() {
    let dir = tempfile::tempdir().unwrap();
    let dump = dir.path().join("t.jsonl");
    run_to(dir.path(), "a.csv", &["simulate", "--delta", "3", "--n", "30", "--trials", "4", "--dump", dump.to_str().unwrap()]);
    let text = std::fs::read_to_string(dump).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    for l in lines {
        let v: serde_json::Value = serde_json::from_str(l).unwrap();
        for k in ["seed", "lambda1_hat", "overlap", "iterations", "a_m"] {
            assert!(v.get(k).is_some(), "{k} missing in {l}");
        }
    }
}

#[test]
fn exit_codes() {
    assert_eq!(exit_code(&["theory-curve", "--delta", "3"]), 0);
    assert_eq!(exit_code(&["theory-curve", "--delta", "0.5"]), 1);
    assert_eq!(exit_code(&["theory-curve"]), 1);
    assert_eq!(exit_code(&["bogus"]), 1);
    assert_eq!(exit_code(&["theory-curve", "--trimmer", "nope", "--delta", "3"]), 1);
    assert_eq!(exit_code(&["phase-transition", "--trimmer", "const"]), 2);
    assert_eq!(exit_code(&["theory-curve", "--trimmer", "lal", "--delta", "1e12"]), 3);
}

#[test]
fn opt_eps_curve_has_transition_at_two() {
    let dir = tempfile::tempdir().unwrap();
    let t = run_to(dir.path(), "a.csv", &["theory-curve", "--trimmer", "opt-eps", "--eps", "1e-3", "--delta-grid", "1.1:0.1:6"]);
    let d = num(&t, "delta");
    let r = num(&t, "rho2_limit");
    assert_eq!(d.len(), 50);
    assert!(d.windows(2).all(|w| w[1] > w[0]));
    let mut prev = 0.0;
    for (d, r) in d.iter().zip(&r) {
        if *d <= 2.0 {
            assert!(r.abs() < 1e-6, "rho2 {r} at {d}");
        } else if *d >= 2.1 {
            assert!(*r > prev, "rho2 {r} at {d}");
            prev = *r;
        }
    }
}

#[test]
fn constant_trimmer_gives_zero_overlap() {
    let dir = tempfile::tempdir().unwrap();
    let t = run_to(dir.path(), "a.csv", &["theory-curve", "--trimmer", "const", "--delta-grid", "1.5:0.5:6"]);
    assert!(num(&t, "rho2_limit").iter().all(|&r| r == 0.0));
}

#[test]
fn opt_eps_dominates_builtins() {
    let dir = tempfile::tempdir().unwrap();
    let rho = |name: &str, extra: &[&str]| {
        let mut a = vec!["theory-curve", "--trimmer", name, "--delta", "4"];
        a.extend_from_slice(extra);
        num(&run_to(dir.path(), &format!("{name}.csv"), &a), "rho2_limit")[0]
    };
    let best = rho("opt-eps", &["--eps", "1e-2"]);
    assert!(best >= rho("mm", &[]) - 1e-9);
    assert!(best >= rho("lal", &[]) - 1e-9);
}

#[test]
fn bulk_density_outside_support() {
    let dir = tempfile::tempdir().unwrap();
    let t = run_to(dir.path(), "a.csv", &["bulk-density", "--delta", "3", "--grid", "0.02:0.02:1.2"]);
    let (header, _, _) = table(&t);
    let lr: f64 = header.iter().find_map(|h| h.strip_prefix("lambda_r = ")).unwrap().parse().unwrap();
    let x = num(&t, "x");
    let rho = num(&t, "rho");
    assert!(rho.iter().all(|&r| r >= 0.0));
    assert!(col(&t, "converged").iter().all(|c| c == "1"));
    let above = run_to(dir.path(), "b.csv", &["bulk-density", "--delta", "3", "--grid", &format!("{}:0.05:3", lr + 0.01)]);
    assert!(num(&above, "rho").iter().all(|&r| r < 1e-6));
    assert!(x.iter().zip(&rho).any(|(x, r)| *x < lr && *r > 0.1));
}

#[test]
fn bulk_density_with_empirical_overlay() {
    let dir = tempfile::tempdir().unwrap();
    let t = run_to(dir.path(), "a.csv", &["bulk-density", "--delta", "3", "--grid", "0.05:0.05:1", "--n", "100", "--seed", "2"]);
    let (header, cols, _) = table(&t);
    assert!(cols.contains(&"empirical_density".to_string()));
    assert!(header.iter().any(|h| h.starts_with("empirical_m = 300")));
    assert!(num(&t, "empirical_density").iter().all(|&r| r >= 0.0));
}

#[test]
fn mm_transition_matches_regime_column() {
    let dir = tempfile::tempdir().unwrap();
    let pt = run_to(dir.path(), "a.csv", &["phase-transition", "--trimmer", "mm"]);
    let dt = num(&pt, "delta_t")[0];
    let curve = run_to(dir.path(), "b.csv", &["theory-curve", "--trimmer", "mm", "--delta-grid", "1.1:0.05:6"]);
    for (d, reg) in num(&curve, "delta").iter().zip(col(&curve, "regime")) {
        if *d < dt - 1e-6 {
            assert_eq!(reg, "uninformative", "delta {d}");
        } else if *d > dt + 1e-6 {
            assert_eq!(reg, "informative", "delta {d}");
        }
    }
}

#[test]
fn optimal_sweep_output() {
    let dir = tempfile::tempdir().unwrap();
    let t = run_to(dir.path(), "a.csv", &["optimal-sweep", "--delta", "4", "--grid", "0.3,0.1,0.03,0.01"]);
    let (header, _, _) = table(&t);
    assert!(header.contains(&"grid = 0.3,0.1,0.03,0.01".to_string()));
    assert!(header.contains(&"gap_monotone(delta=4) = true".to_string()));
    let gap = num(&t, "gap");
    assert!(gap.iter().all(|&g| g >= -1e-9));
    assert!(*gap.last().unwrap() < 1e-2);
    let low = run_to(dir.path(), "b.csv", &["optimal-sweep", "--delta", "1.5", "--grid", "0.1,0.01,0.001"]);
    assert!(num(&low, "rho2_eps").iter().all(|&r| r == 0.0));
}

#[test]
fn json_mirrors_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = run_to(dir.path(), "a.csv", &["theory-curve", "--delta-grid", "2:1:4"]);
    let json = run_to(dir.path(), "a.json", &["theory-curve", "--delta-grid", "2:1:4", "--format", "json"]);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let rows = v["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for (r, want) in rows.iter().zip(num(&csv, "rho2_limit")) {
        assert_eq!(r["rho2_limit"].as_f64().unwrap(), want);
    }
}
