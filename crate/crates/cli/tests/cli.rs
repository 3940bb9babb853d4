use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn halfspace(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_halfspace"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn verify_symbol_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let ok = halfspace(&["verify-symbol", "--kernel", "heat", "--class", "strong", "--N", "2"], dir.path());
    assert_eq!(code(&ok), 0, "{}", String::from_utf8_lossy(&ok.stdout));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("verify.json")).unwrap()).unwrap();
    assert_eq!(report["seminorms"].as_array().unwrap().len(), 3);
    assert_eq!(report["config"]["command"], "verify-symbol");

    let divergent = halfspace(&["verify-symbol", "--kernel", "constant-one", "--class", "strong", "--N", "1"], dir.path());
    assert_eq!(code(&divergent), 1);
    assert!(String::from_utf8_lossy(&divergent.stdout).contains("DIVERGENT"));

    assert_eq!(code(&halfspace(&["verify-symbol", "--kernel", "nosuch"], dir.path())), 2);
}

#[test]
fn opnorm_scan_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let args = [
        "scan", "--kind", "opnorm", "--kernel", "heat", "--points", "16", "--normal-count", "128", "--count", "8", "--expect-slope", "-0.5",
        "--slope-tolerance", "0.03",
    ];
    let first = halfspace(&args, dir.path());
    assert_eq!(code(&first), 0, "{}", String::from_utf8_lossy(&first.stdout));
    let csv = std::fs::read_to_string(dir.path().join("scan.csv")).unwrap();
    assert!(csv.lines().any(|l| l == "abs_mu,arg_mu,norm,slope,residual,seed"));
    assert!(csv.lines().next().unwrap().starts_with("# version: "));
    let slope: f64 = csv.lines().find_map(|l| l.strip_prefix("# slope: ")).unwrap().parse().unwrap();
    assert!((slope + 0.5).abs() < 0.03);
    let jsonl = std::fs::read_to_string(dir.path().join("scan.jsonl")).unwrap();
    let rec: Value = serde_json::from_str(jsonl.lines().next().unwrap()).unwrap();
    assert_eq!(rec["schema_version"], 1);
    assert_eq!(rec["config"]["run"]["grid"]["points_per_dim"], 16);

    let other = tempfile::tempdir().unwrap();
    assert_eq!(code(&halfspace(&args, other.path())), 0);
    for name in ["scan.csv", "scan.jsonl"] {
        assert_eq!(std::fs::read(dir.path().join(name)).unwrap(), std::fs::read(other.path().join(name)).unwrap());
    }
}

#[test]
fn failed_slope_claim_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let o = halfspace(&["scan", "--points", "16", "--normal-count", "128", "--count", "6", "--expect-slope", "0.5"], dir.path());
    assert_eq!(code(&o), 1);
}

#[test]
fn kpp_worked_point() {
    let dir = tempfile::tempdir().unwrap();
    let o = halfspace(&["solve", "--problem", "kpp", "--mu", "1", "--d", "1", "--dprime", "1", "--k", "1", "--g", "const"], dir.path());
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rec: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("resolvent.json")).unwrap()).unwrap();
    for (re, im) in rec["v"]["re"].as_array().unwrap().iter().zip(rec["v"]["im"].as_array().unwrap()) {
        assert!((re.as_f64().unwrap() - 2.0 / 3.0).abs() < 1e-10 && im.as_f64().unwrap().abs() < 1e-10);
    }
    for r in rec["diagnostics"]["residuals"].as_array().unwrap() {
        if !r["grid"].as_bool().unwrap() {
            assert!(r["max"].as_f64().unwrap() < 1e-8);
        }
    }
    assert_eq!(rec["config"]["kpp"]["d_prime"], 1.0);
}

#[test]
fn heat_evolution_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let o = halfspace(
        &["solve", "--problem", "heat-dynbc", "--evolve", "--dt", "0.01", "--T", "1", "--points", "16", "--normal-count", "64", "--ratio", "1.15"],
        dir.path(),
    );
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("trajectory.jsonl")).unwrap();
    let recs: Vec<Value> = text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(recs[0]["record"], "config");
    assert_eq!(recs.len(), 101);
    let inc: Vec<f64> = recs[1..].iter().map(|r| r["increment"].as_f64().unwrap()).collect();
    // one step of start-up from zero data, then monotone approach to the steady state
    assert!(inc[2..].windows(2).all(|w| w[1] < w[0]));
    assert!(inc[99] < 0.6 * inc[0]);
    assert!(recs[1..].iter().all(|r| r["residual"].as_f64().unwrap() < 1e-8));
}

#[test]
fn usage_domain_and_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&halfspace(&["solve", "--problem", "heat-dynbc", "--mu", "0"], dir.path())), 2);
    // outside the sector |arg mu| < pi/4
    assert_eq!(code(&halfspace(&["solve", "--problem", "ch", "--mu", "1", "--mu-arg", "1.2"], dir.path())), 2);
    assert_eq!(code(&halfspace(&["solve", "--problem", "nosuch"], dir.path())), 2);

    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"grid": {"points_per_dim": 16}, "unknown_key": true}"#).unwrap();
    let o = halfspace(&["scan", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown_key"));

    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let o = halfspace(&["lemma", "--a", "0.6", "--rho", "2", "--t", "0.1"], &blocker.join("sub"));
    assert_eq!(code(&o), 3);
}

#[test]
fn config_file_overrides_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"command": "lemma", "a": 0.6, "rho": 2.0, "t": 0.1}"#).unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_halfspace"))
        .args(["lemma", "--a", "0.3", "--rho", "1.5", "--t", "10", "--print-config", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(code(&o), 0);
    let resolved: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(resolved["a"], 0.6);
    assert_eq!(resolved["t"], 0.1);
    let run = halfspace(&["lemma", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stdout));
}
