use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn consep(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_consep")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> String {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p.to_string_lossy().into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

fn vertical_config(out: &Path) -> Value {
    json!({
        "grid": {"x_min": -4.0, "x_max": 4.0, "nx": 201, "t_max": 2.0, "nt": 801},
        "measure": {"type": "gaussian", "mean": 0.0, "variance": 1.0},
        "stopping": {"type": "zero"},
        "mc": {"n_paths": 4000, "seed": 17},
        "output": out,
    })
}

fn barrier_at(out: &Path, x: f64) -> f64 {
    let text = fs::read_to_string(out.join("barrier.csv")).unwrap();
    for line in text.lines().skip(1) {
        let (a, b) = line.split_once(',').unwrap();
        if (a.parse::<f64>().unwrap() - x).abs() < 1e-9 {
            return if b == "inf" { f64::INFINITY } else { b.parse().unwrap() };
        }
    }
    panic!("no node at {x}");
}

#[test]
fn solve_vertical_writes_barrier_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = write_config(dir.path(), "vertical.json", &vertical_config(&out));
    let o = consep(&["solve", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for x in [-1.0, 0.0, 1.6] {
        assert!((barrier_at(&out, x) - 1.0).abs() <= 3.0 * 0.0025, "R({x})");
    }
    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["command"], "solve");
    assert_eq!(manifest["exit_code"], 0);
    assert_eq!(manifest["config"]["grid"]["nx"], 201);
    let residual = read_json(&out.join("residual.json"));
    for key in ["potential_gap", "mass_unabsorbed", "e_tau", "V", "rel_gap"] {
        assert!(residual.get(key).is_some(), "{key}");
    }
}

#[test]
fn price_vertical_matches_the_closed_form() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let cfg = write_config(dir.path(), "vertical.json", &vertical_config(&out));
    let o = consep(&["price", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let p = read_json(&out.join("price.json"));
    let total = p["total"].as_f64().unwrap();
    assert!((total - 1.0 / 3.0).abs() < 0.01 / 3.0, "{total}");
    assert_eq!(p["M0"].as_f64().unwrap(), 0.0);
    assert!(p["info_value"].as_f64().unwrap().abs() < 1e-12);
    for f in ["lambda.csv", "h.csv", "delta.csv", "alpha.csv"] {
        assert!(out.join(f).exists(), "{f}");
    }
    assert!(fs::read_to_string(out.join("lambda.csv")).unwrap().starts_with("x,lambda\n"));
}

#[test]
fn verify_is_reproducible_from_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let cfg = write_config(dir.path(), "vertical.json", &vertical_config(&a));
    let o = consep(&["verify", "--config", &cfg, "--seed", "5", "--samples"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stdout));
    let o = consep(&["verify", "--config", &cfg, "--seed", "5", "--out", b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let (ra, rb) = (read_json(&a.join("report.json")), read_json(&b.join("report.json")));
    assert_eq!(ra, rb);
    assert_eq!(ra["seed"], 5);
    assert_eq!(ra["control_flagged"], true);
    assert_eq!(ra["subhedge"]["violations"], 0);
    let samples = fs::read_to_string(a.join("samples.csv")).unwrap();
    assert!(samples.starts_with("path_id,tau_lower,b_lower,tau,b_tau,payoff\n"));
    assert_eq!(samples.lines().count(), 4001);
}

#[test]
fn infeasible_information_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    let mut cfg = vertical_config(&out);
    cfg["stopping"] = json!({"type": "fixed_time", "t0": 1.5});
    let cfg = write_config(dir.path(), "infeasible.json", &cfg);
    let o = consep(&["solve", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let v = read_json(&out.join("verdict.json"));
    assert_eq!(v["feasible"], false);
    assert_eq!(v["rule"], "convex_order");
    assert_eq!(read_json(&out.join("manifest.json"))["exit_code"], 2);
}

#[test]
fn config_and_usage_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "bad.json", &json!({"grdi": {}}));
    assert_eq!(consep(&["solve", "--config", &cfg]).status.code(), Some(1));
    let missing = dir.path().join("missing.json");
    assert_eq!(consep(&["price", "--config", missing.to_str().unwrap()]).status.code(), Some(1));
    assert_eq!(consep(&["frobnicate"]).status.code(), Some(1));
    let cfg = write_config(
        dir.path(),
        "bad_rate.json",
        &json!({"stopping": {"type": "interval_exit", "a": -1.0, "b": 1.0, "rho": -1.0}}),
    );
    assert_eq!(consep(&["solve", "--config", &cfg]).status.code(), Some(1));
    assert_eq!(consep(&["--help"]).status.code(), Some(0));
}

#[test]
fn noarb_reports_the_drawdown_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let base = json!({
        "measure": {"type": "two_point", "lo": -1.0, "hi": 1.0},
        "stopping": {"type": "zero"},
    });
    let mut ok = base.clone();
    ok["noarb"] = json!({"drawdown": 2.0});
    ok["output"] = json!(dir.path().join("ok"));
    let cfg = write_config(dir.path(), "ok.json", &ok);
    assert_eq!(consep(&["noarb", "--config", &cfg]).status.code(), Some(0));
    let verdicts = read_json(&dir.path().join("ok").join("verdicts.json"));
    assert_eq!(verdicts.as_array().unwrap().len(), 2);

    let mut bad = base;
    bad["noarb"] = json!({"drawdown": 1.9});
    bad["output"] = json!(dir.path().join("bad"));
    let cfg = write_config(dir.path(), "bad.json", &bad);
    assert_eq!(consep(&["noarb", "--config", &cfg]).status.code(), Some(2));
    let v = read_json(&dir.path().join("bad").join("verdict.json"));
    assert_eq!(v["rule"], "azema_yor");
    assert!(v["witness"]["x"].is_number());
}

#[test]
fn sweep_is_monotone_and_bit_identical_on_rerun() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = json!({
        "grid": {"x_min": -4.0, "x_max": 4.0, "nx": 161, "t_max": 4.0, "nt": 401},
    });
    let cfg = write_config(dir.path(), "sweep.json", &cfg);
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = consep(&["sweep", "--config", &cfg, "--rho", "0.5:1.5:0.5", "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let text = fs::read_to_string(a.join("sweep.csv")).unwrap();
    assert_eq!(text, fs::read_to_string(b.join("sweep.csv")).unwrap());
    let rows: Vec<Vec<String>> = text.lines().skip(1).map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 4);
    assert_eq!(rows[3][0], "baseline");
    let totals: Vec<f64> = rows.iter().map(|r| r[5].parse().unwrap()).collect();
    assert!(totals[0] >= totals[1] && totals[1] >= totals[2]);
    assert!(totals[2] >= totals[3]);
    for r in &rows {
        assert!(a.join(&r[1]).exists() && a.join(&r[2]).exists());
        assert_eq!(r[6].parse::<f64>().unwrap(), totals[3]);
    }
    assert_eq!(
        fs::read(a.join("barrier_rho_1.csv")).unwrap(),
        fs::read(b.join("barrier_rho_1.csv")).unwrap()
    );
}
