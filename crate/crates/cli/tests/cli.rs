use std::path::Path;
use std::process::{Command, Output};

use heatlab_cli::tasks::ControlSummary;
use serde_json::{json, Value};

fn heatlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heatlab"))
        .args(args)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, name: &str, v: &Value) -> String {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p.to_string_lossy().into_owned()
}

fn base() -> Value {
    json!({
        "domain": {"a": 0.0, "b": 1.0, "n": 15},
        "time": {"T": 0.5, "steps": 32},
        "omega": [[0.3, 0.7]]
    })
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut r = csv::Reader::from_path(path).unwrap();
    let header = r.headers().unwrap().iter().map(String::from).collect();
    let rows = r
        .records()
        .map(|rec| rec.unwrap().iter().map(String::from).collect())
        .collect();
    (header, rows)
}

#[test]
fn solve_writes_one_row_per_node_and_level() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "solve.json", &base());
    let out = dir.path().join("field.csv");
    let o = heatlab(&["solve", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&out);
    assert_eq!(header, ["t", "x", "y"]);
    assert_eq!(rows.len(), 33 * 15);
    assert!(dir.path().join("field.summary.json").exists());
}

#[test]
fn same_seed_gives_identical_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = base();
    v["initial"] = json!({"kind": "random", "modes": 6});
    let cfg = write_config(dir.path(), "rand.json", &v);
    let run = |name: &str, seed: &str| {
        let out = dir.path().join(name);
        let o = heatlab(&[
            "solve",
            "--config",
            &cfg,
            "--seed",
            seed,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        std::fs::read(out).unwrap()
    };
    let a = run("a.csv", "17");
    assert_eq!(a, run("b.csv", "17"));
    assert_ne!(a, run("c.csv", "18"));
}

#[test]
fn overlapping_omega_exits_with_schema_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = base();
    v["omega"] = json!([[0.2, 0.5], [0.4, 0.8]]);
    let cfg = write_config(dir.path(), "bad.json", &v);
    let o = heatlab(&["hum", "--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let err: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "schema");
    assert!(err["message"].as_str().unwrap().contains("overlap"));
}

#[test]
fn unknown_key_and_missing_file() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = base();
    v["omgea"] = json!([[0.1, 0.2]]);
    let cfg = write_config(dir.path(), "typo.json", &v);
    assert_eq!(heatlab(&["solve", "--config", &cfg]).status.code(), Some(2));
    let missing = dir.path().join("nope.json");
    assert_eq!(
        heatlab(&["solve", "--config", missing.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn hum_summary_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "hum.json", &base());
    let out = dir.path().join("hum.csv");
    let o = heatlab(&["hum", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("hum.summary.json")).unwrap();
    let s: ControlSummary = serde_json::from_str(&text).unwrap();
    assert!(s.terminal_ratio < 1e-6 && s.converged);
    let again = serde_json::to_string_pretty(&s).unwrap();
    assert_eq!(serde_json::from_str::<ControlSummary>(&again).unwrap(), s);
    let (header, rows) = read_csv(&out);
    assert_eq!(header, ["t", "x", "h"]);
    assert!(rows.iter().all(|r| {
        let x: f64 = r[1].parse().unwrap();
        (0.3..0.7).contains(&x)
    }));
}

#[test]
fn sweep_keeps_input_order_and_records_failures() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = base();
    v["domain"]["n"] = json!(12);
    v["potential"] = json!({"kind": "constant", "value": 0.0});
    v["sweep"] = json!({
        "task": "obscost",
        "axis": "potential.value",
        "values": [0.0, 10.0, 20.0, 30.0, 40.0, 50.0, 60.0, 70.0, 80.0, 90.0, 100.0, "oops"]
    });
    let cfg = write_config(dir.path(), "sweep.json", &v);
    let out = dir.path().join("sweep.csv");
    let o = heatlab(&[
        "sweep",
        "--config",
        &cfg,
        "--jobs",
        "4",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&out);
    assert_eq!(header[..5], ["index", "value", "status", "error", "T"]);
    assert_eq!(rows.len(), 12);
    for (i, r) in rows.iter().enumerate() {
        assert_eq!(r[0], i.to_string());
    }
    assert!(rows[..11].iter().all(|r| r[2] == "ok"));
    assert_eq!(rows[11][2], "schema");
    let sup = header.iter().position(|h| h == "sup").unwrap();
    assert_eq!(rows[3][sup].parse::<f64>().unwrap(), 30.0);

    let serial = dir.path().join("serial.csv");
    let o = heatlab(&[
        "sweep",
        "--config",
        &cfg,
        "--jobs",
        "1",
        "--out",
        serial.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_eq!(
        std::fs::read(&out).unwrap(),
        std::fs::read(&serial).unwrap()
    );
}

#[test]
fn empty_sweep_is_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = base();
    v["sweep"] = json!({"task": "hum", "axis": "time.T", "values": []});
    let cfg = write_config(dir.path(), "empty.json", &v);
    let out = dir.path().join("empty.csv");
    let o = heatlab(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("index,value,status,error,"));
}

#[test]
fn longer_horizon_lowers_hum_cost() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = base();
    v["sweep"] = json!({
        "task": "hum",
        "axis": "time.T",
        "values": [0.25, 0.5, 1.0],
        "fit": {"x": "value", "y": "cost_l2", "candidates": [0.5, 1.0], "log_y": true}
    });
    let cfg = write_config(dir.path(), "horizon.json", &v);
    let out = dir.path().join("horizon.csv");
    let o = heatlab(&["sweep", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&out);
    let c = header.iter().position(|h| h == "cost_l2").unwrap();
    let cost: Vec<f64> = rows.iter().map(|r| r[c].parse().unwrap()).collect();
    assert_eq!(cost.len(), 3);
    assert!(cost[0] > cost[1] && cost[1] > cost[2], "{cost:?}");
    let summary: Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("horizon.summary.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(summary["fits"].as_array().unwrap().len(), 2);
}

#[test]
fn remaining_tasks_run() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = base();
    v["domain"]["n"] = json!(31);
    v["carleman"] = json!({"taus": [1.0, 10.0], "corpus_size": 4});
    let cfg = write_config(dir.path(), "carleman.json", &v);
    let out = dir.path().join("carleman.csv");
    let o = heatlab(&["carleman", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&out);
    assert_eq!(
        header,
        [
            "tau",
            "lambda",
            "lhs3",
            "lhs1",
            "lhs_neg1",
            "rhs_f",
            "rhs_local",
            "holds"
        ]
    );
    assert_eq!(rows.len(), 2);

    let mut v = base();
    v["domain"] = json!({"a": 0.0, "b": 0.5, "n": 63});
    v["omega"] = json!([[0.0, 0.25]]);
    v["spectral"] = json!({"amplitudes": [0.0, 25.0], "ladder_base": 600.0});
    let cfg = write_config(dir.path(), "spectral.json", &v);
    let out = dir.path().join("spectral.csv");
    let o = heatlab(&["spectral", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = read_csv(&out);
    assert_eq!(
        header,
        [
            "lambda_cut",
            "M",
            "omega_measure",
            "max_ratio",
            "K",
            "window_size"
        ]
    );
    assert_eq!(rows.len(), 8);

    let mut v = base();
    v["domain"]["n"] = json!(31);
    v["omega"] = json!([[0.125, 0.875]]);
    let cfg = write_config(dir.path(), "regctl.json", &v);
    let out = dir.path().join("regctl.csv");
    let o = heatlab(&["regctl", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let s: ControlSummary = serde_json::from_slice(&o.stdout).unwrap();
    assert!(s.holder_norm.is_some() && s.residual_norm.is_some());
}

#[test]
fn task_mismatch_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let mut v = base();
    v["task"] = json!("hum");
    let cfg = write_config(dir.path(), "m.json", &v);
    assert_eq!(heatlab(&["solve", "--config", &cfg]).status.code(), Some(2));
}
