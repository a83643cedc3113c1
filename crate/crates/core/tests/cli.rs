mod common;

use std::fs;
use std::path::Path;

use schrodinger_measures::cli::{csv_banner, main_with_args, validate_config, Command, Grid};
use schrodinger_measures::schrodinger::C64;

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut full = vec!["schrodinger-measures"];
    full.extend_from_slice(args);
    let code = main_with_args(full, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn free_m_function_csv() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) = run(&[
        "m-function", "--potential", "builtin:free", "--out", path(dir.path()), "--z-grid", "-4:4:5", "--eta", "0.5",
        "--side", "plus",
    ]);
    assert_eq!(code, 0, "{err}");
    let text = fs::read_to_string(dir.path().join("m_function.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(format!("{}\n", lines.next().unwrap()), csv_banner());
    assert!(csv_banner().contains("metric=dyadic-tent-v1"));
    assert_eq!(lines.next().unwrap(), "x,side,re_z,im_z,re_m,im_m,R,disk_radius");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').filter_map(|c| c.parse().ok()).collect())
        .collect();
    assert_eq!(rows.len(), 5);
    for r in rows {
        // x, re_z, im_z, re_m, im_m, ...
        let z = C64::new(r[1], r[2]);
        let want = C64::i() * common::sqrt_upper(z);
        assert!((C64::new(r[3], r[4]) - want).norm() < 1e-6);
    }
}

#[test]
fn soliton_reflectionless_report() {
    let dir = tempfile::tempdir().unwrap();
    let (code, _, err) =
        run(&["reflectionless", "--potential", "builtin:soliton", "--out", path(dir.path()), "--window", "0.1:5"]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("reflectionless.json")).unwrap()).unwrap();
    assert!(v["max_defect"].as_f64().unwrap() < 5e-2);
    assert_eq!(v["reflectionless_on_grid"], true);
    let csv = fs::read_to_string(dir.path().join("reflectionless.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2 + 20);
}

#[test]
fn outputs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let (code, _, _) = run(&["omega", "--potential", "builtin:cos", "--out", path(d.path()), "--x-grid", "100:106:61"]);
        assert_eq!(code, 0);
        let (code, _, _) =
            run(&["m-function", "--potential", "builtin:soliton", "--out", path(d.path()), "--z-grid", "-1:3:4"]);
        assert_eq!(code, 0);
    }
    for name in ["omega_assignment.csv", "omega_representatives.json", "m_function.csv"] {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name}");
    }
}

#[test]
fn minimal_config_gets_defaults() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.toml");
    fs::write(&cfg, "subcommand = \"drcheck\"\npotential = \"builtin:exp-decay\"\nout = \"results\"\n").unwrap();
    let c = validate_config(&cfg).unwrap();
    assert_eq!(c.subcommand, Command::Drcheck);
    assert_eq!(c.out, dir.path().join("results"));
    assert_eq!(c.tol, 1e-10);
    assert_eq!(c.metric_terms, 40);
    assert_eq!(c.x_max, 100.0);
    assert_eq!(c.samples, 101);
    assert_eq!(c.z_grid, Grid { lo: -2.0, hi: 2.0, count: 5 });
    let (code, out, _) = run(&["--config", path(&cfg), "--check"]);
    assert_eq!(code, 0);
    assert!(out.contains("\"drcheck\""));
    let (code, _, err) = run(&["--config", path(&cfg)]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("results/drcheck.json")).unwrap()).unwrap();
    assert_eq!(v["convergent"], true);
}

#[test]
fn config_errors_name_fields() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    fs::write(&cfg, "subcommand = \"m-function\"\npotential = \"builtin:free\"\ntol = -1e-3\n").unwrap();
    let e = validate_config(&cfg).unwrap_err();
    assert_eq!(e.len(), 1);
    assert_eq!(e[0].field, "tol");
    let (code, _, err) = run(&["--config", path(&cfg)]);
    assert_eq!(code, 2);
    let v: serde_json::Value = serde_json::from_str(err.lines().next().unwrap()).unwrap();
    assert_eq!(v["fields"][0]["field"], "tol");

    fs::write(&cfg, "subcommand = \"teleport\"\n").unwrap();
    let e = validate_config(&cfg).unwrap_err();
    let all = e.iter().map(|f| f.reason.clone()).collect::<Vec<_>>().join(" ");
    for c in Command::ALL {
        assert!(all.contains(c.name()), "{all}");
    }

    let (code, _, _) = run(&["m-function", "--potential", "builtin:free", "--tol", "-1"]);
    assert_eq!(code, 2);
    let (code, _, _) = run(&["m-function", "--potential", "missing.json"]);
    assert_eq!(code, 2);
}

#[test]
fn out_of_coverage_prediction_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = path(dir.path());
    let (code, _, err) = run(&[
        "oracle-train", "--potential", "builtin:cos", "--out", d, "--shifts", "100:106:40", "--past", "4", "--delta", "0.02",
        "--epsilon", "0.05",
    ]);
    assert_eq!(code, 0, "{err}");
    let model = dir.path().join("oracle_model.json");
    let (code, _, err) = run(&["oracle-predict", "--potential", "builtin:free", "--model", path(&model), "--out", d]);
    assert_eq!(code, 1);
    let v: serde_json::Value = serde_json::from_str(err.lines().next().unwrap()).unwrap();
    assert_eq!(v["error"], "out_of_coverage");
    let (code, _, err) =
        run(&["oracle-predict", "--potential", "builtin:cos", "--model", path(&model), "--out", d, "--x", "151.3"]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("prediction.json")).unwrap()).unwrap();
    let w: f64 = v["weights"].as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).sum();
    assert!((w - 1.0).abs() < 1e-12);
}

#[test]
fn potential_files_are_read() {
    let dir = tempfile::tempdir().unwrap();
    let pot = dir.path().join("delta.json");
    fs::write(&pot, r#"{"atoms": [[0.5, 1.0]], "density": {"breaks": [], "values": []}}"#).unwrap();
    let (code, _, err) = run(&[
        "shift-trace", "--potential", path(&pot), "--out", path(dir.path()), "--x-grid", "0:4:5",
    ]);
    assert_eq!(code, 0, "{err}");
    let csv = fs::read_to_string(dir.path().join("shift_trace.csv")).unwrap();
    assert!(csv.starts_with("# schrodinger-measures "));
    assert_eq!(csv.lines().nth(1).unwrap(), "x,distance");
    assert_eq!(csv.lines().count(), 2 + 5);
}
