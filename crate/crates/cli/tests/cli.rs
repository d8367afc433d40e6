use std::path::Path;
use std::process::{Command, Output};

fn permadyn(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_permadyn"))
        .args(args)
        .env_remove("PERMADYN_MEM_CAP_MB")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8 output")
}

/// Header and data rows with the `#` metadata stripped.
fn table(o: &Output) -> (Vec<String>, Vec<Vec<String>>) {
    let text = stdout(o);
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().expect("header").split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    (header, rows)
}

fn column(header: &[String], rows: &[Vec<String>], name: &str) -> Vec<String> {
    let k = header.iter().position(|h| h == name).unwrap_or_else(|| panic!("no column {name}"));
    rows.iter().map(|r| r[k].clone()).collect()
}

fn floats(values: &[String]) -> Vec<f64> {
    values.iter().map(|v| v.parse().expect("float")).collect()
}

#[test]
fn csv_carries_metadata_and_full_parameters() {
    let o = permadyn(&["lmg-theory", "--collective-rate", "2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let meta: Vec<&str> = text.lines().take_while(|l| l.starts_with('#')).collect();
    assert!(meta.iter().any(|l| l.starts_with("# tool: permadyn ")));
    assert!(meta.iter().any(|l| l.starts_with("# config-sha256: ")));
    let (header, rows) = table(&o);
    for p in ["coupling", "field", "collective_rate", "local_rate"] {
        assert!(header.iter().any(|h| h == p), "missing {p}");
    }
    assert_eq!(rows.len(), 1);
    let i = floats(&column(&header, &rows, "mutual_info"))[0];
    assert!((i - 0.3165597779503).abs() < 1e-6);
    assert_eq!(column(&header, &rows, "kind"), ["limit_cycle"]);
}

#[test]
fn theory_sweep_matches_closed_form_and_fixed_point_phase() {
    let o = permadyn(&[
        "lmg-theory",
        "--sweep-param",
        "collective_rate",
        "--sweep-min",
        "0.5",
        "--sweep-max",
        "3",
        "--sweep-points",
        "6",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = table(&o);
    let ode = floats(&column(&header, &rows, "mutual_info"));
    let exact = floats(&column(&header, &rows, "mutual_info_analytic"));
    for (a, b) in ode.iter().zip(&exact) {
        assert!((a - b).abs() < 1e-6, "{a} vs {b}");
    }
    assert_eq!(ode[0], 0.0);
    assert_eq!(column(&header, &rows, "kind")[0], "fixed_point");
}

#[test]
fn output_is_identical_across_thread_counts() {
    let dir = tempfile::tempdir().unwrap();
    let run = |threads: &str| {
        let out = dir.path().join(format!("t{threads}.csv"));
        let o = permadyn(&[
            "lmg-finite",
            "--field",
            "0.5",
            "--n",
            "4",
            "--n",
            "9",
            "--sweep-param",
            "collective_rate",
            "--sweep-min",
            "1",
            "--sweep-max",
            "3",
            "--sweep-points",
            "3",
            "--threads",
            threads,
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(o.status.success());
        std::fs::read(out).unwrap()
    };
    assert_eq!(run("1"), run("3"));
}

#[test]
fn single_unit_has_no_mutual_information() {
    for field in ["0", "0.5"] {
        let o = permadyn(&["lmg-finite", "--n", "1", "--field", field]);
        assert!(o.status.success());
        let (header, rows) = table(&o);
        assert_eq!(column(&header, &rows, "mutual_info"), ["0"]);
    }
}

#[test]
fn zero_field_uses_the_population_solver() {
    let o = permadyn(&["lmg-finite", "--n", "12"]);
    assert!(o.status.success());
    let (header, rows) = table(&o);
    assert_eq!(column(&header, &rows, "solver"), ["diagonal"]);
}

#[test]
fn ground_state_at_zero_field_is_ln2() {
    let o = permadyn(&["ground", "--coupling", "-1", "--n", "40", "--n", "100"]);
    assert!(o.status.success());
    let (header, rows) = table(&o);
    for i in floats(&column(&header, &rows, "mutual_info")) {
        assert!((i - std::f64::consts::LN_2).abs() < 1e-12);
    }
}

#[test]
fn ground_state_decays_faster_for_more_units() {
    let o = permadyn(&["ground", "--coupling", "-1", "--field", "0.2", "--n", "20", "--n", "100"]);
    assert!(o.status.success());
    let (header, rows) = table(&o);
    let i = floats(&column(&header, &rows, "mutual_info"));
    assert!(i[1] < i[0]);
    assert_eq!(floats(&column(&header, &rows, "field_ratio")), [0.2, 0.2]);
}

#[test]
fn oracle_check_passes_for_defaults_and_pumping_only() {
    for rate in ["2", "0"] {
        let o = permadyn(&["oracle-check", "--collective-rate", rate, "--field", "0.5"]);
        assert!(o.status.success(), "{}", stdout(&o));
        let (header, rows) = table(&o);
        assert_eq!(column(&header, &rows, "n"), ["2", "3", "4"]);
        assert!(column(&header, &rows, "pass").iter().all(|p| p == "true"));
    }
}

#[test]
fn floquet_report_is_json() {
    let o = permadyn(&["floquet", "--field", "0"]);
    assert!(o.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let r = &doc["reports"][0];
    let period = r["period"].as_f64().unwrap();
    assert!((period - 2.0 * std::f64::consts::PI * 2.0 / 3.0).abs() < 1e-6 * period);
    assert_eq!(r["multipliers"].as_array().unwrap().len(), 3);
    assert!(r["unit_multiplier_error"].as_f64().unwrap() < 1e-6);
    assert_eq!(r["is_attractive"], true);
}

#[test]
fn fixed_point_floquet_row_fails_with_exit_1() {
    let o = permadyn(&["floquet", "--collective-rate", "0.5"]);
    assert_eq!(o.status.code(), Some(1));
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(doc["reports"][0]["error"].as_str().unwrap().contains("limit cycle"));
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, r#"{"coupling": 3, "unknown_key": 1}"#).unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["lmg-theory", "--config", bad.to_str().unwrap()],
        vec!["ground", "--coupling", "-1", "--n", "11"],
        vec!["lmg-finite", "--n", "0"],
        vec!["lmg-theory", "--local-rate", "0"],
        vec!["lmg-theory", "--sweep-param", "field", "--sweep-min", "0", "--sweep-max", "inf"],
        vec!["oracle-check", "--n", "5"],
    ];
    for args in cases {
        let o = permadyn(&args);
        assert_eq!(o.status.code(), Some(2), "{args:?}");
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("job.json");
    std::fs::write(&cfg, r#"{"command": "ground", "coupling": -2, "field": 0.4, "n": [10]}"#).unwrap();
    let o = permadyn(&["ground", "--config", cfg.to_str().unwrap(), "--field", "0"]);
    assert!(o.status.success());
    let (header, rows) = table(&o);
    assert_eq!(column(&header, &rows, "coupling"), ["-2"]);
    assert_eq!(column(&header, &rows, "field"), ["0"]);
    let wrong = permadyn(&["lmg-theory", "--config", cfg.to_str().unwrap()]);
    assert_eq!(wrong.status.code(), Some(2));
}

#[test]
fn resume_reuses_checkpoints() {
    let dir = tempfile::tempdir().unwrap();
    let ck = dir.path().join("ck");
    let args = ["lmg-finite", "--field", "0.5", "--n", "8", "--resume", ck.to_str().unwrap()];
    let first = permadyn(&args);
    assert!(first.status.success());
    let second = permadyn(&args);
    assert!(second.status.success());
    let (h1, r1) = table(&first);
    let (h2, r2) = table(&second);
    assert_eq!(column(&h1, &r1, "resumed"), ["false"]);
    assert_eq!(column(&h2, &r2, "resumed"), ["true"]);
    assert_eq!(column(&h1, &r1, "mutual_info"), column(&h2, &r2, "mutual_info"));

    // a damaged checkpoint is recomputed rather than trusted
    let file = std::fs::read_dir(&ck).unwrap().next().unwrap().unwrap().path();
    std::fs::write(&file, b"garbage").unwrap();
    let third = permadyn(&args);
    let (h3, r3) = table(&third);
    assert_eq!(column(&h3, &r3, "resumed"), ["false"]);
    assert!(Path::new(&file).exists());
}

#[test]
fn memory_cap_switches_to_matrix_free() {
    let o = Command::new(env!("CARGO_BIN_EXE_permadyn"))
        .args(["lmg-finite", "--field", "0.5", "--n", "12"])
        .env("PERMADYN_MEM_CAP_MB", "0")
        .output()
        .unwrap();
    assert!(o.status.success());
    let (header, rows) = table(&o);
    assert_eq!(column(&header, &rows, "matrix_free"), ["true"]);

    let bad = Command::new(env!("CARGO_BIN_EXE_permadyn"))
        .args(["lmg-finite", "--n", "4"])
        .env("PERMADYN_MEM_CAP_MB", "lots")
        .output()
        .unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn json_format_wraps_rows() {
    let o = permadyn(&["ground", "--coupling", "-1", "--n", "4", "--format", "json"]);
    assert!(o.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(doc["command"], "ground");
    assert_eq!(doc["rows"][0]["n"], 4);
}
