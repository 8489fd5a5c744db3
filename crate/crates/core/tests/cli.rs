use std::process::Command;

fn cogmac(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_cogmac"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout_json(args: &[&str]) -> serde_json::Value {
    let out = cogmac(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("json on stdout")
}

#[test]
fn plan_dp_reports_value_and_first_channel() {
    let v = stdout_json(&["plan", "dp", "--a", "1,1", "--b", "1,1", "--slots", "2"]);
    assert!((v["value"].as_f64().unwrap() - 13.0 / 12.0).abs() < 1e-12);
    assert_eq!(v["first_channel"], 1);
}

#[test]
fn plan_dp_reads_a_manifest() {
    let manifest = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/optimal_dp_grid.toml");
    let v = stdout_json(&["plan", "dp", "--config", manifest, "--slots", "4"]);
    assert_eq!(v["horizon"], 4);
}

#[test]
fn plan_stopping_matches_two_slot_value() {
    let v = stdout_json(&["plan", "stopping", "--a", "1", "--b", "1", "--slots", "2"]);
    assert!((v["index"].as_f64().unwrap() - 5.0 / 9.0).abs() < 1e-9);
}

#[test]
fn plan_gittins_table_writes_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = cogmac(&["plan", "gittins", "--table", "--truncation", "40", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("gittins_table.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("a,b,index"));
    assert_eq!(csv.lines().count(), 1 + 38 * 39 / 2);
}

#[test]
fn solve_reports_symmetric_and_proportional() {
    let v = stdout_json(&["solve", "--theta", "0.8,0.4", "--users", "2"]);
    assert!((v["lambda_star"].as_f64().unwrap() - 8.0 / 15.0).abs() < 1e-9);
    let nash: Vec<f64> = serde_json::from_value(v["nash_strategy"].clone()).unwrap();
    assert!((nash[0] - 2.0 / 3.0).abs() < 1e-12);
}

#[test]
fn sim_writes_result_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = cogmac(&[
        "sim", "--strategy", "nash-tau", "--theta", "0.9,0.5", "--users", "3", "--slots", "50", "--replications", "4", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["loss_curve.csv", "occupancy.csv", "summary.json"] {
        assert!(dir.path().join(name).exists(), "{name} missing");
    }
}

#[test]
fn sim_overrides_manifest_values() {
    let manifest = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/ucb_two_channels.toml");
    let v = stdout_json(&["sim", "--config", manifest, "--slots", "30", "--replications", "5", "--seed", "9"]);
    assert_eq!(v["n_slots"], 30);
    assert_eq!(v["replications"], 5);
    assert_eq!(v["seed"], 9);
}

#[test]
fn failures_print_a_coded_error_line() {
    let out = cogmac(&["sim", "--strategy", "nash-tau", "--theta", "0.9,1.5", "--users", "2", "--slots", "5"]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.lines().any(|l| l.starts_with("cogmac: error[invalid-theta]: ")), "{err}");

    let out = cogmac(&["sim", "--strategy", "rule2", "--theta", "0.9,0.5", "--users", "1", "--slots", "5"]);
    assert!(!out.status.success());

    let out = cogmac(&["sim", "--format", "xml"]);
    assert!(String::from_utf8_lossy(&out.stderr).contains("error[invalid-config]"));

    let out = cogmac(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("cogmac: error[usage]: "));
}

#[test]
fn verify_runs_selected_criteria() {
    let out = cogmac(&["verify", "--only", "2,7"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    assert_eq!(text.lines().filter(|l| l.starts_with("PASS")).count(), 2, "{text}");
}
