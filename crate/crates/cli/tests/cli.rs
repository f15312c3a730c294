use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn dioph(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dioph"))
        .args(args)
        .env_remove("DIOPH_WORKERS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

#[test]
fn measure_examples() {
    let o = dioph(&["measure", "--q", "12", "--n", "1", "--delta", "0.1", "--coprime"]);
    assert!(o.status.success());
    assert_eq!(
        stdout(&o),
        "q,phi_q,psi_q,measure,provenance,ci_low,ci_high\n12,4,0.100000000000,0.0666666666667,exact,,\n"
    );
    let o = dioph(&["measure", "--n", "2", "--delta", "0.125", "--plain"]);
    assert!(stdout(&o).contains(",0.846573590280,closed-form,,"));
    let o = dioph(&["measure", "--delta", "0"]);
    assert!(stdout(&o).ends_with("1,1,0,0,exact,,\n"));
}

#[test]
fn usage_errors_exit_nonzero() {
    let o = dioph(&["measure", "--delta", "0.1", "--coprime", "--plain"]);
    assert!(!o.status.success());
    let o = dioph(&["measure", "--delta", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = dioph(&["union", "--q", "10"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("--seed"));
}

#[test]
fn fiber_check_examples() {
    let dir = tempfile::tempdir().unwrap();
    let full = dir.path().join("full.json");
    fs::write(
        &full,
        r#"{"schema_version": 1, "fiber": {"x_weights": ["1/3", "2/3"], "y_weights": ["1"], "matrix": [[1], [1]]}}"#,
    )
    .unwrap();
    let o = dioph(&["fiber-check", "--matrix", full.to_str().unwrap()]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("Full / equivalence holds"));

    let o = dioph(&["fiber-check", "--exhaustive", "3"]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("512 subsets × 25 weight samples: all equivalences hold"));

    let bad = dir.path().join("bad.json");
    fs::write(
        &bad,
        r#"{"schema_version": 1, "fiber": {"x_weights": ["1/2", "1/3"], "y_weights": ["1"], "matrix": [[1], [0]]}}"#,
    )
    .unwrap();
    let o = dioph(&["fiber-check", "--matrix", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("fiber.x_weights"));
    assert_eq!(dioph(&["fiber-check", "--exhaustive", "5"]).status.code(), Some(2));
}

#[test]
fn experiment_config_errors_name_fields() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("c.json");
    let text = fs::read_to_string(shipped("union-example.json")).unwrap().replace("power_log", "powerlog");
    fs::write(&p, text).unwrap();
    let o = dioph(&["experiment", p.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("experiment.family.family"), "{}", stderr(&o));
}

#[test]
fn empty_battery_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = dioph(&["experiment", shipped("empty-battery.json").to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["rows"], serde_json::json!({}));
    assert_eq!(summary["anomalies"], serde_json::json!([]));
}

#[test]
fn demo_battery_is_full_trending_for_divergent_entries() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let o = dioph(&[
        "--workers",
        "2",
        "experiment",
        shipped("theorem2-demo.json").to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    for e in summary["results"]["entries"].as_array().unwrap() {
        let want = match e["expect"].as_str().unwrap() {
            "expect-full" => "full-trending",
            "expect-null" => "null-trending",
            _ => continue,
        };
        assert_eq!(e["trend"], want, "{e}");
    }
    assert_eq!(summary["generator"], "chacha8-stream-v1");
    assert_eq!(summary["config_hash"].as_str().unwrap().len(), 64);
    assert!(summary["disclaimer"].as_str().unwrap().contains("do not establish"));
}

#[test]
fn shipped_demo_matches_builtin() {
    let text = fs::read_to_string(shipped("theorem2-demo.json")).unwrap();
    let cfg = dioph_core::config::Config::parse(&text).unwrap();
    assert_eq!(cfg.battery, Some(dioph_core::harness::Battery::theorem2_demo()));
}

fn run_union(dir: &Path, config: &Path, workers: &str) -> (String, String) {
    let out = dir.join(format!("w{workers}"));
    let o = dioph(&["--workers", workers, "experiment", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    (
        fs::read_to_string(out.join("union.csv")).unwrap(),
        fs::read_to_string(out.join("summary.json")).unwrap(),
    )
}

#[test]
fn outputs_are_byte_stable_across_workers_and_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = shipped("union-example.json");
    let (csv1, json1) = run_union(dir.path(), &cfg, "1");
    for w in ["4", "16"] {
        let (csv, json) = run_union(dir.path(), &cfg, w);
        assert_eq!(csv, csv1);
        assert_eq!(json, json1);
    }
    // the config echoed in the summary reproduces the run
    let summary: serde_json::Value = serde_json::from_str(&json1).unwrap();
    let echoed = dir.path().join("echo.json");
    fs::write(&echoed, serde_json::to_string(&summary["config"]).unwrap()).unwrap();
    let (csv2, json2) = run_union(&dir.path().join("again"), &echoed, "3");
    assert_eq!(csv2, csv1);
    assert_eq!(json2, json1);
}

#[test]
fn workers_env_var_is_honored() {
    let o = Command::new(env!("CARGO_BIN_EXE_dioph"))
        .args(["union", "--c", "0.25", "--n", "2", "--q", "200", "--samples", "3000", "--seed", "5", "--coprime"])
        .env("DIOPH_WORKERS", "8")
        .output()
        .unwrap();
    let base = dioph(&["union", "--c", "0.25", "--n", "2", "--q", "200", "--samples", "3000", "--seed", "5", "--coprime"]);
    assert!(o.status.success());
    assert_eq!(o.stdout, base.stdout);
    assert!(stdout(&o).contains("monte-carlo"));
}

#[test]
fn sums_bc_and_padic_commands() {
    let o = dioph(&["sums", "--c", "1", "--a", "1", "--q", "1000", "--grid", "10,1000", "--n", "2"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("q,plain,log_weighted,phi_log_weighted,phi_plain,cond1_ratio\n10,2.92896825397,"));

    let o = dioph(&["bc-bound", "--c", "0.25", "--n", "1", "--q", "64", "--grid", "8,64", "--coprime", "--pairs", "exact"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 3);

    let o = dioph(&["padic", "--config", shipped("padic-example.json").to_str().unwrap()]);
    assert!(o.status.success());
    let lines: Vec<String> = stdout(&o).lines().map(str::to_string).collect();
    assert_eq!(lines[0], "sample,alpha_1,count_q10,count_q100,count_q1000,count_q10000");
    assert_eq!(lines.len(), 17);
    for l in &lines[1..] {
        let counts: Vec<u64> = l.split(',').skip(2).map(|c| c.parse().unwrap()).collect();
        assert!(counts.windows(2).all(|w| w[0] <= w[1]));
    }
}
