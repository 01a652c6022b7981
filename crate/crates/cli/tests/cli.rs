#![allow(clippy::approx_constant)] // CLIPScore values such as 0.318

use std::path::Path;
use std::process::Command;

use costroute_cli::{run, CommandOutcome, EXIT_COMPUTE, EXIT_DATA, EXIT_OK, EXIT_USAGE};

fn cr(args: &[&str]) -> CommandOutcome {
    run(std::iter::once("costroute").chain(args.iter().copied()))
}

fn ok(args: &[&str]) -> String {
    let o = cr(args);
    assert_eq!(o.code, EXIT_OK, "{args:?}: {}", o.stderr);
    String::from_utf8(o.stdout).unwrap()
}

fn p(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

const PAPER_POOL: &str = r#"{"models":[
  {"id":"infinity","cost":1.50},
  {"id":"sdxl100","cost":1197.00}
]}"#;

fn paper_fixture(dir: &Path) -> (String, String) {
    let pool = p(dir, "pool.json");
    let data = p(dir, "data.jsonl");
    std::fs::write(&pool, PAPER_POOL).unwrap();
    std::fs::write(
        &data,
        concat!(
            r#"{"prompt_id":"a","text":"a red bicycle","features":[0.0],"qualities":{"infinity":[0.259],"sdxl100":[0.318]},"split":"train"}"#,
            "\n",
            r#"{"prompt_id":"b","text":"two cats on a sofa","features":[1.0],"qualities":{"infinity":[0.30],"sdxl100":[0.28]},"split":"train"}"#,
            "\n",
            r#"{"prompt_id":"c","features":[0.2],"qualities":{"infinity":[0.25,0.27],"sdxl100":[0.33,0.31]},"split":"test"}"#,
            "\n",
        ),
    )
    .unwrap();
    (pool, data)
}

#[test]
fn help_on_every_subcommand() {
    let cmds: &[&[&str]] = &[
        &[],
        &["pool"],
        &["pool", "validate"],
        &["featurize"],
        &["train"],
        &["train", "knn"],
        &["train", "mlp"],
        &["route"],
        &["calibrate"],
        &["sweep"],
        &["eval"],
        &["eval", "qnc"],
        &["eval", "rates"],
        &["eval", "ttest"],
        &["sharpness"],
        &["synth"],
        &["synth", "gen"],
        &["synth", "frontier"],
    ];
    for c in cmds {
        let mut args = c.to_vec();
        args.push("--help");
        let o = cr(&args);
        assert_eq!(o.code, EXIT_OK, "{args:?}");
        let text = String::from_utf8(o.stdout).unwrap();
        assert!(text.contains("Usage:"), "{args:?}: {text}");
    }
    assert!(ok(&["route", "--help"]).contains("--lambda"));
    assert!(ok(&["train", "mlp", "--help"]).contains("--hidden"));
}

#[test]
fn usage_errors_exit_1() {
    for args in [
        &["frobnicate"][..],
        &[],
        &["route", "--pool", "p.json"],
        &["route", "--pool", "p", "--data", "d", "--oracle", "--lambda", "x"],
        &["sweep", "--pool", "p", "--data", "d", "--oracle", "--estimator", "e"],
        &["sweep", "--pool", "p", "--data", "d", "--oracle", "--lambdas", "log:1:2"],
        &["train", "knn", "--pool", "p", "--data", "d", "--out", "o", "--bogus"],
    ] {
        let o = cr(args);
        assert_eq!(o.code, EXIT_USAGE, "{args:?}");
        assert!(o.stdout.is_empty());
        assert!(!o.stderr.is_empty());
    }
}

#[test]
fn calibrate_below_cheapest_cost_is_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let (pool, data) = paper_fixture(dir.path());
    let o = cr(&["calibrate", "--pool", &pool, "--data", &data, "--oracle", "--budget", "0.5"]);
    assert_eq!(o.code, EXIT_COMPUTE);
    assert!(o.stderr.contains("infeasible"), "{}", o.stderr);
    let out = ok(&["calibrate", "--pool", &pool, "--data", &data, "--oracle", "--budget", "2000"]);
    assert!(out.starts_with("{\"lambda\":0.0000000000000000e0,"), "{out}");
}

#[test]
fn validation_failures_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let (pool, data) = paper_fixture(dir.path());
    let bad_pool = p(dir.path(), "bad.json");
    std::fs::write(&bad_pool, r#"{"models":[{"id":"a","cost":-1}]}"#).unwrap();
    let bad_data = p(dir.path(), "bad.jsonl");
    std::fs::write(&bad_data, r#"{"prompt_id":"x","features":[0],"qualities":{"ghost":[1]},"split":"test"}"#).unwrap();
    for args in [
        vec!["pool", "validate", "--pool", &bad_pool],
        vec!["pool", "validate", "--pool", &pool, "--data", &bad_data],
        vec!["pool", "validate", "--pool", "/nonexistent/pool.json"],
        vec!["route", "--pool", &pool, "--data", &data, "--oracle", "--lambda=-1"],
        vec!["route", "--pool", &pool, "--data", &data, "--split", "val", "--oracle", "--lambda", "0"],
        vec!["featurize", "--pool", &pool, "--data", &data, "--out", "/nonexistent/x"],
    ] {
        let o = cr(&args);
        assert_eq!(o.code, EXIT_DATA, "{args:?}: {}", o.stderr);
    }
    // line numbers reach the user
    let o = cr(&["pool", "validate", "--pool", &pool, "--data", &bad_data]);
    assert!(o.stderr.contains("line 1") && o.stderr.contains("ghost"), "{}", o.stderr);
}

#[test]
fn failed_commands_leave_no_output_file() {
    let dir = tempfile::tempdir().unwrap();
    let (pool, data) = paper_fixture(dir.path());
    let out = p(dir.path(), "knn.json");
    let o = cr(&["train", "knn", "--pool", &pool, "--data", &data, "--k", "5", "--out", &out]);
    assert_eq!(o.code, EXIT_DATA);
    assert!(!Path::new(&out).exists());
    // featurize fails on record "c", which has no text
    let feat = p(dir.path(), "feat.jsonl");
    assert_eq!(cr(&["featurize", "--pool", &pool, "--data", &data, "--out", &feat]).code, EXIT_DATA);
    assert!(!Path::new(&feat).exists());
    let entries: Vec<_> = std::fs::read_dir(dir.path()).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(entries.len(), 2, "stray files: {entries:?}");
}

#[test]
fn route_at_zero_picks_estimate_argmax() {
    let dir = tempfile::tempdir().unwrap();
    let gen = p(dir.path(), "gen");
    ok(&["synth", "gen", "--out-dir", &gen]);
    let (pool, data) = (format!("{gen}/pool.json"), format!("{gen}/data.jsonl"));
    let est = p(dir.path(), "knn.json");
    ok(&["train", "knn", "--pool", &pool, "--data", &data, "--k", "25", "--out", &est]);
    let out = ok(&["route", "--pool", &pool, "--data", &data, "--split", "test", "--estimator", &est, "--lambda", "0"]);
    let lines: Vec<serde_json::Value> = out.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 200);
    for l in &lines {
        let adj: Vec<f64> = l["adjusted"].as_array().unwrap().iter().map(|v| v.as_f64().unwrap()).collect();
        let best = if adj[1] > adj[0] { "large" } else { "small" };
        assert_eq!(l["chosen"], best);
        assert_eq!(l["lambda"], 0.0);
    }
    let dec = p(dir.path(), "dec.jsonl");
    std::fs::write(&dec, &out).unwrap();
    let rates = ok(&["eval", "rates", "--pool", &pool, "--decisions", &dec]);
    assert_eq!(rates, "model,rate\nsmall,5.0000000000000000e-1\nlarge,5.0000000000000000e-1\n");
}

#[test]
fn sweep_on_bundled_fixture_has_nonincreasing_cost() {
    let dir = tempfile::tempdir().unwrap();
    let gen = p(dir.path(), "gen");
    ok(&["synth", "gen", "--out-dir", &gen]);
    let (pool, data) = (format!("{gen}/pool.json"), format!("{gen}/data.jsonl"));
    let est = p(dir.path(), "mlp.json");
    ok(&[
        "train", "mlp", "--pool", &pool, "--data", &data, "--hidden", "8", "--epochs", "10", "--lr", "0.5", "--out",
        &est,
    ]);
    let csv = ok(&[
        "sweep",
        "--pool",
        &pool,
        "--data",
        &data,
        "--split",
        "test",
        "--estimator",
        &est,
        "--lambdas",
        "log:1e-6:1e0:50",
    ]);
    let mut rows = csv.lines();
    assert_eq!(rows.next().unwrap(), "lambda,avg_cost,avg_quality,rate_small,rate_large");
    let vals: Vec<Vec<f64>> = rows.map(|r| r.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(vals.len(), 51);
    assert_eq!(vals[0][0], 0.0);
    for w in vals.windows(2) {
        assert!(w[1][1] <= w[0][1]);
    }
    let no_zero = ok(&["sweep", "--pool", &pool, "--data", &data, "--oracle", "--lambdas", "0.5,1", "--no-zero"]);
    assert_eq!(no_zero.lines().count(), 3);
}

#[test]
fn eval_qnc_and_ttest() {
    let dir = tempfile::tempdir().unwrap();
    let curve = p(dir.path(), "curve.csv");
    std::fs::write(&curve, "lambda,avg_cost,avg_quality\n1,2,0.9\n0,1,0.5\n").unwrap();
    let out = ok(&["eval", "qnc", "--curve", &curve, "--ref-cost", "2", "--ref-quality", "0.7"]);
    assert_eq!(out, "{\"qnc_percent\":7.5000000000000000e1}\n");
    let out = ok(&["eval", "qnc", "--curve", &curve, "--ref-cost", "2", "--ref-quality", "0.95"]);
    assert!(out.contains("\"unreachable\":true"));

    let (a, b, c) = (p(dir.path(), "a.txt"), p(dir.path(), "b.txt"), p(dir.path(), "c.txt"));
    std::fs::write(&a, "1 2 3\n4 5\n").unwrap();
    std::fs::write(&b, "2,3,4,5,6").unwrap();
    std::fs::write(&c, "7 7 7").unwrap();
    let v: serde_json::Value = serde_json::from_str(&ok(&["eval", "ttest", "--a", &a, "--b", &b])).unwrap();
    assert_eq!(v["t"], -1.0);
    assert!((v["p"].as_f64().unwrap() - 0.34659350708733416).abs() < 1e-6);
    assert_eq!(cr(&["eval", "ttest", "--a", &c, "--b", &c]).code, EXIT_COMPUTE);
}

#[test]
fn sharpness_of_netpbm_files() {
    let dir = tempfile::tempdir().unwrap();
    let flat = p(dir.path(), "flat.pgm");
    let mut bytes = b"P5\n4 4\n255\n".to_vec();
    bytes.extend([128u8; 16]);
    std::fs::write(&flat, bytes).unwrap();
    let checker = p(dir.path(), "checker.ppm");
    let mut bytes = b"P6 2 2 255\n".to_vec();
    bytes.extend([255, 255, 255, 0, 0, 0, 0, 0, 0, 255, 255, 255]);
    std::fs::write(&checker, bytes).unwrap();
    let out = ok(&["sharpness", &flat, &checker]);
    let rows: Vec<&str> = out.lines().collect();
    assert_eq!(rows[0], "file,sharpness");
    assert_eq!(rows[1], format!("{flat},0.0000000000000000e0"));
    assert!(rows[2].split(',').nth(1).unwrap().parse::<f64>().unwrap() > 0.0);
    let junk = p(dir.path(), "junk.pgm");
    std::fs::write(&junk, "P2 1 1 255\n0").unwrap();
    assert_eq!(cr(&["sharpness", &junk]).code, EXIT_DATA);
}

#[test]
fn featurize_and_frontier() {
    let dir = tempfile::tempdir().unwrap();
    let (pool, _) = paper_fixture(dir.path());
    let data = p(dir.path(), "text.jsonl");
    std::fs::write(
        &data,
        concat!(
            r#"{"prompt_id":"a","text":"a colorful park with a crowd","features":[],"qualities":{"infinity":[0.259],"sdxl100":[0.318]},"split":"test"}"#,
            "\n",
            r#"{"prompt_id":"b","text":"","features":[],"qualities":{"infinity":[0.30],"sdxl100":[0.28]},"split":"test"}"#,
            "\n",
        ),
    )
    .unwrap();
    let out = p(dir.path(), "feat.jsonl");
    ok(&["featurize", "--pool", &pool, "--data", &data, "--dim", "16", "--out", &out]);
    let pool_v = costroute::pool::load_pool(PAPER_POOL.as_bytes()).unwrap();
    let ds = costroute::pool::load_dataset(&std::fs::read(&out).unwrap(), &pool_v).unwrap();
    assert_eq!(ds.dim, 16);
    let norm: f64 = ds.records[0].features.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!((norm - 1.0).abs() < 1e-9);
    assert!(ds.records[1].features.iter().all(|&v| v == 0.0));

    let frontier = ok(&["synth", "frontier", "--pool", &pool, "--data", &out]);
    let rows: Vec<Vec<f64>> =
        frontier.lines().skip(1).map(|r| r.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    // all-cheap, then upgrading prompt a only
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[0][0], 1.5);
    assert!((rows[1][1] - (0.318 + 0.30) / 2.0).abs() < 1e-15);
}

#[test]
fn binary_exit_codes_and_streams() {
    let bin = env!("CARGO_BIN_EXE_costroute");
    let o = Command::new(bin).arg("--help").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    assert!(!o.stdout.is_empty());
    let o = Command::new(bin).arg("nope").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    assert!(o.stdout.is_empty() && !o.stderr.is_empty());
    let dir = tempfile::tempdir().unwrap();
    let (pool, data) = paper_fixture(dir.path());
    let o = Command::new(bin)
        .args(["calibrate", "--pool", &pool, "--data", &data, "--oracle", "--budget", "0.5"])
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
    let o = Command::new(bin).args(["pool", "validate", "--pool", &pool, "--data", &data]).output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["models"], 2);
    assert_eq!(v["train"], 2);
}
