use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_polarbec"));
    c.env_remove("POLARBEC_CACHE_DIR");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok_json(args: &[&str]) -> Value {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn stderr_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stderr).expect("stderr is JSON")
}

fn config_file(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

/// Data rows of a CSV artifact, skipping the comment header and column names.
fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

#[test]
fn help_lists_defaults() {
    let cases: [(&str, &[&str]); 6] = [
        ("criterion", &["[default: 0.64]", "[default: 10000]"]),
        (
            "mu-estimate",
            &["[default: 0.01]", "[default: 0.99]", "[default: 30]", "[default: 8192]"],
        ),
        (
            "construct",
            &["[default: 20]", "[default: 0.25]", "[default: 8]", "[default: 3.627]"],
        ),
        ("frontier", &["[default: 53]", "[default: 1000]"]),
        ("simulate", &["[default: 100000]", "[default: 10000]"]),
        ("corollaries", &["[default: 3.627]"]),
    ];
    for (sub, needles) in cases {
        let out = run(&[sub, "--help"]);
        assert!(out.status.success());
        let text = String::from_utf8(out.stdout).unwrap();
        for n in needles {
            assert!(text.contains(n), "`{sub} --help` lacks {n}:\n{text}");
        }
        assert!(text.contains("--config"), "`{sub}` lacks --config");
    }
}

#[test]
fn criterion_power_candidate() {
    let v = ok_json(&["criterion", "--alpha", "0.64"]);
    let r = v["result"]["sup_ratio"].as_f64().unwrap();
    assert!((r - 0.833).abs() < 1e-3, "sup ratio {r}");
    assert!(v["result"]["mu_star"].as_f64().unwrap() > 3.6);

    let fine = ok_json(&["criterion", "--alpha", "0.64", "--grid", "100000"]);
    let rf = fine["result"]["sup_ratio"].as_f64().unwrap();
    assert!((rf - r).abs() < 1e-3, "grid refinement moved the ratio {r} -> {rf}");
}

#[test]
fn criterion_tabulated_matches_power() {
    let dir = tempfile::tempdir().unwrap();
    let table = dir.path().join("h.csv");
    let mut text = String::from("xi,h\n");
    let k = 20_000;
    for i in 0..=k {
        let x = i as f64 / k as f64;
        text.push_str(&format!("{x},{}\n", (x * (1.0 - x)).powf(0.64)));
    }
    std::fs::write(&table, text).unwrap();
    let ratio_csv = dir.path().join("ratio.csv");
    let v = ok_json(&[
        "criterion",
        "--tabulated",
        table.to_str().unwrap(),
        "--ratio-csv",
        ratio_csv.to_str().unwrap(),
    ]);
    let r = v["result"]["sup_ratio"].as_f64().unwrap();
    assert!((r - 0.833).abs() < 2e-3, "tabulated sup ratio {r}");
    let curve = std::fs::read_to_string(ratio_csv).unwrap();
    assert!(curve.starts_with("# polarbec criterion"));
    assert!(csv_rows(&curve).len() > 1000);
}

#[test]
fn bad_parameters_exit_two() {
    for args in [
        &["criterion", "--alpha", "1.5"][..],
        &["construct", "--z0", "1.5"],
        &["construct", "--method", "classical", "--n", "6"],
        &[
            "construct",
            "--method",
            "classical",
            "--n",
            "6",
            "--rate",
            "0.5",
            "--max-sum-erasure",
            "0.1",
        ],
        &["frontier", "--mu-star", "1.5"],
    ] {
        let out = run(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let e = stderr_json(&out);
        assert_eq!(e["error"]["exit_code"], 2);
        assert_eq!(e["error"]["command"], args[0]);
        assert!(e["error"]["message"].as_str().is_some_and(|m| !m.is_empty()));
    }
}

#[test]
fn clap_usage_errors_exit_two() {
    assert_eq!(run(&["construct", "--no-such-flag"]).status.code(), Some(2));
    assert_eq!(run(&["simulate"]).status.code(), Some(2));
}

#[test]
fn empty_code_exits_three_with_hint() {
    let out = run(&["construct", "--n", "12", "--d", "2", "--p-ub", "1e-30"]);
    assert_eq!(out.status.code(), Some(3));
    let e = stderr_json(&out);
    assert_eq!(e["error"]["kind"], "infeasible");
    assert!(e["error"]["hint"].as_str().unwrap().contains("beta_p"));
}

#[test]
fn single_pocket_when_d_is_one() {
    let v = ok_json(&["construct", "--n", "16", "--d", "1", "--beta-p", "0.2"]);
    let pockets = v["result"]["pockets"].as_array().unwrap();
    assert_eq!(pockets.len(), 1);
    assert_eq!(pockets[0]["m"], v["result"]["n0"]);
}

fn pocket_levels(v: &Value) -> Vec<u64> {
    v["result"]["pockets"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["m"].as_u64().unwrap())
        .collect()
}

#[test]
fn walkthrough_configs() {
    let two = ok_json(&[
        "construct",
        "--config",
        config_file("two_pocket.toml").to_str().unwrap(),
    ]);
    assert_eq!(pocket_levels(&two), vec![14, 18]);
    let three = ok_json(&[
        "construct",
        "--config",
        config_file("three_pocket.toml").to_str().unwrap(),
    ]);
    assert_eq!(pocket_levels(&three), vec![14, 16, 18]);
    for v in [&two, &three] {
        let rate = v["result"]["rate"].as_f64().unwrap();
        assert!(rate > 0.0 && rate < 0.5);
    }
}

#[test]
fn command_line_beats_config_beats_default() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "n = 14\nd = 2\nbeta_p = 0.1\n[frontier]\nsamples = 3\n").unwrap();
    let c = cfg.to_str().unwrap();

    let from_file = ok_json(&["construct", "--config", c]);
    assert_eq!(from_file["config"]["n"], 14);
    assert_eq!(from_file["config"]["d"], 2);
    assert_eq!(from_file["config"]["mu_star"], 3.627);

    let overridden = ok_json(&["construct", "--config", c, "--n", "15"]);
    assert_eq!(overridden["config"]["n"], 15);
    assert_eq!(overridden["config"]["d"], 2);

    let f = run(&["frontier", "--config", c, "--pi-grid", "100"]);
    assert!(f.status.success());
    assert_eq!(csv_rows(&String::from_utf8(f.stdout).unwrap()).len(), 3);

    std::fs::write(&cfg, "bogus = 1\n").unwrap();
    assert_eq!(run(&["construct", "--config", c]).status.code(), Some(2));
}

#[test]
fn construct_is_idempotent_and_spec_roundtrips() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.spec");
    let b = dir.path().join("b.spec");
    let args = |p: &Path| {
        vec![
            "construct".to_owned(),
            "--n".into(),
            "14".into(),
            "--d".into(),
            "2".into(),
            "--beta-p".into(),
            "0.1".into(),
            "--spec-out".into(),
            p.to_str().unwrap().into(),
        ]
    };
    let ra = bin().args(args(&a)).output().unwrap();
    let rb = bin().args(args(&b)).output().unwrap();
    assert!(ra.status.success() && rb.status.success());
    let sa = std::fs::read(&a).unwrap();
    assert_eq!(sa, std::fs::read(&b).unwrap());

    let ja: Value = serde_json::from_slice(&ra.stdout).unwrap();
    let jb: Value = serde_json::from_slice(&rb.stdout).unwrap();
    assert_eq!(ja["result"], jb["result"]);
    let k = String::from_utf8(sa)
        .unwrap()
        .lines()
        .filter(|l| l.starts_with("j="))
        .count();
    let rate = ja["result"]["rate"].as_f64().unwrap();
    assert_eq!(k as f64 / (1u64 << 14) as f64, rate);
}

#[test]
fn csv_and_json_agree() {
    let json = ok_json(&["construct", "--n", "14", "--d", "2", "--beta-p", "0.1"]);
    let out = run(&[
        "construct",
        "--n",
        "14",
        "--d",
        "2",
        "--beta-p",
        "0.1",
        "--format",
        "csv",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("# n=14"));
    let rows = csv_rows(&text);
    let pockets = json["result"]["pockets"].as_array().unwrap();
    assert_eq!(rows.len(), pockets.len());
    for (row, p) in rows.iter().zip(pockets) {
        assert_eq!(row[0].parse::<u64>().unwrap(), p["m"].as_u64().unwrap());
    }
}

#[test]
fn output_flag_writes_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("cor.json");
    let out = run(&["corollaries", "--grid", "2000", "-o", path.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    assert_eq!(v["command"], "corollaries");
    assert_eq!(v["result"]["passed"], true);
}

#[test]
fn frontier_reference_grid() {
    let out = run(&["frontier", "--reference-grid"]);
    assert!(out.status.success());
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert!(!rows.is_empty());
    let reference: Vec<(f64, f64)> = polarbec::reference::frontier_3627().collect();
    assert_eq!(rows.len(), reference.len());
    for (row, (beta, inv)) in rows.iter().zip(reference) {
        let got_inv: f64 = row[0].parse().unwrap();
        let got_beta: f64 = row[1].parse().unwrap();
        assert!((got_inv - inv).abs() < 1e-12);
        assert!((got_beta - beta).abs() < 1e-4, "at 1/mu' = {inv}: {got_beta} vs {beta}");
    }
}

#[test]
fn frontier_trace_is_monotone() {
    let out = run(&["frontier", "--samples", "21", "--pi-grid", "400"]);
    let rows = csv_rows(&String::from_utf8(out.stdout).unwrap());
    assert_eq!(rows.len(), 21);
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r[0].parse().unwrap(), r[1].parse().unwrap()))
        .collect();
    assert!((pts[0].0 - 1.0 / 3.627).abs() < 1e-12);
    assert!(pts[0].1.abs() < 1e-6);
    assert!(pts.windows(2).all(|w| w[1].0 < w[0].0 && w[1].1 >= w[0].1 - 1e-9));
}

#[test]
fn simulate_noiseless_and_seeded() {
    let dir = tempfile::tempdir().unwrap();
    let spec = dir.path().join("c.spec");
    let out = run(&[
        "construct",
        "--method",
        "classical",
        "--n",
        "8",
        "--rate",
        "0.4",
        "--spec-out",
        spec.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let s = spec.to_str().unwrap();

    let clean = ok_json(&[
        "simulate", "--spec", s, "--z0", "0", "--trials", "2000", "--block", "500", "--format", "json",
    ]);
    assert_eq!(clean["result"]["final"]["block_errors"], 0);
    assert_eq!(clean["result"]["blocks"].as_array().unwrap().len(), 4);

    let noisy = ["simulate", "--spec", s, "--trials", "4000", "--seed", "7"];
    let a = run(&noisy);
    let b = run(&noisy);
    assert_eq!(a.stdout, b.stdout);
    let rows = csv_rows(&String::from_utf8(a.stdout).unwrap());
    let errors: u64 = rows.last().unwrap()[1].parse().unwrap();
    assert!(errors > 0, "rate 0.4 at z0 = 0.5 and n = 8 should fail sometimes");
}

#[test]
fn simulate_missing_spec_is_io_error() {
    let out = run(&["simulate", "--spec", "/nonexistent/x.spec"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"]["kind"], "io");
}

#[test]
fn mu_estimate_reports_exponent() {
    let v = ok_json(&["mu-estimate", "--steps", "16", "--grid", "4096", "--exact-check", "8"]);
    let mu = v["result"]["mu"].as_f64().unwrap();
    assert!((3.4..3.9).contains(&mu), "mu {mu}");
    assert!(v["result"]["max_exact_deviation"].as_f64().unwrap() < 1e-2);
    assert_eq!(v["result"]["samples"].as_array().unwrap().len(), 17);
}

#[test]
fn cache_dir_is_used() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .env("POLARBEC_CACHE_DIR", dir.path())
        .args(["construct", "--method", "classical", "--n", "9", "--rate", "0.3"])
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(std::fs::read_dir(dir.path()).unwrap().next().is_some());
}
