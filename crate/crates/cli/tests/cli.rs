use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_pseudomarket"));
    cmd.env_remove("PSEUDOMARKET_JOBS");
    cmd
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn arg(path: &Path) -> &str {
    path.to_str().unwrap()
}

const I2_MARKET: &str = r#"{
    "horizon": 2000, "reserve": 2.0, "trials": 4, "seed": 1,
    "agents": [
        {"fair_share": 0.5, "types": [[1, 1, 0.5], [0, 1, 0.5]], "strategy": "blocker", "params": {"k_max": 5}},
        {"fair_share": 0.5, "types": [[1, 2, 0.5], [0, 1, 0.5]], "strategy": "robust"}
    ],
    "preset": "bpb"
}"#;

#[test]
fn ideal_point_mass_gives_fair_share() {
    let dir = TempDir::new().unwrap();
    let file = write(
        &dir,
        "i1.json",
        r#"{"agents": [
            {"fair_share": 0.3, "types": [[1, 1, 1]], "strategy": "robust"},
            {"fair_share": 0.7, "types": [[1, 1, 1]], "strategy": "robust"}
        ]}"#,
    );
    let out = run(&["ideal", arg(&file), "--oracle"]);
    assert!(out.status.success(), "{out:?}");
    let text = stdout(&out);
    assert!(text.contains("agent 0: cap=0.3 v*=0.3 beta=0.3"), "{text}");
    assert!(text.contains("agent 1: cap=0.7 v*=0.7 beta=0.7"), "{text}");
    assert!(text.contains("oracle v*=0.3 gap=0"), "{text}");
}

#[test]
fn ideal_two_type_instance() {
    let dir = TempDir::new().unwrap();
    let file = write(&dir, "i2.json", I2_MARKET);
    let out = run(&["ideal", arg(&file), "--simulate", "200000"]);
    assert!(out.status.success(), "{out:?}");
    let text = stdout(&out);
    assert!(
        text.contains(
            "agent 1: cap=0.5 v*=0.5 beta=0.5 q=0.333333333 kappa=2 request=[0.666666667, 0]"
        ),
        "{text}"
    );
    let sim = text
        .lines()
        .find(|l| l.starts_with("agent 1: simulated"))
        .unwrap();
    let utility: f64 = sim
        .split("utility=")
        .nth(1)
        .unwrap()
        .split_whitespace()
        .next()
        .unwrap()
        .parse()
        .unwrap();
    assert!((utility - 0.5).abs() < 0.01, "{sim}");
}

#[test]
fn configuration_errors_exit_with_2() {
    let dir = TempDir::new().unwrap();
    let malformed = write(&dir, "bad.json", "{\"agents\": [");
    let unknown_key = write(
        &dir,
        "key.json",
        &I2_MARKET.replace("\"trials\"", "\"trails\""),
    );
    let bad_shares = write(
        &dir,
        "shares.json",
        &I2_MARKET.replace("0.5, \"types\": [[1, 2", "0.6, \"types\": [[1, 2"),
    );
    let bad_strategy = write(
        &dir,
        "strategy.json",
        &I2_MARKET.replace("\"robust\"", "\"optimist\""),
    );
    for file in [&malformed, &unknown_key, &bad_shares, &bad_strategy] {
        for cmd in ["ideal", "run"] {
            let out = run(&[cmd, arg(file)]);
            assert_eq!(
                out.status.code(),
                Some(2),
                "{cmd} {}: {out:?}",
                file.display()
            );
        }
    }
    assert_eq!(run(&["preset", "auction"]).status.code(), Some(2));
    assert_eq!(run(&["run"]).status.code(), Some(2));
}

#[test]
fn missing_file_is_an_io_error() {
    let out = run(&["ideal", "/nonexistent/market.json"]);
    assert_eq!(out.status.code(), Some(4), "{out:?}");
    let dir = TempDir::new().unwrap();
    let file = write(&dir, "i2.json", I2_MARKET);
    let out = run(&["run", arg(&file), "--out", "/nonexistent/dir/out.csv"]);
    assert_eq!(out.status.code(), Some(4), "{out:?}");
}

#[test]
fn oracle_refuses_large_type_spaces() {
    let dir = TempDir::new().unwrap();
    let types: Vec<String> = (1..=7)
        .map(|k| format!("[1, {k}, {}]", 1.0 / 7.0))
        .collect();
    let text = format!(
        r#"{{"agents": [{{"fair_share": 1.0, "types": [{}], "strategy": "robust"}}]}}"#,
        types.join(", ")
    );
    let file = write(&dir, "seven.json", &text);
    assert!(run(&["ideal", arg(&file)]).status.success());
    assert_eq!(
        run(&["ideal", arg(&file), "--oracle"]).status.code(),
        Some(3)
    );
}

#[test]
fn csv_is_reproducible_under_a_fixed_seed() {
    let dir = TempDir::new().unwrap();
    let file = write(&dir, "i2.json", I2_MARKET);
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    for out in [&a, &b] {
        let res = run(&[
            "run",
            arg(&file),
            "--trials",
            "1",
            "--seed",
            "7",
            "--out",
            arg(out),
        ]);
        assert!(res.status.success(), "{res:?}");
    }
    let bytes = std::fs::read(&a).unwrap();
    assert_eq!(bytes, std::fs::read(&b).unwrap());
    let text = String::from_utf8(bytes).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next(),
        Some("trial,agent,total_utility,total_payment,utilization,blocked_rounds")
    );
    assert_eq!(lines.count(), 2);

    // stdout mode writes the same CSV; worker count does not matter
    let piped = bin()
        .args(["run", arg(&file), "--trials", "1", "--seed", "7"])
        .env("PSEUDOMARKET_JOBS", "3")
        .output()
        .unwrap();
    assert_eq!(piped.stdout, std::fs::read(&a).unwrap());

    let other = run(&["run", arg(&file), "--trials", "1", "--seed", "8"]);
    assert_ne!(other.stdout, piped.stdout);
}

#[test]
fn run_writes_summary_next_to_csv() {
    let dir = TempDir::new().unwrap();
    let file = write(&dir, "i2.json", I2_MARKET);
    let csv = dir.path().join("result.csv");
    let out = run(&["run", arg(&file), "--out", arg(&csv), "--jobs", "2"]);
    assert!(out.status.success(), "{out:?}");
    let on_disk: Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("result.summary.json")).unwrap(),
    )
    .unwrap();
    let printed: Value = serde_json::from_str(&stdout(&out)).unwrap();
    assert_eq!(on_disk, printed);
    assert_eq!(printed["trials"], 4);
    assert_eq!(printed["checks"][0]["status"], "PASS");
    assert_eq!(printed["references"]["bpb_ratio"], 0.5);
}

fn preset_summary(args: &[&str]) -> Value {
    let dir = TempDir::new().unwrap();
    let csv = dir.path().join("preset.csv");
    let mut full = vec!["preset"];
    full.extend_from_slice(args);
    full.extend_from_slice(&["--out", arg(&csv)]);
    let out = run(&full);
    assert!(out.status.success(), "{out:?}");
    serde_json::from_str(&stdout(&out)).unwrap()
}

#[test]
fn guarantee_preset_passes_its_bound() {
    let s = preset_summary(&["guarantee", "--trials", "20"]);
    assert_eq!(s["status"], "PASS");
    let check = &s["checks"][0];
    assert_eq!(check["name"], "mean_utility >= guarantee_lb");
    assert_eq!(check["status"], "PASS");
}

#[test]
fn reserve_override_changes_the_guarantee_factor() {
    let s = preset_summary(&[
        "guarantee",
        "--reserve",
        "1.2",
        "--trials",
        "2",
        "--horizon",
        "1000",
    ]);
    let factor = s["references"]["guarantee_factor"].as_f64().unwrap();
    assert!((factor - 1.0 / 6.0).abs() < 1e-12, "{factor}");
}

#[test]
fn hardness_preset_reports_both_fractions() {
    let s = preset_summary(&["hardness", "--trials", "4", "--horizon", "20000"]);
    let analytic = s["references"]["fraction"].as_f64().unwrap();
    let empirical = s["empirical_fraction"]["mean"].as_f64().unwrap();
    assert!((analytic - 0.511323).abs() < 1e-6, "{analytic}");
    assert!((analytic - empirical).abs() < 0.02, "{empirical}");

    let big = preset_summary(&[
        "hardness",
        "--n",
        "100",
        "--kmax",
        "50",
        "--trials",
        "1",
        "--horizon",
        "1000",
    ]);
    let closer = big["references"]["fraction"].as_f64().unwrap();
    assert!(closer > 0.5 && closer < analytic, "{closer}");
}

#[test]
fn roundrobin_preset_reports_ideal_utility() {
    let s = preset_summary(&["roundrobin", "--trials", "20"]);
    assert_eq!(s["references"]["v_star"], 0.1);
    assert_eq!(s["status"], "PASS");
    let agents = s["agents"].as_array().unwrap();
    assert_eq!(agents.len(), 10);
}

#[test]
fn focus_and_opponent_overrides() {
    let s = preset_summary(&["impossibility", "--focus", "robust", "--trials", "3"]);
    assert_eq!(s["agents"][1]["strategy"], "robust");
    let s = preset_summary(&["bpb", "--opponent", "sniper:3", "--trials", "3"]);
    assert_eq!(s["agents"][0]["strategy"], "sniper");
    assert_eq!(
        run(&["preset", "bpb", "--opponent", "silent:2"])
            .status
            .code(),
        Some(2)
    );
}
