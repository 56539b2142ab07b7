use std::path::Path;
use std::process::{Command, Output};

fn snowfrost(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_snowfrost"))
        .args(args)
        .output()
        .expect("spawn")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn analyze_targets_agree_with_published_values() {
    let o = snowfrost(&["analyze", "table1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("48/48 match"));

    let o = snowfrost(&["analyze", "bounds", "--precision", "8"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(!stdout(&o).contains("FAIL"));

    let o = snowfrost(&[
        "analyze",
        "budget",
        "--processors",
        "10000",
        "--years",
        "1000",
        "--rps",
        "5",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).lines().last().unwrap().starts_with("ok   total"));
}

#[test]
fn budget_over_a_longer_horizon_fails() {
    let o = snowfrost(&["analyze", "budget", "--years", "100000"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn usage_errors_exit_with_two() {
    assert_eq!(snowfrost(&["analyze", "table9"]).status.code(), Some(2));
    assert_eq!(snowfrost(&["simulate"]).status.code(), Some(2));
    assert_eq!(
        snowfrost(&["simulate", "--config", "no-such-preset"]).status.code(),
        Some(2)
    );
    assert_eq!(
        snowfrost(&["simulate", "--config", "snowman-fork", "--seeds", "x"])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn config_errors_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"protocol": "snowman", "n": 20, "f": 3, "max_timeslots": 10, "block_gen": {"policy": "sideways"}}"#,
    )
    .unwrap();
    let o = snowfrost(&["simulate", "--config", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("block_gen.policy"), "{}", stderr(&o));
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.json");
    std::fs::write(
        &path,
        r#"{"name": "small", "protocol": "frosty", "n": 30, "f": 5, "max_timeslots": 2000,
            "params": {"gamma": 8}, "adversary": {"strategy": "split-keeper"},
            "block_gen": {"policy": "single-chain", "period": 3}, "label_width": 8, "stop_epoch": 4}"#,
    )
    .unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn simulate_then_replay_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = small_config(dir.path());
    let o = snowfrost(&[
        "simulate",
        "--config",
        &cfg,
        "--seeds",
        "4..6",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("2 runs, 0 with violations"));

    let csv = std::fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("name,seed,protocol"));

    let recorded: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("verdicts.json")).unwrap()).unwrap();
    let trace = out.join("small-5.jsonl");
    let first = snowfrost(&["replay", trace.to_str().unwrap()]);
    let second = snowfrost(&["replay", trace.to_str().unwrap()]);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);
    let replayed: serde_json::Value = serde_json::from_str(&stdout(&first)).unwrap();
    assert_eq!(replayed, recorded[1]);
}

#[test]
fn tampered_trace_fails_replay() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = small_config(dir.path());
    let o = snowfrost(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let trace = out.join("small-0.jsonl");
    let text = std::fs::read_to_string(&trace).unwrap();

    // Point one processor's last final at a sibling branch.
    let mut lines: Vec<String> = text.lines().map(str::to_string).collect();
    let idx = lines
        .iter()
        .rposition(|l| l.contains(r#""event":"final""#))
        .expect("a final");
    let mut rec: serde_json::Value = serde_json::from_str(&lines[idx]).unwrap();
    let value = rec["value"].as_str().unwrap().to_string();
    let (len, hex) = value.split_once(':').unwrap();
    let mut bytes = hex::decode(hex).unwrap();
    bytes[0] ^= 0x80;
    rec["value"] = format!("{len}:{}", hex::encode(bytes)).into();
    lines[idx] = rec.to_string();
    let tampered = dir.path().join("tampered.jsonl");
    std::fs::write(&tampered, lines.join("\n") + "\n").unwrap();

    let o = snowfrost(&["replay", tampered.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(
        stdout(&o).contains("finals-incomparable") || stdout(&o).contains("final-regressed"),
        "{}",
        stdout(&o)
    );

    let cut = dir.path().join("cut.jsonl");
    std::fs::write(&cut, text.lines().take(5).collect::<Vec<_>>().join("\n")).unwrap();
    assert_eq!(snowfrost(&["replay", cut.to_str().unwrap()]).status.code(), Some(2));
}

#[test]
fn presets_are_listed_and_valid() {
    let o = snowfrost(&["presets"]);
    let names: Vec<String> = stdout(&o).lines().map(str::to_string).collect();
    assert_eq!(names.len(), 7);
    for n in &names {
        let cfg = snowfrost_cli::presets::preset(n).unwrap();
        assert_eq!(&cfg.name, n);
        cfg.validate().unwrap();
    }
}
