use std::path::Path;
use std::process::{Command, Output};

fn circfuzz(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_circfuzz"))
        .current_dir(dir)
        .env_remove("CIRCFUZZ_SEED")
        .env("RUST_LOG", "error")
        .args(args)
        .output()
        .expect("binary runs")
}

fn corpus() -> &'static str {
    concat!(env!("CARGO_MANIFEST_DIR"), "/../../corpus/seed-regexes.txt")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

#[test]
fn usage_and_config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&circfuzz(dir.path(), &["no-such-command"])), 2);
    assert_eq!(code(&circfuzz(dir.path(), &["fuzz-regex", "--budget", "0"])), 2);
    assert_eq!(code(&circfuzz(dir.path(), &["--config", "missing.json", "fuzz-regex"])), 2);
    std::fs::write(dir.path().join("bad.json"), r#"{"sed": 1}"#).unwrap();
    assert_eq!(code(&circfuzz(dir.path(), &["--config", "bad.json", "fuzz-regex"])), 2);
    assert_eq!(code(&circfuzz(dir.path(), &["transpile", "--regex", "a{2}", "--len", "2"])), 2);
    assert_eq!(code(&circfuzz(dir.path(), &["fixture", "multiplier_fancy"])), 2);
}

#[test]
fn fixture_run_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&circfuzz(d, &["fixture", "multiplier_completeness", "--out", "c.json"])), 0);
    std::fs::write(d.join("ok.json"), r#"{"a": 2, "b": 2}"#).unwrap();
    std::fs::write(d.join("bad.json"), r#"{"a": 1, "b": 3}"#).unwrap();
    let ok = circfuzz(d, &["run", "--circuit", "c.json", "--inputs", "ok.json"]);
    assert_eq!(code(&ok), 0);
    assert!(String::from_utf8_lossy(&ok.stdout).contains("\"c\": \"4\""));
    let bad = circfuzz(d, &["run", "--circuit", "c.json", "--inputs", "bad.json"]);
    assert_eq!(code(&bad), 1);
    assert!(String::from_utf8_lossy(&bad.stdout).contains("c === a*b"));
}

#[test]
fn transpile_embeds_metadata_and_runs_strings() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let t = circfuzz(d, &["transpile", "--regex", "ab*c", "--len", "3", "--inject", "flip_accept_state:0", "--out", "t.json"]);
    assert_eq!(code(&t), 0, "{}", String::from_utf8_lossy(&t.stderr));
    let json: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("t.json")).unwrap()).unwrap();
    let meta = &json["metadata"];
    assert_eq!(meta["regex"], "ab*c");
    assert_eq!(meta["input_length"], 3);
    assert_eq!(meta["injection"]["kind"], "flip_accept_state");
    let run = circfuzz(d, &["run", "--circuit", "t.json", "--string", "abc"]);
    assert_eq!(code(&run), 0);
}

#[test]
fn fuzz_witness_finds_montgomery_forgery_and_replays() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(code(&circfuzz(d, &["fixture", "montgomery_add", "--a", "486662", "--b", "1", "--out", "m.json"])), 0);
    std::fs::write(d.join("z.json"), r#"{"in1[0]": 0, "in1[1]": 0, "in2[0]": 0, "in2[1]": 0}"#).unwrap();
    let o = circfuzz(
        d,
        &["fuzz-witness", "--circuit", "m.json", "--inputs", "z.json", "--budget", "10000", "--seed", "1", "--out", "findings.json", "--bundle", "wb"],
    );
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    let findings: Vec<serde_json::Value> =
        serde_json::from_slice(&std::fs::read(d.join("findings.json")).unwrap()).unwrap();
    assert!(findings.iter().any(|f| f["category"] == "soundness"));
    for entry in std::fs::read_dir(d.join("wb/reproducers")).unwrap() {
        let p = entry.unwrap().path();
        let r = circfuzz(d, &["replay", p.to_str().unwrap()]);
        assert_eq!(code(&r), 1);
        let v: serde_json::Value = serde_json::from_slice(&r.stdout).unwrap();
        assert_eq!(v["matches_report"], true);
    }
}

#[test]
fn safe_multiplier_witness_campaign_exits_clean() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    circfuzz(d, &["fixture", "multiplier_safe", "--out", "s.json"]);
    let o = circfuzz(d, &["fuzz-witness", "--circuit", "s.json", "--assignments", "50", "--budget", "200", "--bundle", "sb"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(std::fs::read_to_string(d.join("sb/reports.json")).unwrap().trim(), "[]");
}

#[test]
fn fuzz_regex_is_reproducible_and_bundles_replay() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = |out: &'static str| {
        vec!["--seed", "4", "fuzz-regex", "--budget", "3", "--corpus", corpus(), "--inject", "class_off_by_one:2", "--out", out]
    };
    let a = circfuzz(d, &args("a"));
    let b = circfuzz(d, &args("b"));
    assert_eq!(code(&a), 1, "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(code(&b), 1);
    let ra = std::fs::read(d.join("a/reports.json")).unwrap();
    assert_eq!(ra, std::fs::read(d.join("b/reports.json")).unwrap());
    let stats: serde_json::Value = serde_json::from_slice(&std::fs::read(d.join("a/stats.json")).unwrap()).unwrap();
    assert_eq!(stats["iterations"], 3);
    assert_eq!(stats["seed"], 4);

    let reports: Vec<serde_json::Value> = serde_json::from_slice(&ra).unwrap();
    for r in &reports {
        let p = d.join("a/reproducers").join(format!("{}.json", r["id"].as_str().unwrap()));
        let o = circfuzz(d, &["replay", p.to_str().unwrap()]);
        let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(v["category"], r["category"]);
        assert_eq!(v["matches_report"], true);
    }
    let rep = circfuzz(d, &["report", "a"]);
    assert_eq!(code(&rep), 1);
    assert!(String::from_utf8_lossy(&rep.stdout).contains(reports[0]["id"].as_str().unwrap()));
}

#[test]
fn seed_precedence_is_file_then_env_then_flag() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(d.join("c.json"), r#"{"seed": 11, "budget": {"iterations": 1}, "max_len": 4}"#).unwrap();
    let seed_of = |out: &str| -> u64 {
        let s: serde_json::Value =
            serde_json::from_slice(&std::fs::read(d.join(out).join("stats.json")).unwrap()).unwrap();
        s["seed"].as_u64().unwrap()
    };
    circfuzz(d, &["--config", "c.json", "fuzz-regex", "--out", "f"]);
    assert_eq!(seed_of("f"), 11);
    let env = Command::new(env!("CARGO_BIN_EXE_circfuzz"))
        .current_dir(d)
        .env("CIRCFUZZ_SEED", "22")
        .args(["--config", "c.json", "fuzz-regex", "--out", "e"])
        .output()
        .unwrap();
    assert!(env.status.success());
    assert_eq!(seed_of("e"), 22);
    let flag = Command::new(env!("CARGO_BIN_EXE_circfuzz"))
        .current_dir(d)
        .env("CIRCFUZZ_SEED", "22")
        .args(["--config", "c.json", "--seed", "33", "fuzz-regex", "--out", "g"])
        .output()
        .unwrap();
    assert!(flag.status.success());
    assert_eq!(seed_of("g"), 33);
}
