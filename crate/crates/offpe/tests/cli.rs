use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use offpe::io::{parse_records, PolicyFile};

fn offpe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_offpe")).args(args).output().unwrap()
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, json).unwrap();
    path
}

fn one_state_config(dir: &Path) -> PathBuf {
    let mdp = configs().join("one_state.mdp.json");
    write_config(
        dir,
        "one.json",
        &format!(
            r#"{{"mdp": {{"file": {:?}}}, "rule": "direct_sgd", "mode": "oracle",
                "schedule": {{"contraction": {{"c": 0.25, "eta1": null}}}}, "horizon": 1000, "seeds": [1, 2]}}"#,
            mdp
        ),
    )
}

#[test]
fn evaluate_one_state_converges() {
    let dir = tempfile::tempdir().unwrap();
    let config = one_state_config(dir.path());
    let out = dir.path().join("out");
    let o = offpe(&["evaluate", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--quiet"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(o.stdout.is_empty());
    for name in ["seed_1.csv", "seed_2.csv", "mean.csv"] {
        let records = parse_records(&fs::read_to_string(out.join(name)).unwrap()).unwrap();
        let last = records.last().unwrap();
        assert_eq!(last.t, 1000);
        assert!(last.loss_gap.unwrap() <= 1e-4);
        assert!(last.e_t.is_none());
    }
}

#[test]
fn evaluate_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let config = configs().join("random_td_sgd.json");
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = offpe(&["evaluate", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seeds", "3,4"]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.iter().any(|n| n == "data_3.csv"));
    assert!(names.iter().any(|n| n == "counts_4.json"));
    for name in names {
        assert_eq!(fs::read(a.join(&name)).unwrap(), fs::read(b.join(&name)).unwrap(), "{name:?}");
    }
}

#[test]
fn saved_dataset_can_be_evaluated_offline() {
    let dir = tempfile::tempdir().unwrap();
    let config = configs().join("random_td_sgd.json");
    let first = dir.path().join("first");
    let o = offpe(&["evaluate", "--config", config.to_str().unwrap(), "--out", first.to_str().unwrap(), "--seeds", "5"]);
    assert!(o.status.success());
    let mut json: serde_json::Value = serde_json::from_str(&fs::read_to_string(&config).unwrap()).unwrap();
    json["dataset"] = serde_json::Value::String(first.join("data_5.csv").to_string_lossy().into_owned());
    json["save_data"] = serde_json::Value::Bool(false);
    json["dump_counts"] = serde_json::Value::Bool(false);
    let replay = write_config(&configs_dir_copy(dir.path()), "replay.json", &json.to_string());
    let second = dir.path().join("second");
    let o = offpe(&["evaluate", "--config", replay.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(fs::read(first.join("seed_5.csv")).unwrap(), fs::read(second.join("seed_5.csv")).unwrap());
}

/// Directory where relative paths in copied configs still resolve.
fn configs_dir_copy(tmp: &Path) -> PathBuf {
    let dir = tmp.join("configs");
    fs::create_dir_all(&dir).unwrap();
    for entry in fs::read_dir(configs()).unwrap() {
        let entry = entry.unwrap();
        fs::copy(entry.path(), dir.join(entry.file_name())).unwrap();
    }
    dir
}

#[test]
fn malformed_mdp_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let mdp = write_config(
        dir.path(),
        "bad.mdp.json",
        r#"{"n_states": 1, "n_actions": 1, "gamma": 0.5, "transition": [[[0.7]]], "rewards": [[[{"r": 1.0, "p": 1.0}]]]}"#,
    );
    let config = write_config(
        dir.path(),
        "bad.json",
        &format!(
            r#"{{"mdp": {{"file": {mdp:?}}}, "rule": "td0", "schedule": {{"inverse_sqrt": {{"eta0": 1.0}}}}, "horizon": 10, "seeds": [0]}}"#
        ),
    );
    let o = offpe(&["evaluate", "--config", config.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("transition row 0 is not a probability distribution"), "{err}");
    assert!(!dir.path().join("o").exists());
}

#[test]
fn invalid_schedule_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let mdp = configs().join("one_state.mdp.json");
    let config = write_config(
        dir.path(),
        "c.json",
        &format!(
            r#"{{"mdp": {{"file": {mdp:?}}}, "rule": "td0", "schedule": {{"contraction": {{"c": 1.0, "eta1": 5.0}}}}, "horizon": 10, "seeds": [0]}}"#
        ),
    );
    let o = offpe(&["evaluate", "--config", config.to_str().unwrap(), "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn learn_recovers_stay_or_swap() {
    let dir = tempfile::tempdir().unwrap();
    let config = configs().join("stay_or_swap_learn.json");
    let out = dir.path().join("learn");
    let o = offpe(&["learn", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seeds", "7"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let policy: PolicyFile = serde_json::from_str(&fs::read_to_string(out.join("policy_7.json")).unwrap()).unwrap();
    let optimal: PolicyFile = serde_json::from_str(&fs::read_to_string(out.join("optimal_policy.json")).unwrap()).unwrap();
    assert_eq!(policy, optimal);
    assert_eq!(optimal.probs, vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
    let report = fs::read_to_string(out.join("report_7.csv")).unwrap();
    assert!(report.starts_with("k,eps_hat,suboptimality,shift_c\n0,,"));
    assert_eq!(report.lines().count(), 7);
}

fn learn_config(dir: &Path, rounds: usize, behavior: &str) -> PathBuf {
    let mdp = configs().join("stay_or_swap.mdp.json");
    write_config(
        dir,
        "learn.json",
        &format!(
            r#"{{"mdp": {{"file": {mdp:?}}}, "behavior": {behavior}, "rule": "td0",
                "schedule": {{"contraction": {{"c": 0.1, "eta1": null}}}}, "horizon": 1000, "seeds": [0],
                "learn": {{"rounds": {rounds}}}}}"#
        ),
    )
}

#[test]
fn learn_with_zero_rounds_reports_initial_policy() {
    let dir = tempfile::tempdir().unwrap();
    let config = learn_config(dir.path(), 0, r#""uniform""#);
    let out = dir.path().join("o");
    assert!(offpe(&["learn", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]).status.success());
    let report = fs::read_to_string(out.join("report_0.csv")).unwrap();
    assert_eq!(report.lines().count(), 2);
    // the uniform policy on stay-or-swap loses 4.5 at the optimal stationary law
    let sub: f64 = report.lines().nth(1).unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!((sub - 4.5).abs() < 1e-9);
}

#[test]
fn missing_behavior_support_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let config = learn_config(dir.path(), 3, r#"{"deterministic": [0, 0]}"#);
    let out = dir.path().join("o");
    let o = offpe(&["learn", "--config", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary_0.json")).unwrap()).unwrap();
    assert!(summary["diagnostic"].as_str().unwrap().contains("never takes action 1"));
    assert!(String::from_utf8_lossy(&o.stdout).contains("stopped"));
}

#[test]
fn rate_fit_reads_records() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    let mut text = String::from("t,eta,loss_gap,dist_sq,e_t\n");
    for i in 0..60 {
        let t = (1.1_f64.powi(i) * 1000.0).round();
        if t <= 1e5 {
            text.push_str(&format!("{t},{:e},{:e},,\n", 1.0 / t, 1.0 / t));
        }
    }
    fs::write(&path, text).unwrap();
    let o = offpe(&["rate-fit", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let fit: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("fit.json")).unwrap()).unwrap();
    assert!((fit["slope"].as_f64().unwrap() + 1.0).abs() <= 0.01);
    let o = offpe(&["rate-fit", path.to_str().unwrap(), "--metric", "dist_sq"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_passes_and_detects_injected_fault() {
    let o = offpe(&["verify"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    let stdout = String::from_utf8_lossy(&o.stdout);
    let checks = stdout.lines().filter(|l| l.starts_with("PASS ") || l.starts_with("FAIL ")).count();
    assert!(checks >= 12);
    assert!(stdout.contains("sample-complexity constants"));
    let o = offpe(&["verify", "--inject-fault", "d-sign"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAIL mean-field-contraction"));
}

#[test]
fn mdp_gen_writes_loadable_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = offpe(&["mdp-gen", "--states", "3", "--actions", "2", "--seed", "4", "--out", dir.path().to_str().unwrap()]);
    assert!(o.status.success());
    let mdp = offpe::io::load_mdp(&dir.path().join("mdp.json")).unwrap();
    assert_eq!((mdp.n_states(), mdp.n_actions()), (3, 2));
}
