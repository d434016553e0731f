use std::process::Command;

fn pairflow(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_pairflow")).args(args).output().unwrap()
}

#[test]
fn matching_run_exits_zero() {
    let out = pairflow(&["validate", "--scenario", "builtin:t3-cs-pair"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("all tasks matched"));
}

#[test]
fn expected_failure_counts_as_match() {
    let out = pairflow(&["moser", "--scenario", "builtin:ghys-nil", "--report", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["schema"], 1);
    assert_eq!(v["matched"], true);
    let moser = v["tasks"].as_array().unwrap().iter().find(|t| t["op"] == "moser").unwrap();
    assert_eq!(moser["outcome"], "fail");
}

#[test]
fn mismatch_exits_one_and_names_the_task() {
    let dir = tempfile::tempdir().unwrap();
    let text = pairflow::gallery::builtin::builtin_file("t3-cs-pair")
        .unwrap()
        .to_json()
        .replacen("\"expect\": \"pass\"", "\"expect\": \"fail\"", 1);
    let path = dir.path().join("flipped.json");
    std::fs::write(&path, text).unwrap();
    let out = pairflow(&["validate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("mismatch: task 1 (validate): expected fail, got pass"));
}

#[test]
fn input_errors_exit_two() {
    let out = pairflow(&["validate", "--scenario", "builtin:no-such"]);
    assert_eq!(out.status.code(), Some(2));
    let out = pairflow(&["validate", "--scenario", "/nonexistent/scenario.json"]);
    assert_eq!(out.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{ not json").unwrap();
    let out = pairflow(&["validate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn out_dir_receives_identical_reports() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let args = ["all", "--scenario", "builtin:fol-drift", "--out", d];
    assert_eq!(pairflow(&args).status.code(), Some(0));
    let first = std::fs::read(dir.path().join("fol-drift-all.json")).unwrap();
    assert_eq!(pairflow(&args).status.code(), Some(0));
    let second = std::fs::read(dir.path().join("fol-drift-all.json")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn list_names_builtins_and_mutations() {
    let out = pairflow(&["list"]);
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().any(|l| l == "t4-exact"));
    assert_eq!(text.lines().filter(|l| l.contains('~')).count(), 16);
}
