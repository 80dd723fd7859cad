use std::process::Command;

fn edge_ieq() -> Command {
    Command::new(env!("CARGO_BIN_EXE_edge-ieq"))
}

#[test]
fn empty_seed_list_is_a_usage_error() {
    let out = edge_ieq().arg("run").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));
}

#[test]
fn experiment_two_needs_distributed() {
    let out = edge_ieq().args(["run", "--experiment", "2", "--seed", "1"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn illuminance_rejects_large_topology() {
    let out = edge_ieq()
        .args(["illuminance", "--seed", "1", "--topology", "3-10-10-1"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn dataset_and_small_run() {
    let dir = tempfile::tempdir().unwrap();
    let out = edge_ieq()
        .args(["dataset", "--experiment", "1", "--seed", "2", "--out"])
        .arg(dir.path().join("ds"))
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("6460 examples"));

    let out = edge_ieq()
        .args(["run", "--topology", "3-2-2-1", "--epochs", "30", "--seed", "1", "--ta-gate", "0.1", "--fscore-gate", "0.1", "--out"])
        .arg(dir.path().join("run"))
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let table = String::from_utf8_lossy(&out.stdout);
    assert!(table.contains("3-2-2-1") && table.contains("ok"));

    let report = dir.path().join("run/centralized-3-2-2-1-e30-s1/report.json");
    let out = edge_ieq().arg("plotdata").arg("--report").arg(&report).arg("--out").arg(dir.path().join("plots")).output().unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("plots/loss.csv").exists());
}
