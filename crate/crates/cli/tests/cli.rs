//! End-to-end checks of the binary: determinism, exit codes, file handling.

use std::process::Command;

fn cfiab() -> Command {
    Command::new(env!("CARGO_BIN_EXE_cfiab"))
}

const SMALL: &[&str] = &[
    "--m_aps", "2", "--k_users", "2", "--n_a", "8", "--n_c", "8", "--trials", "2", "--seed", "5",
];

#[test]
fn run_is_byte_identical_across_invocations() {
    let first = cfiab().arg("run").args(SMALL).output().unwrap();
    let second = cfiab().arg("run").args(SMALL).output().unwrap();
    assert!(first.status.success(), "stderr: {}", String::from_utf8_lossy(&first.stderr));
    assert_eq!(first.stdout, second.stdout);
    let text = String::from_utf8(first.stdout).unwrap();
    assert!(text.starts_with("axis_value,mean_c_a,"));
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn run_with_config_file_and_override() {
    let dir = std::env::temp_dir().join("cfiab_cli_test");
    std::fs::create_dir_all(&dir).unwrap();
    let config_path = dir.join("scenario.toml");
    std::fs::write(&config_path, "m_aps = 2\nk_users = 2\nn_a = 8\nn_c = 8\ntrials = 1\n").unwrap();
    let out_path = dir.join("summary.csv");
    let trials_path = dir.join("trials.csv");

    let status = cfiab()
        .args(["run", "--config"])
        .arg(&config_path)
        .args(["--seed", "9", "-o"])
        .arg(&out_path)
        .arg("--trials_csv")
        .arg(&trials_path)
        .status()
        .unwrap();
    assert!(status.success());

    let summary = std::fs::read_to_string(&out_path).unwrap();
    assert!(summary.starts_with("axis_value,"));
    let trials = std::fs::read_to_string(&trials_path).unwrap();
    assert!(trials.starts_with("trial_index,status,"));
    assert_eq!(trials.lines().count(), 2); // header + one trial
}

#[test]
fn unknown_config_key_exits_one() {
    let dir = std::env::temp_dir().join("cfiab_cli_bad");
    std::fs::create_dir_all(&dir).unwrap();
    let config_path = dir.join("bad.toml");
    std::fs::write(&config_path, "m_aps = 2\nnot_a_field = 3\n").unwrap();
    let output = cfiab().args(["run", "--config"]).arg(&config_path).output().unwrap();
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn invalid_shape_exits_one() {
    let output = cfiab()
        .args(["run", "--m_aps", "9", "--n_c", "8", "--trials", "1"])
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn bad_axis_exits_one() {
    let output = cfiab()
        .args(["sweep", "--axis", "bogus", "--values", "1,2"])
        .args(SMALL)
        .output()
        .unwrap();
    assert_eq!(output.status.code(), Some(1));
}

#[test]
fn sweep_produces_one_row_per_value() {
    let output = cfiab()
        .args(["sweep", "--axis", "p_access", "--values", "0,10"])
        .args(SMALL)
        .output()
        .unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    assert_eq!(text.lines().count(), 3);
    assert!(text.lines().nth(1).unwrap().starts_with("0.00000000e0,"));
    assert!(text.lines().nth(2).unwrap().starts_with("1.00000000e1,"));
}

#[test]
fn selftest_passes() {
    let output = cfiab().arg("selftest").output().unwrap();
    assert!(output.status.success());
    let text = String::from_utf8(output.stdout).unwrap();
    assert!(text.lines().all(|l| l.ends_with(": ok")));
}
