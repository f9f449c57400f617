use std::path::Path;
use std::process::{Command, Output};

use vla_adapt_core::trainer::ITERATION_COLUMNS;

fn cli(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vla-adapt"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn usage_errors_exit_1_and_help_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&cli(&[], dir.path())), 1);
    assert_eq!(code(&cli(&["frobnicate"], dir.path())), 1);
    assert_eq!(code(&cli(&["eval", "--episodes", "3"], dir.path())), 1);
    assert_eq!(code(&cli(&["--help"], dir.path())), 0);
}

#[test]
fn runtime_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(
        &["eval", "--task", "no-such-task", "--policy", "scripted"],
        dir.path(),
    );
    assert_eq!(code(&out), 2);
    std::fs::write(dir.path().join("bad.toml"), "[adapt]\ngroup_size = 3\n").unwrap();
    let out = cli(
        &["train", "--task", "approach-stove", "--config", "bad.toml"],
        dir.path(),
    );
    assert_eq!(code(&out), 2);
    let out = cli(&["bank", "inspect", "missing.bin"], dir.path());
    assert_eq!(code(&out), 2);
}

#[test]
fn train_eval_and_bank_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("c.toml"),
        "[adapt]\nn_iterations = 3\neval_episodes = 10\nearly_stop = false\n",
    )
    .unwrap();
    let out = cli(
        &[
            "train",
            "--task",
            "approach-stove",
            "--config",
            "c.toml",
            "--bank",
            "bank.bin",
            "--seed",
            "4",
            "--out",
            "run",
        ],
        d,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let metrics = std::fs::read_to_string(d.join("run/metrics.csv")).unwrap();
    let mut lines = metrics.lines();
    assert_eq!(lines.next().unwrap(), ITERATION_COLUMNS.join(","));
    assert_eq!(lines.count(), 3);

    let out = cli(
        &[
            "eval",
            "--params",
            "run/params.json",
            "--task",
            "approach-stove",
            "--episodes",
            "10",
        ],
        d,
    );
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("success_rate="));

    let out = cli(&["bank", "inspect", "bank.bin"], d);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("entries=1"), "{}", stdout(&out));
    let out = cli(&["bank", "export", "bank.bin", "--out", "bank.json"], d);
    assert_eq!(code(&out), 0);
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(d.join("bank.json")).unwrap()).unwrap();
    assert_eq!(json["entries"].as_array().unwrap().len(), 1);
}

#[test]
fn scripted_eval_reports_full_success() {
    let dir = tempfile::tempdir().unwrap();
    let out = cli(
        &[
            "eval",
            "--task",
            "stove-moka",
            "--policy",
            "scripted",
            "--episodes",
            "5",
        ],
        dir.path(),
    );
    assert_eq!(code(&out), 0);
    assert!(
        stdout(&out).contains("success_rate=1 progress=1"),
        "{}",
        stdout(&out)
    );
}

#[test]
fn failed_acceptance_check_exits_3() {
    // without populate tasks the bank stays empty, so warm equals cold and
    // the warm-start ratio check cannot pass
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    std::fs::write(
        d.join("suite.toml"),
        "[[task]]\nbuiltin = \"approach-stove\"\n",
    )
    .unwrap();
    std::fs::write(
        d.join("c.toml"),
        "[adapt]\nn_iterations = 2\neval_episodes = 5\n",
    )
    .unwrap();
    let out = cli(
        &[
            "experiment",
            "--mode",
            "cold-vs-warm",
            "--suite",
            "suite.toml",
            "--seeds",
            "1",
            "--out",
            "x",
            "--config",
            "c.toml",
        ],
        d,
    );
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["iterations.csv", "runs.csv", "summary.csv", "checks.csv"] {
        assert!(d.join("x").join(f).exists(), "{f}");
    }
}
