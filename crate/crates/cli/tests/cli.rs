//! End-to-end tests of the `dsa` binary: exit codes, file outputs,
//! determinism, config-file precedence, and the budget environment knob.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn dsa() -> Command {
    Command::new(env!("CARGO_BIN_EXE_dsa"))
}

fn workdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("dsa-cli-{}-{tag}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn stdout_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).into_owned()
}

fn stderr_of(output: &Output) -> String {
    String::from_utf8_lossy(&output.stderr).into_owned()
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    dsa().current_dir(dir).args(args).output().unwrap()
}

#[test]
fn run_round_trip_and_exit_codes() {
    let dir = workdir("run");
    let out = run_in(
        &dir,
        &["run", "--users", "3", "--collusion", "0", "--modulus", "2", "--len", "1", "--seed", "7"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    assert!(stdout_of(&out).contains("recovered sum"));
    assert!(dir.join("dsa-transcript.txt").exists());

    let trivial = run_in(&dir, &["run", "--users", "2", "--seed", "1"]);
    assert_eq!(trivial.status.code(), Some(2));
    assert!(stderr_of(&trivial).contains("trivial regime"));
    assert!(stderr_of(&trivial).contains("no meaningful security"));

    let over_threshold = run_in(&dir, &["run", "--users", "4", "--collusion", "2"]);
    assert_eq!(over_threshold.status.code(), Some(2));
}

#[test]
fn run_is_byte_deterministic() {
    let dir_a = workdir("det-a");
    let dir_b = workdir("det-b");
    let args = [
        "run", "--users", "5", "--collusion", "1", "--modulus", "65536", "--len", "8",
        "--seed", "99",
    ];
    let a = run_in(&dir_a, &args);
    let b = run_in(&dir_b, &args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout_of(&a), stdout_of(&b));
    let ta = std::fs::read(dir_a.join("dsa-transcript.txt")).unwrap();
    let tb = std::fs::read(dir_b.join("dsa-transcript.txt")).unwrap();
    assert_eq!(ta, tb);
}

#[test]
fn run_with_explicit_inputs() {
    let dir = workdir("inputs");
    std::fs::write(dir.join("inputs.txt"), "3 4\n0 1\n2 2\n").unwrap();
    let out = run_in(
        &dir,
        &[
            "run", "--users", "3", "--modulus", "5", "--len", "2", "--seed", "4",
            "--inputs", "inputs.txt", "--format", "machine",
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    // 3+0+2 = 0 mod 5, 4+1+2 = 2 mod 5.
    assert!(stdout_of(&out).contains("sum=0,2"));
    assert!(stdout_of(&out).contains("agree=true"));
}

#[test]
fn verify_writes_report_and_respects_selection() {
    let dir = workdir("verify");
    let out = run_in(
        &dir,
        &["verify", "--users", "3", "--collusion", "0", "--modulus", "2", "--len", "1"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr_of(&out));
    assert!(stdout_of(&out).contains("all checks passed"));
    let report = std::fs::read_to_string(dir.join("dsa-report.txt")).unwrap();
    assert!(report.contains("check=security instance=k=1,T={}"));
    assert!(report.contains("overall: all checks passed"));

    let subset = run_in(
        &dir,
        &[
            "verify", "--users", "3", "--modulus", "2", "--len", "1",
            "--checks", "recovery,security", "--format", "machine",
        ],
    );
    assert_eq!(subset.status.code(), Some(0));
    let text = stdout_of(&subset);
    assert!(text.contains("check=recovery"));
    assert!(text.contains("check=security"));
    assert!(!text.contains("check=lemma3"));

    let unknown = run_in(&dir, &["verify", "--users", "3", "--checks", "nonsense"]);
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn verify_budget_handling() {
    let dir = workdir("budget");
    let over = run_in(&dir, &["verify", "--users", "8", "--modulus", "2", "--len", "4"]);
    assert_eq!(over.status.code(), Some(3));
    assert!(stderr_of(&over).contains("1152921504606846976"));

    // Environment variable lowers the default budget.
    let env_limited = dsa()
        .current_dir(&dir)
        .env("DSA_BUDGET", "4")
        .args(["verify", "--users", "3", "--modulus", "2", "--len", "1"])
        .output()
        .unwrap();
    assert_eq!(env_limited.status.code(), Some(3));

    // The flag overrides the environment.
    let flag_wins = dsa()
        .current_dir(&dir)
        .env("DSA_BUDGET", "4")
        .args(["verify", "--users", "3", "--modulus", "2", "--len", "1", "--budget", "1000000"])
        .output()
        .unwrap();
    assert_eq!(flag_wins.status.code(), Some(0), "{}", stderr_of(&flag_wins));
}

#[test]
fn rates_sweep_matches_corner_point() {
    let dir = workdir("rates");
    let out = run_in(&dir, &["rates", "--users", "3..8", "--format", "machine"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout_of(&out);
    let mut rows = 0;
    for (i, line) in text.lines().enumerate() {
        let k = i as u16 + 3;
        assert!(line.contains(&format!("k={k} t=0 rx=1 rz=1 rzs={}", k - 1)), "{line}");
        assert!(line.contains("member=true optimal=true"));
        rows += 1;
    }
    assert_eq!(rows, 6);

    let single = run_in(&dir, &["rates", "--users", "3"]);
    assert!(stdout_of(&single).contains("yes"));
}

#[test]
fn replay_verifies_and_detects_tampering() {
    let dir = workdir("replay");
    let run = run_in(
        &dir,
        &["run", "--users", "3", "--modulus", "65536", "--len", "2", "--seed", "42"],
    );
    assert_eq!(run.status.code(), Some(0));

    let ok = run_in(&dir, &["replay", "dsa-transcript.txt"]);
    assert_eq!(ok.status.code(), Some(0));
    assert!(stdout_of(&ok).contains("verified"));

    // Flip one payload nibble; low 16 bits keep the symbol in range.
    let text = std::fs::read_to_string(dir.join("dsa-transcript.txt")).unwrap();
    let tampered: String = {
        let at = text.find("payload=").unwrap() + "payload=".len();
        let mut chars: Vec<char> = text.chars().collect();
        chars[at] = if chars[at] == '0' { '1' } else { '0' };
        chars.into_iter().collect()
    };
    std::fs::write(dir.join("tampered.txt"), tampered).unwrap();
    let bad = run_in(&dir, &["replay", "tampered.txt"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout_of(&bad).contains("MISMATCH"));

    let garbage = run_in(&dir, &["replay", "missing.txt"]);
    assert_eq!(garbage.status.code(), Some(2));
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = workdir("config");
    std::fs::write(
        dir.join("dsa.conf"),
        "schema-version=1\nusers=3\ncollusion=0\nmodulus=2\nlen=1\nseed=11\n",
    )
    .unwrap();

    let from_file = run_in(&dir, &["run", "--config", "dsa.conf"]);
    assert_eq!(from_file.status.code(), Some(0), "{}", stderr_of(&from_file));
    assert!(stdout_of(&from_file).contains("seed=11"));

    // Flag overrides the file value, even into an invalid regime.
    let overridden = run_in(&dir, &["run", "--config", "dsa.conf", "--users", "2"]);
    assert_eq!(overridden.status.code(), Some(2));

    // Missing schema version is refused.
    std::fs::write(dir.join("bad.conf"), "users=3\n").unwrap();
    let bad = run_in(&dir, &["run", "--config", "bad.conf"]);
    assert_eq!(bad.status.code(), Some(2));
    assert!(stderr_of(&bad).contains("schema-version"));
}

#[test]
fn missing_required_parameter_is_usage_error() {
    let dir = workdir("missing");
    let out = run_in(&dir, &["run"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr_of(&out).contains("--users"));
}
