//! End-to-end tests of the `propplan` binary: subcommand behavior, exit
//! codes, and determinism of the produced artifacts.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BASE: &str = concat!(
    env!("CARGO_MANIFEST_DIR"),
    "/../core/fixtures/tv_base.pddl"
);
const GOLDEN: &str = concat!(
    env!("CARGO_MANIFEST_DIR"),
    "/../core/fixtures/tv_extended_golden.pddl"
);
const TV0: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/../core/fixtures/tv0.pddl");

fn propplan(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_propplan"))
        .args(args)
        .output()
        .expect("binary should run")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no exit code")
}

fn run_config(dir: &Path) -> PathBuf {
    let path = dir.join("run.toml");
    fs::write(
        &path,
        r#"
[agent]
pairs = [{ type = "Tv", property = "Is_Turned_On" }]
mode = "Gtd"
n_min = 16
epochs = 2000
learning_rate = 0.1
seed = 7

[world]
seed = 7
width = 10
height = 10
feature_dim = 6
view_sigma = 0.1
act_failure_rate = 0.0

[world.objects]
Tv = 3

[world.applicable]
Tv = ["Is_Turned_On"]

[world.priors.Tv]
Is_Turned_On = 0.0

[world.operator_effects.Turn_On]
property = "Is_Turned_On"
value = true

[world.operator_effects.Turn_Off]
property = "Is_Turned_On"
value = false
"#,
    )
    .unwrap();
    path
}

#[test]
fn extend_reproduces_the_golden_domain() {
    let dir = tempfile::tempdir().unwrap();
    let out_file = dir.path().join("ext.pddl");
    let report = dir.path().join("ext.json");
    let out = propplan(&[
        "extend",
        "--domain",
        BASE,
        "--pair",
        "Tv:Is_Turned_On",
        "--out",
        out_file.to_str().unwrap(),
        "--report",
        report.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{out:?}");
    assert_eq!(
        fs::read_to_string(&out_file).unwrap(),
        fs::read_to_string(GOLDEN).unwrap()
    );
    let v: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(v["added_schemas"][0], "Observe");
}

#[test]
fn extending_twice_exits_with_code_3() {
    let out = propplan(&["extend", "--domain", GOLDEN, "--pair", "Tv:Is_Turned_On"]);
    assert_eq!(code(&out), 3);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("already extended"), "{err}");
}

#[test]
fn malformed_pair_spec_is_rejected() {
    let out = propplan(&["extend", "--domain", BASE, "--pair", "TvOnly"]);
    assert_eq!(code(&out), 70);
}

#[test]
fn plan_prints_one_action_per_line() {
    let out = propplan(&["plan", "--domain", GOLDEN, "--problem", TV0]);
    assert_eq!(code(&out), 0, "{out:?}");
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.trim_end().lines().collect();
    assert_eq!(lines.len(), 6, "{text}");
    assert!(lines.iter().any(|l| l.starts_with("Train(")), "{text}");
}

#[test]
fn unsolvable_goal_exits_with_code_1() {
    let dir = tempfile::tempdir().unwrap();
    // nothing in the domain ever adds Sufficient_Obs: it is judged by the
    // executing agent, so as a pure planning goal it is unreachable
    let problem = dir.path().join("stuck.pddl");
    fs::write(
        &problem,
        r#"(define (problem stuck)
  (:domain tv_base)
  (:objects tv0 - Tv)
  (:init (Tv tv0))
  (:goal (Sufficient_Obs "tv" "is_turned_on")))
"#,
    )
    .unwrap();
    let out = propplan(&["plan", "--domain", GOLDEN, "--problem", problem.to_str().unwrap()]);
    assert_eq!(code(&out), 1, "{out:?}");
}

#[test]
fn exhausted_node_budget_exits_with_code_4() {
    let out = propplan(&[
        "plan",
        "--domain",
        GOLDEN,
        "--problem",
        TV0,
        "--max-expansions",
        "1",
    ]);
    assert_eq!(code(&out), 4, "{out:?}");
}

#[test]
fn missing_input_file_exits_with_code_2() {
    let out = propplan(&["plan", "--domain", GOLDEN, "--problem", "/nonexistent.pddl"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn gen_env_is_byte_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = run_config(dir.path());
    let (w1, w2) = (dir.path().join("w1.json"), dir.path().join("w2.json"));
    for w in [&w1, &w2] {
        let out = propplan(&[
            "gen-env",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            w.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{out:?}");
    }
    let bytes = fs::read(&w1).unwrap();
    assert_eq!(bytes, fs::read(&w2).unwrap());
    let v: serde_json::Value = serde_json::from_slice(&bytes).unwrap();
    assert_eq!(v["objects"].as_array().unwrap().len(), 3);
}

#[test]
fn run_then_eval_produces_the_full_artifact_set() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = run_config(dir.path());
    let out_dir = dir.path().join("out");
    let out = propplan(&[
        "run",
        "--domain",
        BASE,
        "--config",
        cfg.to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
        "--trace",
    ]);
    assert_eq!(code(&out), 0, "{out:?}");
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("termination: GoalLearned"), "{stdout}");
    for f in ["extended.pddl", "report.json", "models.json", "world.json", "trace.log"] {
        assert!(out_dir.join(f).is_file(), "missing {f}");
    }
    assert!(out_dir.join("datasets/tv_is_turned_on.csv").is_file());
    assert!(out_dir.join("datasets/tv_not_is_turned_on.csv").is_file());
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("report.json")).unwrap())
            .unwrap();
    assert_eq!(report["termination"], "GoalLearned");

    let out = propplan(&[
        "eval",
        "--config",
        cfg.to_str().unwrap(),
        "--models",
        out_dir.join("models.json").to_str().unwrap(),
        "--out-dir",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0, "{out:?}");
    let csv = fs::read_to_string(out_dir.join("metrics.csv")).unwrap();
    assert!(csv.starts_with("type,property,n,tp,fp,fn,tn,precision,recall\n"), "{csv}");
    assert!(out_dir.join("metrics.json").is_file());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("weighted precision"), "{stdout}");
}

#[test]
fn reruns_with_the_same_seed_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = run_config(dir.path());
    let (d1, d2) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&d1, &d2] {
        let out = propplan(&[
            "run",
            "--domain",
            BASE,
            "--config",
            cfg.to_str().unwrap(),
            "--out-dir",
            d.to_str().unwrap(),
        ]);
        assert_eq!(code(&out), 0, "{out:?}");
    }
    for f in [
        "report.json",
        "models.json",
        "world.json",
        "extended.pddl",
        "datasets/tv_is_turned_on.csv",
        "datasets/tv_not_is_turned_on.csv",
    ] {
        assert_eq!(
            fs::read(d1.join(f)).unwrap(),
            fs::read(d2.join(f)).unwrap(),
            "artifact {f} differs between reruns"
        );
    }
}
