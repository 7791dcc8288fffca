//! End-to-end tests of the `relsim` binary: exit-code contract, config
//! resolution, and determinism of a full pipeline run.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn relsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_relsim"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .expect("spawn relsim")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("no exit code")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).expect("stdout utf-8")
}

fn stderr(out: &Output) -> String {
    String::from_utf8(out.stderr.clone()).expect("stderr utf-8")
}

#[test]
fn help_and_version_exit_zero() {
    let help = relsim(&["--help"]);
    assert_eq!(code(&help), 0);
    let text = stdout(&help);
    assert!(text.contains("Exit codes"), "help text: {text}");
    for sub in ["synth", "graphs", "extract", "train", "evaluate", "compare", "all"] {
        assert!(text.contains(sub), "help lists '{sub}'");
    }
    assert_eq!(code(&relsim(&["--version"])), 0);
}

#[test]
fn usage_problems_exit_one() {
    // No subcommand.
    let out = relsim(&[]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("usage"), "stderr: {}", stderr(&out));

    // Unknown flag (rejected by the parser).
    assert_eq!(code(&relsim(&["synth", "--bogus"])), 1);

    // Unparseable value for a known key.
    let out = relsim(&["synth", "--k", "three"]);
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("k"), "stderr: {}", stderr(&out));

    // Parseable but invalid once cross-checked.
    assert_eq!(code(&relsim(&["synth", "--n_intervals", "1"])), 1);

    // Unknown key in a config file, reported with its location.
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "seed=3\nnonsense=1\n").unwrap();
    let out = relsim(&["synth", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&out), 1);
    assert!(
        stderr(&out).contains("bad.cfg:2"),
        "stderr: {}",
        stderr(&out)
    );
}

#[test]
fn print_config_round_trips_through_a_config_file() {
    let out = relsim(&["--print-config"]);
    assert_eq!(code(&out), 0);
    let defaults = stdout(&out);
    assert_eq!(defaults.lines().count(), 27, "one line per key");

    let dir = tempfile::tempdir().unwrap();
    let out = relsim(&[
        "--print-config",
        "--seed",
        "7",
        "--k",
        "3",
        "--graphs",
        "followup",
        "--metric_ks",
        "50,150",
    ]);
    assert_eq!(code(&out), 0);
    let resolved = stdout(&out);
    for line in ["seed=7", "k=3", "graphs=followup", "metric_ks=50,150"] {
        assert!(resolved.contains(line), "resolved config has '{line}'");
    }

    // Feeding the output back in resolves to the same configuration, and a
    // flag still overrides the file.
    let cfg = dir.path().join("resolved.cfg");
    fs::write(&cfg, &resolved).unwrap();
    let again = relsim(&["--print-config", "--config", cfg.to_str().unwrap()]);
    assert_eq!(code(&again), 0);
    assert_eq!(stdout(&again), resolved);

    let overridden = relsim(&[
        "--print-config",
        "--config",
        cfg.to_str().unwrap(),
        "--seed",
        "8",
    ]);
    assert!(stdout(&overridden).contains("seed=8"));
}

#[test]
fn missing_inputs_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let wd = dir.path().join("empty");
    fs::create_dir_all(&wd).unwrap();
    let wd = wd.to_str().unwrap();

    // graphs without an event log.
    let out = relsim(&["graphs", "--workdir", wd]);
    assert_eq!(code(&out), 2);
    assert!(
        stderr(&out).contains("events.csv"),
        "stderr: {}",
        stderr(&out)
    );

    // train without graphs/features.
    let synth = relsim(&[
        "synth",
        "--workdir",
        wd,
        "--n_patients",
        "200",
        "--n_diag_clinicians",
        "20",
        "--n_followup_clinicians",
        "20",
    ]);
    assert_eq!(code(&synth), 0, "stderr: {}", stderr(&synth));
    assert_eq!(
        code(&relsim(&[
            "train",
            "--workdir",
            wd,
            "--n_patients",
            "200",
            "--n_diag_clinicians",
            "20",
            "--n_followup_clinicians",
            "20",
        ])),
        2
    );
}

#[test]
fn solver_budget_exhaustion_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let wd = dir.path().to_str().unwrap();
    let shared = [
        "--workdir",
        wd,
        "--n_patients",
        "300",
        "--n_diag_clinicians",
        "30",
        "--n_followup_clinicians",
        "30",
    ];
    let mut synth_args = vec!["synth"];
    synth_args.extend_from_slice(&shared);
    assert_eq!(code(&relsim(&synth_args)), 0);
    let mut graph_args = vec!["graphs"];
    graph_args.extend_from_slice(&shared);
    assert_eq!(code(&relsim(&graph_args)), 0);

    let mut extract_args = vec!["extract"];
    extract_args.extend_from_slice(&shared);
    extract_args.extend_from_slice(&["--max_iter", "1", "--tol", "1e-15"]);
    let out = relsim(&extract_args);
    assert_eq!(code(&out), 3, "stderr: {}", stderr(&out));
    assert!(
        stderr(&out).contains("no convergence"),
        "stderr: {}",
        stderr(&out)
    );
}

/// Map of relative path -> file bytes for every regular file under `root`.
fn snapshot(root: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut map = BTreeMap::new();
    for entry in fs::read_dir(root).unwrap() {
        let entry = entry.unwrap();
        let name = entry.file_name().into_string().unwrap();
        map.insert(name, fs::read(entry.path()).unwrap());
    }
    map
}

#[test]
fn all_runs_end_to_end_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let mut outputs = Vec::new();
    for run in 0..2 {
        let wd = dir.path().join(format!("run{run}"));
        let out = relsim(&[
            "all",
            "--workdir",
            wd.to_str().unwrap(),
            "--seed",
            "5",
            "--n_patients",
            "800",
            "--n_diag_clinicians",
            "60",
            "--n_followup_clinicians",
            "60",
            "--epochs",
            "300",
        ]);
        assert_eq!(code(&out), 0, "stderr: {}", stderr(&out));
        let text = stdout(&out);
        assert!(text.contains("pr_auc"), "stdout: {text}");
        assert!(text.contains("hits_at_k"), "stdout: {text}");
        outputs.push((text, snapshot(&wd)));
    }

    let (text0, snap0) = &outputs[0];
    let (text1, snap1) = &outputs[1];
    assert_eq!(text0, text1, "compare table differs between runs");
    for name in [
        "events.csv",
        "cohort.csv",
        "graph_i0_diag.csv",
        "graph_i2_followup.csv",
        "features_i0.csv",
        "features_i2.csv",
        "vocabulary.txt",
        "top_clinicians.txt",
        "model_baseline.json",
        "model_augmented.json",
        "eval_baseline.csv",
        "eval_augmented.csv",
        "pr_curve_baseline.csv",
        "topk_curve_augmented.csv",
        "comparison.csv",
    ] {
        assert!(snap0.contains_key(name), "missing artifact {name}");
    }
    assert_eq!(
        snap0.keys().collect::<Vec<_>>(),
        snap1.keys().collect::<Vec<_>>()
    );
    for (name, bytes) in snap0 {
        assert!(
            bytes == &snap1[name],
            "artifact {name} differs between same-seed runs"
        );
    }
}
