//! End-to-end tests of the binary: exit codes, output files, determinism.

use std::path::Path;
use std::process::{Command, Output};

fn imlci(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_imlci"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_minimal_config(dir: &Path) -> std::path::PathBuf {
    let config = serde_json::json!({
        "dgp": {"kind": "linear", "p": 4},
        "n": 100,
        "miss": {"mechanism": "mcar", "proportion": 0.1},
        "imputer": {"kind": "mean"},
        "learner": {"kind": "ols"},
        "explainers": ["pfi"],
        "resample": {"strategy": "bootstrap", "k": 4, "refits_used": 4},
        "variance": {"adjusted": true},
        "replications": 10,
        "ground_truth_replications": 10,
        "seed": 7
    });
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path
}

fn write_small_csv(dir: &Path) -> std::path::PathBuf {
    // y = x1 - x2 + noise-ish values, 40 rows
    let mut text = String::from("x1,x2,y\n");
    let mut state = 88172645463325252u64;
    let mut next = || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64 * 4.0 - 2.0
    };
    for _ in 0..40 {
        let x1 = next();
        let x2 = next();
        let y = x1 - x2 + 0.3 * next();
        text.push_str(&format!("{x1},{x2},{y}\n"));
    }
    let path = dir.join("data.csv");
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn simulate_minimal_config_writes_results() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_minimal_config(dir.path());
    let out = imlci(
        &[
            "simulate",
            "--config",
            config.to_str().unwrap(),
            "--out",
            "run",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let results = std::fs::read_to_string(dir.path().join("run/results.csv")).unwrap();
    // one row per feature plus the aggregate
    assert_eq!(results.lines().count(), 1 + 4 + 1);
    for feature in ["x1", "x2", "x3", "x4"] {
        assert!(
            results.contains(&format!(",{feature},")),
            "missing {feature}"
        );
    }
    assert!(dir.path().join("run/manifest.json").exists());
    assert!(dir.path().join("run/ground_truth.csv").exists());
}

#[test]
fn unknown_imputer_fails_with_exit_2_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_minimal_config(dir.path());
    let text = std::fs::read_to_string(&config)
        .unwrap()
        .replace("\"mean\"", "\"meen\"");
    std::fs::write(&config, text).unwrap();
    let out = imlci(
        &[
            "simulate",
            "--config",
            config.to_str().unwrap(),
            "--out",
            "run",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("meen"), "stderr: {stderr}");
}

#[test]
fn bad_override_path_fails_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_minimal_config(dir.path());
    let out = imlci(
        &[
            "simulate",
            "--config",
            config.to_str().unwrap(),
            "--out",
            "run",
            "--set",
            "resampl.k=9",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn same_seed_gives_byte_identical_results() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_minimal_config(dir.path());
    for run in ["a", "b"] {
        let out = imlci(
            &[
                "simulate",
                "--config",
                config.to_str().unwrap(),
                "--out",
                run,
            ],
            dir.path(),
        );
        assert!(out.status.success());
    }
    let a = std::fs::read(dir.path().join("a/results.csv")).unwrap();
    let b = std::fs::read(dir.path().join("b/results.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn resume_skips_completed_settings_and_reproduces_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_minimal_config(dir.path());
    let run = |out: &str| {
        imlci(
            &[
                "simulate",
                "--config",
                config.to_str().unwrap(),
                "--out",
                out,
            ],
            dir.path(),
        )
    };
    assert!(run("full").status.success());
    let full = std::fs::read(dir.path().join("full/results.csv")).unwrap();

    // truncate a copy mid-block and resume it
    let text = String::from_utf8(full.clone()).unwrap();
    let truncated: String = text.lines().take(3).map(|l| format!("{l}\n")).collect();
    std::fs::create_dir_all(dir.path().join("resumed")).unwrap();
    std::fs::write(dir.path().join("resumed/results.csv"), truncated).unwrap();
    let out = run("resumed");
    assert!(out.status.success());
    let resumed = std::fs::read(dir.path().join("resumed/results.csv")).unwrap();
    assert_eq!(full, resumed);

    // resuming a complete run skips everything and changes nothing
    let out = run("full");
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("resumed: 1 setting"));
    assert_eq!(
        std::fs::read(dir.path().join("full/results.csv")).unwrap(),
        full
    );
}

#[test]
fn ground_truth_roundtrip_and_stale_hash_refusal() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_minimal_config(dir.path());
    let out = imlci(
        &[
            "ground-truth",
            "--config",
            config.to_str().unwrap(),
            "--out",
            "gt",
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let gt_file = dir.path().join("gt/ground_truth.csv");
    assert!(gt_file.exists());

    // simulate with the matching file succeeds
    let out = imlci(
        &[
            "simulate",
            "--config",
            config.to_str().unwrap(),
            "--out",
            "sim",
            "--ground-truth",
            gt_file.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    // a mismatched hash is refused with exit 2
    let out = imlci(
        &[
            "simulate",
            "--config",
            config.to_str().unwrap(),
            "--out",
            "sim2",
            "--seed",
            "8",
            "--ground-truth",
            gt_file.to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn explain_writes_tables_and_respects_alpha_nesting() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_small_csv(dir.path());
    let base = [
        "explain",
        "--data",
        data.to_str().unwrap(),
        "--target",
        "y",
        "--k",
        "4",
        "--refits",
        "4",
        "--grid",
        "4",
        "--seed",
        "5",
    ];
    let mut wide = base.to_vec();
    wide.extend(["--alpha", "0.05", "--out", "wide"]);
    let out = imlci(&wide, dir.path());
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mut narrow = base.to_vec();
    narrow.extend(["--alpha", "0.5", "--out", "narrow"]);
    assert!(imlci(&narrow, dir.path()).status.success());

    for file in ["pd.csv", "pfi.csv", "shap.csv", "mse.csv", "manifest.json"] {
        assert!(
            dir.path().join("wide").join(file).exists(),
            "missing {file}"
        );
    }

    // alpha = 0.5 intervals sit strictly inside alpha = 0.05 intervals
    let parse = |name: &str, file: &str| -> Vec<(f64, f64)> {
        std::fs::read_to_string(dir.path().join(name).join(file))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                let lo: f64 = f[f.len() - 2].parse().unwrap();
                let hi: f64 = f[f.len() - 1].parse().unwrap();
                (lo, hi)
            })
            .collect()
    };
    for file in ["pd.csv", "pfi.csv", "shap.csv"] {
        let w = parse("wide", file);
        let n = parse("narrow", file);
        assert_eq!(w.len(), n.len());
        for ((wl, wh), (nl, nh)) in w.iter().zip(&n) {
            assert!(
                nl >= wl && nh <= wh,
                "{file}: [{nl},{nh}] not in [{wl},{wh}]"
            );
        }
    }
}

#[test]
fn explain_missing_file_is_a_runtime_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = imlci(
        &["explain", "--data", "nope.csv", "--target", "y"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn explain_unknown_target_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = write_small_csv(dir.path());
    let out = imlci(
        &[
            "explain",
            "--data",
            data.to_str().unwrap(),
            "--target",
            "zzz",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("zzz"));
}
