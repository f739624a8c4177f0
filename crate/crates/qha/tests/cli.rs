//! CLI contract tests: exit codes, kind matching, and the numerical-guard
//! abort path.

use std::path::Path;
use std::process::Command;

fn qha() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qha"))
}

fn write_config(dir: &Path, name: &str, body: &str) -> std::path::PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, body).unwrap();
    p
}

#[test]
fn usage_and_bad_args_exit_2() {
    let out = qha().output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = qha().args(["accumulate"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    let out = qha()
        .args(["accumulate", "--config", "x.json", "--resolution", "100"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn invalid_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_config(dir.path(), "bad.json", r#"{"kind": "accumulate", "deltas": [2.0]}"#);
    let out = qha()
        .args(["accumulate", "--config", bad.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));

    // kind mismatch between CLI and config
    let ok = write_config(dir.path(), "ok.json", r#"{"kind": "folner"}"#);
    let out = qha()
        .args(["accumulate", "--config", ok.to_str().unwrap()])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn hs_window_guard_exits_3() {
    // an h_S window far too small for the autocorrelation mass must abort
    // with the guard named, never silently produce a wrong answer
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "guard.json",
        r#"{
  "kind": "traceid",
  "window": "gaussian(1.0)",
  "region": "disk(1)",
  "state_n": 256,
  "state_extent": 16.0,
  "quad_per_axis": 64,
  "measure_per_axis": 256,
  "hs_window": 0.5,
  "hs_per_axis": 32,
  "output_dir": "unused"
}
"#,
    );
    let out = qha()
        .args([
            "traceid",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            dir.path().join("out").to_str().unwrap(),
            "--quiet",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("hs-truncation"), "guard not named: {stderr}");
}

#[test]
fn io_failure_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", r#"{"kind": "folner", "scales": [1]}"#);
    let out = qha()
        .args([
            "folner",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            "/proc/no-such-dir/out",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn accumulate_with_empty_deltas_emits_spectra_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "acc.json",
        r#"{
  "kind": "accumulate",
  "window": "gaussian(1.0)",
  "region": "disk(1)",
  "scales": [1.0],
  "deltas": [],
  "state_n": 256,
  "state_extent": 16.0,
  "quad_per_axis": 64,
  "measure_per_axis": 256,
  "output_dir": "unused"
}
"#,
    );
    let out_dir = dir.path().join("out");
    let out = qha()
        .args([
            "accumulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--quiet",
        ])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    assert!(out_dir.join("spectra.csv").exists());
    assert!(out_dir.join("report.md").exists());
    // one accumulation plot per delta: none here
    let plots = std::fs::read_dir(&out_dir)
        .unwrap()
        .filter(|e| {
            e.as_ref()
                .unwrap()
                .file_name()
                .to_string_lossy()
                .starts_with("accumulation_delta_")
        })
        .count();
    assert_eq!(plots, 0);
}

#[test]
fn folner_small_run_produces_expected_columns() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "folner.json",
        r#"{
  "kind": "folner",
  "group": "euclidean2",
  "region": "box(-1,1,-1,1)",
  "sequence": "convex",
  "scales": [1, 2, 4],
  "compact_set": "disk(1)",
  "compact_per_axis": 8,
  "probes": [[0.5, 0.5]],
  "probe_count": 2,
  "quad_per_axis": 128,
  "seed": 11,
  "output_dir": "unused"
}
"#,
    );
    let out_dir = dir.path().join("out");
    let out = qha()
        .args([
            "folner",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--quiet",
        ])
        .env("QHA_THREADS", "2")
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(out_dir.join("folner.csv")).unwrap();
    let header = csv.lines().next().unwrap();
    assert_eq!(
        header,
        "k,mu_Ek,sup_beta_K,beta_at_probe_1,beta_at_probe_2,beta_at_probe_3"
    );
    assert_eq!(csv.lines().count(), 4);
    assert!(out_dir.join("manifest.json").exists());

    // results must not depend on the worker-thread cap
    let out_dir1 = dir.path().join("out1");
    let out = qha()
        .args([
            "folner",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_dir1.to_str().unwrap(),
            "--quiet",
        ])
        .env("QHA_THREADS", "1")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(
        std::fs::read(out_dir.join("folner.csv")).unwrap(),
        std::fs::read(out_dir1.join("folner.csv")).unwrap(),
        "outputs differ across thread counts"
    );
}
