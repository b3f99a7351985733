use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn gaitmag(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gaitmag"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = gaitmag(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

const SMALL: &[&str] = &["--subjects", "2", "--recordings", "1", "--duration", "4"];

fn simulate(dir: &Path, extra: &[&str]) {
    let mut args = vec!["simulate", "--out", p(dir)];
    args.extend_from_slice(SMALL);
    args.extend_from_slice(extra);
    ok(&args);
}

#[test]
fn simulate_writes_manifest_and_one_file_per_recording() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("nested/sim");
    simulate(&out, &[]);
    let manifest = fs::read_to_string(out.join("manifest.csv")).unwrap();
    // 2 subjects x 4 activities x 1 recording x 2 modalities
    assert_eq!(manifest.lines().count(), 1 + 16);
    assert_eq!(fs::read_dir(out.join("magnetic")).unwrap().count(), 8);
    assert_eq!(fs::read_dir(out.join("imu")).unwrap().count(), 8);
    let summary = json(&out.join("simulate.json"));
    assert_eq!(summary["recordings"], 16);
    assert_eq!(summary["config"]["simulate"]["n_subjects"], 2);
    assert!(out.join("config.toml").exists());
    assert!(!out.join(".gaitmag.lock").exists());
}

#[test]
fn effective_config_round_trips_through_config_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    simulate(&a, &["--seed", "11"]);
    ok(&[
        "simulate",
        "--config",
        p(&a.join("config.toml")),
        "--out",
        p(&b),
    ]);
    assert_eq!(
        fs::read(a.join("manifest.csv")).unwrap(),
        fs::read(b.join("manifest.csv")).unwrap()
    );
    assert_eq!(
        fs::read(a.join("magnetic/s02_WW_r0.csv")).unwrap(),
        fs::read(b.join("magnetic/s02_WW_r0.csv")).unwrap()
    );
}

#[test]
fn invalid_window_length_is_a_validation_error_and_writes_nothing() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("never");
    let res = gaitmag(&["simulate", "--window-len", "300", "--out", p(&out)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("window"));
    assert!(!out.exists());
}

#[test]
fn unknown_flag_and_bad_toml_exit_with_code_2() {
    let tmp = tempfile::tempdir().unwrap();
    assert_eq!(
        gaitmag(&["simulate", "--frobnicate", "--out", "x"])
            .status
            .code(),
        Some(2)
    );
    let cfg = tmp.path().join("bad.toml");
    fs::write(&cfg, "[simulate]\nno_such_key = 1\n").unwrap();
    let out = tmp.path().join("o");
    let res = gaitmag(&["simulate", "--config", p(&cfg), "--out", p(&out)]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn held_lock_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("busy");
    fs::create_dir_all(&out).unwrap();
    fs::write(out.join(".gaitmag.lock"), "").unwrap();
    let mut args = vec!["simulate", "--out", p(&out)];
    args.extend_from_slice(SMALL);
    let res = gaitmag(&args);
    assert_eq!(res.status.code(), Some(3));
    assert!(!out.join("manifest.csv").exists());
}

#[test]
fn noiseless_tracking_recovers_truth() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    simulate(&sim, &["--noiseless", "--field-log"]);
    let out = tmp.path().join("track");
    ok(&[
        "track",
        "--input",
        p(&sim.join("field/s01_W_r0.csv")),
        "--out",
        p(&out),
    ]);
    let summary = json(&out.join("track.json"));
    let truth = &summary["truth"];
    assert!(truth["max_position_error_m"].as_f64().unwrap() < 1e-9);
    assert!(truth["max_orientation_error_rad"].as_f64().unwrap() < 1e-9);
    let poses = fs::read_to_string(out.join("poses.csv")).unwrap();
    assert_eq!(
        poses.lines().count() as u64,
        summary["poses"].as_u64().unwrap() + 1
    );
}

#[test]
fn tracking_without_truth_columns_omits_the_error_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    simulate(&sim, &["--noiseless", "--field-log"]);
    let text = fs::read_to_string(sim.join("field/s01_J_r0.csv")).unwrap();
    let stripped: String = text
        .lines()
        .map(|l| l.split(',').take(13).collect::<Vec<_>>().join(",") + "\n")
        .collect();
    let input = tmp.path().join("no_truth.csv");
    fs::write(&input, stripped).unwrap();
    let out = tmp.path().join("track");
    ok(&["track", "--input", p(&input), "--out", p(&out)]);
    assert!(json(&out.join("track.json"))["truth"].is_null());
}

#[test]
fn corrupt_field_row_reports_its_line() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    simulate(&sim, &["--noiseless", "--field-log"]);
    let text = fs::read_to_string(sim.join("field/s01_M_r0.csv")).unwrap();
    let mut lines: Vec<String> = text.lines().map(String::from).collect();
    lines[4] = lines[4].replacen(',', ",oops,", 1);
    let input = tmp.path().join("bad.csv");
    fs::write(&input, lines.join("\n") + "\n").unwrap();
    let res = gaitmag(&[
        "track",
        "--input",
        p(&input),
        "--out",
        p(&tmp.path().join("t")),
    ]);
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("line 5"));
}

#[test]
fn preprocess_is_byte_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    simulate(&sim, &[]);
    let manifest = sim.join("manifest.csv");
    for modality in ["magnetic", "imu"] {
        let a = tmp.path().join(format!("{modality}_a"));
        let b = tmp.path().join(format!("{modality}_b"));
        for out in [&a, &b] {
            ok(&[
                "preprocess",
                "--modality",
                modality,
                "--manifest",
                p(&manifest),
                "--out",
                p(out),
            ]);
        }
        assert_eq!(
            fs::read(a.join("dataset.gmds")).unwrap(),
            fs::read(b.join("dataset.gmds")).unwrap()
        );
        assert_eq!(
            fs::read(a.join("dataset.json")).unwrap(),
            fs::read(b.join("dataset.json")).unwrap()
        );
        let summary = json(&a.join("dataset.json"));
        let n = summary["windows"].as_u64().unwrap();
        let per_label: u64 = summary["windows_per_label"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_u64().unwrap())
            .sum();
        assert_eq!(per_label, n);
        assert_eq!(
            summary["n_features"],
            if modality == "magnetic" { 12 } else { 18 }
        );
    }
}

#[test]
fn missing_recording_file_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let sim = tmp.path().join("sim");
    simulate(&sim, &[]);
    fs::remove_file(sim.join("magnetic/s01_W_r0.csv")).unwrap();
    let res = gaitmag(&[
        "preprocess",
        "--manifest",
        p(&sim.join("manifest.csv")),
        "--out",
        p(&tmp.path().join("ds")),
    ]);
    assert_eq!(res.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&res.stderr).contains("s01_W_r0.csv"));
}

/// Six-second recordings from three subjects give enough test windows for
/// every class to appear.
fn dataset(dir: &Path, modality: &str) -> std::path::PathBuf {
    let sim = dir.join("sim");
    if !sim.exists() {
        ok(&[
            "simulate",
            "--subjects",
            "3",
            "--recordings",
            "2",
            "--duration",
            "6",
            "--out",
            p(&sim),
        ]);
    }
    let out = dir.join(format!("ds_{modality}"));
    ok(&[
        "preprocess",
        "--modality",
        modality,
        "--manifest",
        p(&sim.join("manifest.csv")),
        "--out",
        p(&out),
    ]);
    out.join("dataset.gmds")
}

#[test]
fn train_eval_and_ablate_write_their_reports() {
    let tmp = tempfile::tempdir().unwrap();
    let ds = dataset(tmp.path(), "magnetic");
    let quick = ["--epochs", "1", "--runs", "2", "--arch", "cnn"];

    let tr = tmp.path().join("train");
    let mut args = vec!["train", "--dataset", p(&ds), "--out", p(&tr)];
    args.extend_from_slice(&quick);
    ok(&args);
    let bytes = fs::read(tr.join("model.gnnp")).unwrap();
    let model = gaitnet::io::read_params(&bytes).unwrap();
    assert_eq!(model.config().n_features, 12);
    assert_eq!(
        json(&tr.join("train.json"))["history"]["epochs"]
            .as_array()
            .unwrap()
            .len(),
        1
    );

    let ev = tmp.path().join("eval");
    let mut args = vec!["eval", "--dataset", p(&ds), "--out", p(&ev)];
    args.extend_from_slice(&quick);
    ok(&args);
    let report = json(&ev.join("report.json"));
    assert_eq!(report["n_runs"], 2);
    assert_eq!(report["runs"].as_array().unwrap().len(), 2);
    assert_eq!(report["config"]["eval"]["runs"], 2);
    let acc = report["mean_accuracy"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&acc));
    for name in ["report.txt", "roc.csv", "roc.svg", "config.toml"] {
        assert!(ev.join(name).exists(), "{name}");
    }
    assert!(fs::read_to_string(ev.join("roc.svg"))
        .unwrap()
        .starts_with("<svg"));

    let ab = tmp.path().join("ablate");
    let mut args = vec!["ablate", "--dataset", p(&ds), "--out", p(&ab)];
    args.extend_from_slice(&quick);
    ok(&args);
    let ablation = json(&ab.join("ablation.json"));
    for subset in ["position", "orientation", "combined"] {
        assert_eq!(ablation[subset]["n_runs"], 2, "{subset}");
    }
}

#[test]
fn single_run_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let res = gaitmag(&[
        "eval",
        "--runs",
        "1",
        "--dataset",
        "x",
        "--out",
        p(&tmp.path().join("o")),
    ]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn compare_rejects_datasets_from_different_cohorts() {
    let tmp = tempfile::tempdir().unwrap();
    let mag = dataset(tmp.path(), "magnetic");
    let other = tmp.path().join("other");
    fs::create_dir_all(&other).unwrap();
    let sim = other.join("sim");
    ok(&[
        "simulate",
        "--subjects",
        "4",
        "--recordings",
        "2",
        "--duration",
        "6",
        "--out",
        p(&sim),
    ]);
    let imu = dataset(&other, "imu");
    let res = gaitmag(&[
        "compare",
        "--magnetic",
        p(&mag),
        "--imu",
        p(&imu),
        "--out",
        p(&tmp.path().join("cmp")),
    ]);
    assert_eq!(
        res.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
}
