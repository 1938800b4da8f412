use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pcgscreen::dataio::{load_manifest, load_recording, write_recording, Recording};
use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_pcgscreen");

fn small_config(dir: &Path, extra: &str) -> PathBuf {
    let text = format!(
        r#"seed = 3

[paths]
manifest = "data/manifest.csv"
annotations = "data/annotations.csv"
output_dir = "out"

[synth]
n_per_class = 6
n_heldout_per_class = 2

[features]
channels = [2, 3]
frames = 20
coeff_hi = 4

[search]
max_size = 2

[cv]
k = 3
iterations = 2
ranking = {{ method = "none" }}
{extra}"#
    );
    let path = dir.join("pipeline.toml");
    fs::write(&path, text).unwrap();
    path
}

fn run(config: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .arg("--config")
        .arg(config)
        .args(args)
        .output()
        .unwrap()
}

fn ok_json(out: &Output) -> Value {
    assert!(
        out.status.success(),
        "exit {:?}, stderr {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).unwrap()
}

fn err_json(out: &Output, code: i32) -> Value {
    assert_eq!(out.status.code(), Some(code), "stderr {}", String::from_utf8_lossy(&out.stderr));
    let v: Value = serde_json::from_slice(&out.stderr).expect("error JSON on stderr");
    assert_eq!(v["error"]["exit_code"], code);
    v
}

fn read(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn full_workflow_produces_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let out = dir.path().join("out");

    ok_json(&run(&cfg, &["synth"]));
    assert_eq!(load_manifest(dir.path().join("data/manifest.csv")).unwrap().entries.len(), 16);

    assert_eq!(ok_json(&run(&cfg, &["preprocess"]))["details"]["cache"], "miss");
    assert_eq!(ok_json(&run(&cfg, &["preprocess"]))["details"]["cache"], "hit");
    assert_eq!(ok_json(&run(&cfg, &["extract"]))["details"]["cache"], "miss");
    assert_eq!(ok_json(&run(&cfg, &["extract"]))["details"]["cache"], "hit");
    let features = read(&out.join("features.json"));
    assert_eq!(features["result"]["channels"]["2"]["n_features"], 100);
    assert_eq!(features["result"]["fused_features"], 200);
    let csv = fs::read_to_string(out.join("features/train_ch2.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 12 * 3);

    ok_json(&run(&cfg, &["evaluate"]));
    let report = read(&out.join("evaluate.json"));
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["tool"]["version"], env!("CARGO_PKG_VERSION"));
    assert_eq!(report["config"]["seed"], 3);
    assert_eq!(report["resolved"]["cv"]["k"], 3);
    let r = &report["result"]["report"];
    assert_eq!(r["models"].as_array().unwrap().len(), 6);
    for block in ["epoch_metrics", "subject_metrics"] {
        let acc = r[block]["acc"].as_f64().unwrap();
        assert!((0.0..=1.0).contains(&acc));
    }
    assert!(r["subject_metrics"]["acc"].as_f64().unwrap() >= 0.75);

    ok_json(&run(&cfg, &["predict"]));
    let pred = read(&out.join("predict.json"));
    assert_eq!(pred["result"]["predictions"].as_array().unwrap().len(), 4);

    ok_json(&run(&cfg, &["search"]));
    let search = read(&out.join("search.json"));
    assert_eq!(search["result"]["rows"].as_array().unwrap().len(), 3);
    assert_eq!(search["result"]["best_per_cardinality"].as_array().unwrap().len(), 2);

    let rep = ok_json(&run(&cfg, &["report"]));
    for name in ["psd_ch2.svg", "box_ch3.svg", "cepstral_ch2.svg", "report.md", "stats.json"] {
        assert!(out.join("report").join(name).is_file(), "{name} missing");
    }
    let svg = fs::read_to_string(out.join("report/psd_ch2.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
    let md = fs::read_to_string(out.join("report/report.md")).unwrap();
    assert!(md.contains("Cross-validation") && md.contains("Held-out cohort"));
    assert!(rep["outputs"].as_array().unwrap().len() >= 8);
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    ok_json(&run(&cfg, &["synth"]));
    ok_json(&run(&cfg, &["evaluate"]));
    let first = fs::read(dir.path().join("out/evaluate.json")).unwrap();
    fs::remove_dir_all(dir.path().join("out/cache")).unwrap();
    ok_json(&run(&cfg, &["--jobs", "1", "evaluate"]));
    let second = fs::read(dir.path().join("out/evaluate.json")).unwrap();
    assert_eq!(first, second);
}

#[test]
fn seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    ok_json(&run(&cfg, &["synth"]));
    ok_json(&run(&cfg, &["--seed", "11", "evaluate"]));
    let report = read(&dir.path().join("out/evaluate.json"));
    assert_eq!(report["config"]["seed"], 11);
    assert_eq!(report["result"]["report"]["config"]["seed"], 11);
}

#[test]
fn changed_inputs_invalidate_caches() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    ok_json(&run(&cfg, &["synth"]));
    assert_eq!(ok_json(&run(&cfg, &["extract"]))["details"]["cache"], "miss");

    // a different recording must not reuse the old epochs
    let m = load_manifest(dir.path().join("data/manifest.csv")).unwrap();
    let mut rec = load_recording(&m.entries[0].path).unwrap();
    for ch in &mut rec.channels {
        ch.reverse();
    }
    write_recording(&m.entries[0].path, &rec).unwrap();
    assert_eq!(ok_json(&run(&cfg, &["preprocess"]))["details"]["cache"], "miss");

    // a different feature config must not reuse the old matrices
    let cfg2 = small_config(dir.path(), "");
    let text = fs::read_to_string(&cfg2).unwrap().replace("frames = 20", "frames = 22");
    fs::write(&cfg2, text).unwrap();
    assert_eq!(ok_json(&run(&cfg2, &["extract"]))["details"]["cache"], "miss");
    assert_eq!(read(&dir.path().join("out/features.json"))["result"]["channels"]["2"]["n_features"], 110);

    // a corrupted cache file is rebuilt
    for entry in fs::read_dir(dir.path().join("out/cache")).unwrap() {
        fs::write(entry.unwrap().path(), b"garbage").unwrap();
    }
    assert_eq!(ok_json(&run(&cfg2, &["extract"]))["details"]["cache"], "miss");
}

#[test]
fn missing_manifest_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    let v = err_json(&run(&cfg, &["evaluate"]), 1);
    assert_eq!(v["error"]["kind"], "config");
    assert!(v["error"]["message"].as_str().unwrap().contains("manifest"));
}

#[test]
fn bad_config_values_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    err_json(&run(&dir.path().join("absent.toml"), &["evaluate"]), 1);
    let cfg = small_config(dir.path(), "bogus = 1\n");
    err_json(&run(&cfg, &["synth"]), 1);
    let cfg = small_config(dir.path(), "");
    let text = fs::read_to_string(&cfg).unwrap().replace("channels = [2, 3]", "channels = [9]");
    fs::write(&cfg, text).unwrap();
    err_json(&run(&cfg, &["synth"]), 1);
    let no_config = Command::new(BIN).arg("evaluate").output().unwrap();
    err_json(&no_config, 1);
}

#[test]
fn malformed_data_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    ok_json(&run(&cfg, &["synth"]));
    let manifest = dir.path().join("data/manifest.csv");
    let text = fs::read_to_string(&manifest).unwrap();
    let broken = text.replacen(",CAD,", ",sick,", 1).replacen(",cad,", ",sick,", 1);
    assert_ne!(text, broken);
    fs::write(&manifest, broken).unwrap();
    let v = err_json(&run(&cfg, &["preprocess"]), 2);
    assert_eq!(v["error"]["kind"], "data");
}

#[test]
fn silent_recording_is_a_numeric_failure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = small_config(dir.path(), "");
    ok_json(&run(&cfg, &["synth"]));
    let m = load_manifest(dir.path().join("data/manifest.csv")).unwrap();
    let rec = load_recording(&m.entries[0].path).unwrap();
    let silent = Recording::new(
        rec.subject_id.clone(),
        vec![vec![0.0; rec.n_samples()]; rec.n_channels()],
        rec.fs_hz,
        rec.encoding,
    )
    .unwrap();
    write_recording(&m.entries[0].path, &silent).unwrap();
    let v = err_json(&run(&cfg, &["preprocess"]), 3);
    assert_eq!(v["error"]["kind"], "numeric");
}

#[test]
fn help_exits_cleanly() {
    let out = Command::new(BIN).arg("--help").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["synth", "preprocess", "extract", "evaluate", "search", "predict", "report"] {
        assert!(text.contains(cmd));
    }
}
