#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn pltune(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pltune"))
        .args(args)
        .output()
        .expect("spawn pltune")
}

pub fn ok(args: &[&str]) -> Output {
    let out = pltune(args);
    assert!(
        out.status.success(),
        "pltune {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// A small synthetic pipeline config whose inputs live in `data/`.
pub fn write_config(dir: &Path, n_images: usize, n_classes: usize, seed: u64) -> PathBuf {
    let text = format!(
        r#"seed = {seed}

[inputs]
bundle = "data/bundle.json"
detections = ["data/detections_0.json", "data/detections_1.json"]

[[inputs.validation]]
gt = "data/validation_gt.json"
detections = "data/validation_detections.json"

[method]
iou_threshold = 0.5

[grid]
mode = "single"

[synth.world]
n_images = {n_images}
n_classes = {n_classes}

[synth.partition]
n_splits = 2

[synth.detector]
recall_rate = 0.8
fp_per_image = 0.3
tp_score = [5.0, 2.0]
fp_score = [2.0, 5.0]

[synth.validation]
n_images = 200
"#
    );
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

/// Runs the three synth stages into `dir/data`.
pub fn synthesize(config: &Path, jobs: &str) -> PathBuf {
    let data = config.parent().unwrap().join("data");
    let c = s(config);
    ok(&[
        "synth",
        "world",
        "--config",
        c,
        "--output-dir",
        s(&data),
        "--jobs",
        jobs,
    ]);
    ok(&[
        "synth",
        "partition",
        "--config",
        c,
        "--output-dir",
        s(&data),
        "--jobs",
        jobs,
    ]);
    ok(&[
        "synth",
        "detect",
        "--config",
        c,
        "--output-dir",
        s(&data),
        "--jobs",
        jobs,
    ]);
    data
}

/// Sorted `(file name, bytes)` of every file in `dir`.
pub fn snapshot(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().into_string().unwrap(),
                std::fs::read(e.path()).unwrap(),
            )
        })
        .collect();
    files.sort();
    files
}
