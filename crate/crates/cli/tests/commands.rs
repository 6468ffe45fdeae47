//! The `wrs` binary end to end: artifacts, exit codes and overrides.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};
use wrs_cli::{bench, RunConfig};

fn wrs(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_wrs"))
        .args(args)
        .output()
        .unwrap()
}

fn small_config(dir: &Path, extra: Value) -> std::path::PathBuf {
    let mut cfg = json!({
        "scene": { "kind": "checker", "scale": 8, "velocity": 2 },
        "geometry": { "width_px": 96, "height_px": 64, "horizontal_fov_deg": 4.0 },
        "scanpath": { "synth": { "fixations": 3, "fixation_frames": 4, "saccade_deg": 1.0, "seed": 2 } },
        "frames": 10,
        "seed": 5,
        "out": dir.join("out")
    });
    for (k, v) in extra.as_object().unwrap() {
        cfg[k] = v.clone();
    }
    let path = dir.join("run.json");
    fs::write(&path, cfg.to_string()).unwrap();
    path
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

#[test]
fn simulate_writes_frames_metrics_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), json!({}));
    let o = wrs(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let out = tmp.path().join("out");
    let pngs: usize = ["fov", "wrs"]
        .iter()
        .map(|m| fs::read_dir(out.join(m)).unwrap().count())
        .sum();
    assert_eq!(pngs, 20);
    let csv = fs::read_to_string(out.join("metrics.csv")).unwrap();
    assert_eq!(csv.lines().count(), 21);
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["seed"], 5);
    assert_eq!(
        manifest["frame_hashes"]["wrs"].as_array().unwrap().len(),
        10
    );
    let summary: Value =
        serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert!(summary["methods"]["wrs"]["mean_ssim"].is_number());
}

#[test]
fn manifest_reproduces_the_run() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), json!({}));
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    assert!(wrs(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        a.to_str().unwrap()
    ])
    .status
    .success());
    // rerun from the first manifest's resolved config alone
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    let mut resolved = manifest["config"].clone();
    resolved["out"] = json!(b);
    let path = tmp.path().join("resolved.json");
    fs::write(&path, resolved.to_string()).unwrap();
    assert!(wrs(&["simulate", "--config", path.to_str().unwrap()])
        .status
        .success());
    let again: Value =
        serde_json::from_str(&fs::read_to_string(b.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["frame_hashes"], again["frame_hashes"]);
}

#[test]
fn missing_scanpath_is_a_config_error_naming_the_path() {
    let tmp = tempfile::tempdir().unwrap();
    let missing = tmp.path().join("nowhere").join("gaze.csv");
    let cfg = small_config(tmp.path(), json!({ "scanpath": { "path": missing } }));
    let o = wrs(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(
        stderr(&o).contains(missing.to_str().unwrap()),
        "{}",
        stderr(&o)
    );
}

#[test]
fn config_errors_exit_two_and_name_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), json!({ "frames": 0 }));
    let o = wrs(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("frames"));

    let cfg = small_config(
        tmp.path(),
        json!({ "geometry": { "width_px": 96, "height_px": 64, "horizontal_fov_deg": -1 } }),
    );
    let o = wrs(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("geometry"));

    fs::write(tmp.path().join("bad.json"), "{ nope").unwrap();
    let o = wrs(&[
        "simulate",
        "--config",
        tmp.path().join("bad.json").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));

    let o = wrs(&["simulate", "--method", "both", "--frames", "zero"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unwritable_output_is_a_runtime_error() {
    let tmp = tempfile::tempdir().unwrap();
    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let cfg = small_config(tmp.path(), json!({ "out": blocker }));
    let o = wrs(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

#[test]
fn flags_override_the_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), json!({}));
    let out = tmp.path().join("o");
    let o = wrs(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--method",
        "wrs",
        "--frames",
        "3",
        "--seed",
        "8",
        "--fovea-deg",
        "1",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let manifest: Value =
        serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    let c = &manifest["config"];
    assert_eq!(
        (c["frames"].as_u64(), c["seed"].as_u64()),
        (Some(3), Some(8))
    );
    assert_eq!(c["methods"], json!(["wrs"]));
    assert_eq!(c["pipeline"]["weights"]["r_f"], 0.5);
    assert!(!out.join("fov").exists());
}

#[test]
fn sixteen_bit_frames_on_request() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(
        tmp.path(),
        json!({ "png16": true, "frames": 1, "methods": ["fov"] }),
    );
    assert!(wrs(&["simulate", "--config", cfg.to_str().unwrap()])
        .status
        .success());
    let png = fs::read(tmp.path().join("out/fov/000000.png")).unwrap();
    // IHDR bit depth byte
    assert_eq!(png[24], 16);
}

#[test]
fn scanpath_synth_writes_a_parseable_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), json!({}));
    let path = tmp.path().join("gaze.csv");
    let o = wrs(&[
        "scanpath",
        "synth",
        "--config",
        cfg.to_str().unwrap(),
        "--fixations",
        "4",
        "--fixation-frames",
        "5",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(&path).unwrap();
    assert_eq!(text.lines().count(), 21);
    // and feeds straight back into simulate
    let cfg = small_config(
        tmp.path(),
        json!({ "scanpath": { "path": path }, "frames": 4 }),
    );
    assert!(wrs(&["simulate", "--config", cfg.to_str().unwrap()])
        .status
        .success());
}

#[test]
fn serve_on_a_busy_port_exits_three() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), json!({}));
    let taken = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let port = taken.local_addr().unwrap().port().to_string();
    let o = wrs(&["serve", "--config", cfg.to_str().unwrap(), "--port", &port]);
    assert_eq!(o.status.code(), Some(3), "{}", stderr(&o));
}

fn bench_config(w: usize, h: usize) -> RunConfig {
    let mut cfg: RunConfig = serde_json::from_value(json!({
        "scene": { "kind": "perlin_texture", "scale": 16, "velocity": 1 },
        "geometry": { "width_px": w, "height_px": h, "horizontal_fov_deg": w as f64 / 48.0 },
        "frames": 100,
    }))
    .unwrap();
    cfg.methods = vec![wrs_core::Method::Wrs];
    cfg
}

#[test]
fn bench_stages_account_for_the_frame_time() {
    let report = bench(&bench_config(160, 96)).unwrap();
    let b = &report.methods[&wrs_core::Method::Wrs];
    let stage_sum: f64 = b.stages.values().map(|p| p.mean).sum();
    let total = b.frame_ms.mean;
    assert!(
        (stage_sum - total).abs() <= 0.1 * total,
        "stages {stage_sum} vs frame {total}"
    );
    let keys: Vec<_> = b.stages.keys().cloned().collect();
    assert_eq!(keys, ["bias_combine", "foveate", "metrics", "reproject"]);
    assert_eq!(report.frames, 100);
}

#[test]
fn bench_scales_with_resolution() {
    let small = bench(&bench_config(160, 96)).unwrap();
    let large = bench(&bench_config(320, 192)).unwrap();
    let step = |r: &wrs_cli::BenchReport| r.methods[&wrs_core::Method::Wrs].step_ms.median;
    assert!(
        step(&large) > 1.5 * step(&small),
        "{} vs {}",
        step(&large),
        step(&small)
    );
}
