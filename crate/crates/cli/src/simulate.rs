//! Offline replay of a scanpath over a frame sequence with per-frame metrics.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use wrs_core::{
    psnr, run_with, write_png, FrameRecord, Image, Method, PngDepth, RunReport, SsimEvaluator,
};

use crate::config::ScanpathSource;
use crate::{CliError, Frames, RunConfig};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const METRICS_CSV: &str = "metrics.csv";
pub const SUMMARY_JSON: &str = "summary.json";

/// Everything needed to reproduce a run, plus the hash of every output frame.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub config: RunConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scanpath_sha256: Option<String>,
    /// SHA-256 of each output frame's f32 samples, little-endian, row-major.
    pub frame_hashes: BTreeMap<Method, Vec<String>>,
}

pub struct SimulateOutput {
    pub report: RunReport,
    pub manifest: Manifest,
}

pub fn frame_hash(image: &Image) -> String {
    let mut h = Sha256::new();
    for p in image.as_slice() {
        for c in p {
            h.update(c.to_le_bytes());
        }
    }
    hex::encode(h.finalize())
}

fn write(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents)
        .map_err(|e| CliError::runtime(format!("cannot write {}: {e}", path.display())))
}

/// Runs every configured method and writes frames, metrics and the manifest
/// under `cfg.out`.
pub fn simulate(cfg: &RunConfig) -> Result<SimulateOutput, CliError> {
    cfg.validate()?;
    let scanpath = cfg.load_scanpath()?;
    let frames = Frames::open(cfg)?;
    fs::create_dir_all(&cfg.out)
        .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", cfg.out.display())))?;
    let depth = if cfg.png16 {
        PngDepth::Sixteen
    } else {
        PngDepth::Eight
    };

    let mut records = Vec::new();
    let mut frame_hashes = BTreeMap::new();
    for &method in &cfg.methods {
        let dir = cfg.out.join(method.name());
        if cfg.write_frames {
            fs::create_dir_all(&dir)
                .map_err(|e| CliError::runtime(format!("cannot create {}: {e}", dir.display())))?;
        }
        let mut ssim: Option<SsimEvaluator> = None;
        let mut hashes = Vec::with_capacity(cfg.frames as usize);
        let mut current = 0;
        run_with(
            frames.iter(cfg.frames),
            &scanpath,
            method,
            &cfg.pipeline,
            &cfg.geometry,
            cfg.seed,
            |index, bundle, out| {
                current = index;
                let t = Instant::now();
                let psnr_db = psnr(out.image, &bundle.color)?;
                let evaluator = match ssim.as_mut() {
                    Some(e) => {
                        if !frames.is_static() {
                            e.set_reference(&bundle.color)?;
                        }
                        e
                    }
                    None => ssim.insert(SsimEvaluator::new(&bundle.color)?),
                };
                let ssim = evaluator.score(out.image)?;
                records.push(FrameRecord {
                    method,
                    frame: index,
                    psnr_db,
                    ssim,
                    timings: out.timings,
                    metrics_ms: t.elapsed().as_secs_f64() * 1e3,
                });
                hashes.push(frame_hash(out.image));
                if cfg.write_frames {
                    write_png(&dir.join(format!("{index:06}.png")), out.image, depth)?;
                }
                Ok(())
            },
        )
        .map_err(|e| CliError::runtime(format!("{method} frame {current}: {e}")))?;
        frame_hashes.insert(method, hashes);
    }

    let report = RunReport::from_records(records).map_err(CliError::runtime)?;
    let scanpath_sha256 = match &cfg.scanpath {
        ScanpathSource::Path(p) => {
            let bytes =
                fs::read(p).map_err(|e| CliError::runtime(format!("{}: {e}", p.display())))?;
            Some(hex::encode(Sha256::digest(&bytes)))
        }
        ScanpathSource::Synth(_) => None,
    };
    let manifest = Manifest {
        tool: "wrs".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config: cfg.clone(),
        scanpath_sha256,
        frame_hashes,
    };
    write(&cfg.out.join(METRICS_CSV), &report.to_csv())?;
    write(
        &cfg.out.join(SUMMARY_JSON),
        &report.summary_json().map_err(CliError::runtime)?,
    )?;
    let json = serde_json::to_string_pretty(&manifest).map_err(CliError::runtime)?;
    write(&cfg.out.join(MANIFEST_FILE), &json)?;
    Ok(SimulateOutput { report, manifest })
}
