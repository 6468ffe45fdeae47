//! Per-stage timing over a warmed-up run.

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use wrs_core::foveation::foveate_into;
use wrs_core::report::{percentiles, Percentiles};
use wrs_core::{psnr, Image, Method, PipelineState, SsimEvaluator, StageTimings};

use crate::{CliError, Frames, RunConfig};

pub const WARMUP_FRAMES: u64 = 10;
pub const BENCH_JSON: &str = "bench.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodBench {
    /// foveate, reproject, bias_combine and metrics, in ms.
    pub stages: BTreeMap<String, Percentiles>,
    /// Pipeline step alone (all stages but metrics).
    pub step_ms: Percentiles,
    /// Step plus metrics, measured around both.
    pub frame_ms: Percentiles,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub width: usize,
    pub height: usize,
    pub frames: u64,
    pub warmup: u64,
    pub threads: usize,
    pub methods: BTreeMap<Method, MethodBench>,
}

impl BenchReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("bench report serializes")
    }

    /// Human-readable table, one row per method and stage.
    pub fn table(&self) -> String {
        let mut out = format!(
            "{}x{}, {} frames after {} warmup, {} threads\n{:<6} {:<13} {:>9} {:>9} {:>9}\n",
            self.width,
            self.height,
            self.frames,
            self.warmup,
            self.threads,
            "method",
            "stage",
            "mean",
            "median",
            "p99"
        );
        for (method, b) in &self.methods {
            let rows = b
                .stages
                .iter()
                .map(|(k, v)| (k.as_str(), v))
                .chain([("step", &b.step_ms), ("frame", &b.frame_ms)]);
            for (stage, p) in rows {
                out += &format!(
                    "{:<6} {:<13} {:>9.3} {:>9.3} {:>9.3}\n",
                    method.name(),
                    stage,
                    p.mean,
                    p.median,
                    p.p99
                );
            }
        }
        out
    }
}

/// Times `cfg.frames` frames per method after [`WARMUP_FRAMES`] untimed ones.
pub fn bench(cfg: &RunConfig) -> Result<BenchReport, CliError> {
    cfg.validate()?;
    let scanpath = cfg.load_scanpath()?;
    let frames = Frames::open(cfg)?;
    let total = WARMUP_FRAMES + cfg.frames;
    let geom = cfg.geometry;
    let mut methods = BTreeMap::new();
    for &method in &cfg.methods {
        let mut state =
            PipelineState::new(cfg.pipeline, geom, cfg.seed).map_err(CliError::runtime)?;
        let mut fov = Image::filled(geom.width_px, geom.height_px, [0.0; 3]);
        let mut ssim: Option<SsimEvaluator> = None;
        let mut samples: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for i in 0..total {
            let index = frames.available().map_or(i, |n| i % n);
            let bundle = frames
                .get(index)
                .map_err(|e| CliError::runtime(format!("frame {index}: {e}")))?;
            let gaze = scanpath.gaze_at(i);
            let fail = |e: wrs_core::Error| CliError::runtime(format!("{method} frame {i}: {e}"));
            let t0 = Instant::now();
            let (image, timings) = match method {
                Method::Wrs => {
                    let out = state.step(&bundle, gaze).map_err(fail)?;
                    (out.image, out.timings)
                }
                Method::Fov => {
                    foveate_into(
                        &bundle.color,
                        gaze,
                        &cfg.pipeline.foveation,
                        &geom,
                        &mut fov,
                    )
                    .map_err(fail)?;
                    let ms = t0.elapsed().as_secs_f64() * 1e3;
                    let t = StageTimings {
                        foveate: ms,
                        ..Default::default()
                    };
                    (&fov, t)
                }
            };
            let t1 = Instant::now();
            psnr(image, &bundle.color).map_err(fail)?;
            match ssim.as_mut() {
                Some(e) => {
                    e.set_reference(&bundle.color).map_err(fail)?;
                    e.score(image).map_err(fail)?
                }
                None => ssim
                    .insert(SsimEvaluator::new(&bundle.color).map_err(fail)?)
                    .score(image)
                    .map_err(fail)?,
            };
            let t2 = Instant::now();
            if i < WARMUP_FRAMES {
                continue;
            }
            let ms = |d: std::time::Duration| d.as_secs_f64() * 1e3;
            for (stage, v) in [
                ("foveate", timings.foveate),
                ("reproject", timings.reproject),
                ("bias_combine", timings.bias_combine),
                ("metrics", ms(t2 - t1)),
                ("step", ms(t1 - t0)),
                ("frame", ms(t2 - t0)),
            ] {
                samples.entry(stage).or_default().push(v);
            }
        }
        let step_ms = percentiles(&samples.remove("step").unwrap_or_default());
        let frame_ms = percentiles(&samples.remove("frame").unwrap_or_default());
        let stages = samples
            .into_iter()
            .map(|(k, v)| (k.to_string(), percentiles(&v)))
            .collect();
        methods.insert(
            method,
            MethodBench {
                stages,
                step_ms,
                frame_ms,
            },
        );
    }
    Ok(BenchReport {
        width: geom.width_px,
        height: geom.height_px,
        frames: cfg.frames,
        warmup: WARMUP_FRAMES,
        threads: wrs_core::thread_count(),
        methods,
    })
}
