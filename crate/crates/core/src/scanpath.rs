//! Gaze scanpaths: synthesis, CSV parsing and hold-last lookup.
//!
//! CSV format: one `frame_index,gx_px,gy_px` record per line, frame indices
//! strictly increasing from 0, optional header line. Frames without a record
//! reuse the most recent gaze.

use std::fmt::Write as _;
use std::path::Path;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DisplayGeometry;

pub const CSV_HEADER: &str = "frame_index,gx_px,gy_px";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GazeSample {
    pub frame: u64,
    pub x: f64,
    pub y: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Scanpath {
    samples: Vec<GazeSample>,
}

impl Scanpath {
    /// Validates ordering and, when `bounds` is given, that every sample lies
    /// inside the frame.
    pub fn new(samples: Vec<GazeSample>, bounds: Option<&DisplayGeometry>) -> Result<Self> {
        let Some(first) = samples.first() else {
            return Err(Error::invalid("scanpath has no samples"));
        };
        if first.frame != 0 {
            return Err(Error::invalid(format!(
                "scanpath must start at frame 0, starts at {}",
                first.frame
            )));
        }
        for pair in samples.windows(2) {
            if pair[1].frame <= pair[0].frame {
                return Err(Error::invalid(format!(
                    "frame index {} does not follow {}",
                    pair[1].frame, pair[0].frame
                )));
            }
        }
        if let Some(g) = bounds {
            if let Some(s) = samples.iter().find(|s| !g.contains((s.x, s.y))) {
                return Err(Error::invalid(format!(
                    "gaze ({}, {}) at frame {} outside {}x{}",
                    s.x, s.y, s.frame, g.width_px, g.height_px
                )));
            }
        }
        Ok(Self { samples })
    }

    pub fn samples(&self) -> &[GazeSample] {
        &self.samples
    }

    /// Frames explicitly covered (last record index + 1).
    pub fn frame_span(&self) -> u64 {
        self.samples.last().map_or(0, |s| s.frame + 1)
    }

    /// Gaze for `frame` under the hold-last rule.
    pub fn gaze_at(&self, frame: u64) -> (f64, f64) {
        let i = self.samples.partition_point(|s| s.frame <= frame);
        let s = &self.samples[i.saturating_sub(1)];
        (s.x, s.y)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for s in &self.samples {
            let _ = writeln!(out, "{},{},{}", s.frame, s.x, s.y);
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

pub fn parse_scanpath(path: &Path, bounds: Option<&DisplayGeometry>) -> Result<Scanpath> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Load {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    parse_scanpath_str(&text, path, bounds)
}

/// Parses CSV text; `path` only labels errors.
pub fn parse_scanpath_str(
    text: &str,
    path: &Path,
    bounds: Option<&DisplayGeometry>,
) -> Result<Scanpath> {
    let err = |line: usize, reason: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        reason,
    };
    let mut samples: Vec<GazeSample> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        let parsed = match fields.as_slice() {
            [f, x, y] => f
                .parse::<u64>()
                .ok()
                .zip(x.parse::<f64>().ok())
                .zip(y.parse::<f64>().ok())
                .map(|((frame, x), y)| GazeSample { frame, x, y }),
            _ => None,
        };
        let Some(sample) = parsed else {
            if samples.is_empty() && line_no == 1 {
                continue; // header
            }
            return Err(err(
                line_no,
                format!("expected frame_index,gx,gy, got {line:?}"),
            ));
        };
        if !(sample.x.is_finite() && sample.y.is_finite()) {
            return Err(err(line_no, "non-finite coordinate".into()));
        }
        if let Some(prev) = samples.last() {
            if sample.frame <= prev.frame {
                return Err(err(
                    line_no,
                    format!(
                        "frame index {} not greater than {}",
                        sample.frame, prev.frame
                    ),
                ));
            }
        } else if sample.frame != 0 {
            return Err(err(
                line_no,
                format!("first record must be frame 0, got {}", sample.frame),
            ));
        }
        if let Some(g) = bounds {
            if !g.contains((sample.x, sample.y)) {
                return Err(err(
                    line_no,
                    format!(
                        "gaze ({}, {}) outside {}x{}",
                        sample.x, sample.y, g.width_px, g.height_px
                    ),
                ));
            }
        }
        samples.push(sample);
    }
    if samples.is_empty() {
        return Err(err(1, "scanpath contains no records".into()));
    }
    Scanpath::new(samples, bounds)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub fixations: usize,
    pub fixation_frames: usize,
    /// Distance between consecutive fixation centres, degrees.
    pub saccade_deg: f64,
    /// Per-axis standard deviation of fixational jitter, degrees.
    pub jitter_sigma_deg: f64,
    pub seed: u64,
}

impl Default for SynthParams {
    fn default() -> Self {
        Self {
            fixations: 10,
            fixation_frames: 15,
            saccade_deg: 6.0,
            jitter_sigma_deg: 0.35,
            seed: 0,
        }
    }
}

impl SynthParams {
    pub fn validate(&self) -> Result<()> {
        if self.fixations == 0 || self.fixation_frames == 0 {
            return Err(Error::invalid(
                "fixation count and duration must be positive",
            ));
        }
        if !(self.saccade_deg > 0.0 && self.saccade_deg.is_finite()) {
            return Err(Error::invalid("saccade length must be positive"));
        }
        if !(self.jitter_sigma_deg >= 0.0 && self.jitter_sigma_deg.is_finite()) {
            return Err(Error::invalid("jitter sigma must be >= 0"));
        }
        Ok(())
    }
}

/// Fixation/saccade scanpath: the gaze dwells `fixation_frames` frames at each
/// fixation centre with per-frame Gaussian jitter, then jumps `saccade_deg`
/// in a random direction within one frame. The first fixation is the frame
/// centre. Always one record per frame.
pub fn synth_scanpath(params: &SynthParams, geom: &DisplayGeometry) -> Result<Scanpath> {
    params.validate()?;
    geom.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let ppd = geom.pixels_per_degree();
    let (w, h) = (geom.width_px as f64, geom.height_px as f64);
    let margin = (0.05 * w.min(h)).max(1.0);
    let inside = |p: (f64, f64)| {
        (margin..=w - margin).contains(&p.0) && (margin..=h - margin).contains(&p.1)
    };
    let saccade_px = params.saccade_deg * ppd;
    let jitter = Normal::new(0.0, params.jitter_sigma_deg * ppd)
        .map_err(|e| Error::invalid(e.to_string()))?;

    let mut center = geom.center();
    let mut samples = Vec::with_capacity(params.fixations * params.fixation_frames);
    for fixation in 0..params.fixations {
        if fixation > 0 {
            let mut next = None;
            for _ in 0..64 {
                let theta = rng.random::<f64>() * std::f64::consts::TAU;
                let p = (
                    center.0 + saccade_px * theta.cos(),
                    center.1 + saccade_px * theta.sin(),
                );
                if inside(p) {
                    next = Some(p);
                    break;
                }
            }
            // saccade longer than the frame allows: head back toward the middle
            center = next.unwrap_or_else(|| {
                let (cx, cy) = geom.center();
                let (dx, dy) = (cx - center.0, cy - center.1);
                let len = dx.hypot(dy).max(f64::EPSILON);
                let step = saccade_px.min(len);
                (center.0 + dx / len * step, center.1 + dy / len * step)
            });
        }
        for _ in 0..params.fixation_frames {
            let (jx, jy) = if params.jitter_sigma_deg > 0.0 {
                (jitter.sample(&mut rng), jitter.sample(&mut rng))
            } else {
                (0.0, 0.0)
            };
            let (x, y) = geom.clamp_point((center.0 + jx, center.1 + jy));
            samples.push(GazeSample {
                frame: samples.len() as u64,
                x,
                y,
            });
        }
    }
    Scanpath::new(samples, Some(geom))
}
