//! Per-frame temporal reservoir pipeline.
//!
//! Each pixel is an independent weighted stream. Every frame contributes one
//! candidate per pixel, the foveated color weighted by visual acuity at the
//! pixel's eccentricity. The history reservoir is reprojected along motion
//! vectors, validated against depth, biased and then combined with the
//! candidate. The output pixel is the surviving sample.

use std::borrow::Borrow;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::color::{lightness, lightness_delta, HistoryDistance, LightnessLut};
use crate::error::{Error, Result};
use crate::foveation::{foveate_into, FoveationConfig};
use crate::geometry::DisplayGeometry;
use crate::image::{Buffer2D, DepthMap, Image, MotionField, Rgb};
use crate::reservoir::{combine, Reservoir};
use crate::rng::CounterRng;
use crate::scanpath::Scanpath;
use crate::scene::FrameBundle;
use crate::weights::{AcuityModel, AcuityTable, WeightParams};

/// Reservoir payload: the stored color plus what later frames need to know
/// about it.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PixelSample {
    pub color: Rgb,
    /// CIELAB L* of `color`, cached for the history distance.
    pub lightness: f32,
    /// Whether the sample was captured inside the fovea.
    pub foveal: bool,
}

impl PixelSample {
    pub fn new(color: Rgb, foveal: bool) -> Self {
        Self {
            color,
            lightness: lightness(color) as f32,
            foveal,
        }
    }
}

pub type PixelReservoir = Reservoir<PixelSample>;

#[derive(Clone, Debug, PartialEq)]
pub struct ReservoirGrid {
    cells: Buffer2D<PixelReservoir>,
    frame_index: Option<u64>,
}

impl ReservoirGrid {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            cells: Buffer2D::filled(width, height, PixelReservoir::empty()),
            frame_index: None,
        }
    }

    pub fn from_cells(cells: Buffer2D<PixelReservoir>, frame_index: Option<u64>) -> Self {
        Self { cells, frame_index }
    }

    pub fn cells(&self) -> &Buffer2D<PixelReservoir> {
        &self.cells
    }

    pub fn get(&self, x: usize, y: usize) -> &PixelReservoir {
        self.cells.get(x, y)
    }

    /// Frame of the last update, `None` before the first.
    pub fn frame_index(&self) -> Option<u64> {
        self.frame_index
    }

    pub fn dims(&self) -> (usize, usize) {
        self.cells.dims()
    }

    pub fn mean_weight_sum(&self) -> f64 {
        let s = self.cells.as_slice();
        s.par_iter().map(|r| r.weight_sum()).sum::<f64>() / s.len().max(1) as f64
    }
}

/// Which temporal bias the history reservoir receives before combining.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasMode {
    /// No bias; plain unbounded accumulation.
    None,
    /// Survival-probability scaling only.
    Bernoulli,
    /// Survival probability times `1 - ΔL`.
    #[default]
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub foveation: FoveationConfig,
    pub weights: WeightParams,
    /// Relative depth tolerance for history validation.
    pub eps_rel: f64,
    pub bias: BiasMode,
    pub history_distance: HistoryDistance,
    /// Inside the fovea, reject history samples that were captured outside
    /// it and show the current candidate instead. Reservoir statistics are
    /// unaffected.
    pub foveal_guard: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            foveation: FoveationConfig::default(),
            weights: WeightParams::default(),
            eps_rel: 0.02,
            bias: BiasMode::Full,
            history_distance: HistoryDistance::Lightness,
            foveal_guard: true,
        }
    }
}

impl PipelineConfig {
    /// Sets the fovea radius consistently for foveation and weighting.
    pub fn with_fovea_radius(self, r_f: f64) -> Self {
        Self {
            foveation: self.foveation.with_fovea_radius(r_f),
            weights: self.weights.with_fovea_radius(r_f),
            ..self
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.foveation.validate()?;
        self.weights.validate()?;
        if !(self.eps_rel >= 0.0 && self.eps_rel.is_finite()) {
            return Err(Error::invalid(format!(
                "eps_rel must be >= 0, got {}",
                self.eps_rel
            )));
        }
        if self.foveation.r_f != self.weights.r_f {
            return Err(Error::invalid(format!(
                "fovea radius differs between foveation ({}) and weights ({})",
                self.foveation.r_f, self.weights.r_f
            )));
        }
        Ok(())
    }
}

/// Wall-clock milliseconds per stage of one frame.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StageTimings {
    pub foveate: f64,
    pub reproject: f64,
    pub bias_combine: f64,
}

impl StageTimings {
    pub fn total(&self) -> f64 {
        self.foveate + self.reproject + self.bias_combine
    }
}

/// Source index of a cell whose history failed validation.
const FLUSHED: u32 = u32::MAX;
/// Source index of a cell with no history yet (first frame).
const NO_HISTORY: u32 = u32::MAX - 1;

/// One processed frame, borrowed from the state that produced it.
#[derive(Clone, Copy, Debug)]
pub struct StepOutput<'a> {
    pub image: &'a Image,
    /// The foveated frame that supplied this frame's candidates.
    pub foveated: &'a Image,
    pub timings: StageTimings,
    sources: &'a [u32],
}

impl StepOutput<'_> {
    /// Whether reprojection discarded this pixel's history.
    pub fn is_flushed(&self, x: usize, y: usize) -> bool {
        self.sources
            .get(y * self.image.width() + x)
            .is_some_and(|&s| s == FLUSHED)
    }

    pub fn flushed_count(&self) -> usize {
        self.sources.iter().filter(|&&s| s == FLUSHED).count()
    }

    pub fn flush_mask(&self) -> Buffer2D<bool> {
        let (w, h) = self.image.dims();
        Buffer2D::from_fn(w, h, |x, y| self.is_flushed(x, y))
    }
}

/// Nearest-integer source index for every destination pixel, or `FLUSHED`.
fn reprojection_sources(
    motion: &MotionField,
    depth_prev: &DepthMap,
    depth_cur: &DepthMap,
    eps_rel: f64,
    sources: &mut [u32],
) -> Result<()> {
    motion.ensure_same_dims(depth_prev)?;
    motion.ensure_same_dims(depth_cur)?;
    let (w, h) = motion.dims();
    sources.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        for (x, src) in row.iter_mut().enumerate() {
            let m = motion.get(x, y);
            let sx = (x as f64 + m[0] as f64).round();
            let sy = (y as f64 + m[1] as f64).round();
            // NaN motion fails both range checks
            if !((0.0..w as f64).contains(&sx) && (0.0..h as f64).contains(&sy)) {
                *src = FLUSHED;
                continue;
            }
            let (sx, sy) = (sx as usize, sy as usize);
            let d_cur = *depth_cur.get(x, y) as f64;
            let d_prev = *depth_prev.get(sx, sy) as f64;
            *src = if (d_cur - d_prev).abs() <= eps_rel * d_cur {
                (sy * w + sx) as u32
            } else {
                FLUSHED
            };
        }
    });
    Ok(())
}

fn check_size(w: usize, h: usize) -> Result<()> {
    if (w as u64) * (h as u64) >= NO_HISTORY as u64 {
        return Err(Error::invalid(format!("{w}x{h} frame too large")));
    }
    Ok(())
}

/// Fetches each destination cell from `pixel + motion` (nearest integer) and
/// flushes it when the source is outside the frame or its depth disagrees by
/// more than `eps_rel * depth_cur`.
pub fn reproject(
    grid: &ReservoirGrid,
    motion: &MotionField,
    depth_prev: &DepthMap,
    depth_cur: &DepthMap,
    eps_rel: f64,
) -> Result<(ReservoirGrid, Buffer2D<bool>)> {
    grid.cells.ensure_same_dims(motion)?;
    let (w, h) = grid.dims();
    check_size(w, h)?;
    let mut sources = vec![0u32; w * h];
    reprojection_sources(motion, depth_prev, depth_cur, eps_rel, &mut sources)?;
    let src = grid.cells.as_slice();
    let cells = sources
        .iter()
        .map(|&s| {
            if s == FLUSHED {
                PixelReservoir::empty()
            } else {
                src[s as usize]
            }
        })
        .collect();
    let mask = sources.iter().map(|&s| s == FLUSHED).collect();
    Ok((
        ReservoirGrid::from_cells(Buffer2D::from_vec(w, h, cells)?, grid.frame_index),
        Buffer2D::from_vec(w, h, mask)?,
    ))
}

#[derive(Clone, Debug)]
pub struct PipelineState {
    config: PipelineConfig,
    geometry: DisplayGeometry,
    acuity: AcuityTable,
    lightness: LightnessLut,
    rng: CounterRng,
    grid: ReservoirGrid,
    scratch: Buffer2D<PixelReservoir>,
    sources: Vec<u32>,
    foveated: Image,
    output: Image,
    prev_depth: DepthMap,
    has_history: bool,
    frame: u64,
}

impl PipelineState {
    pub fn new(config: PipelineConfig, geometry: DisplayGeometry, seed: u64) -> Result<Self> {
        config.validate()?;
        geometry.validate()?;
        let (w, h) = (geometry.width_px, geometry.height_px);
        check_size(w, h)?;
        // gaze stays inside the frame, so no eccentricity exceeds the diagonal
        let ecc = geometry.eccentricity_fn();
        let max_e = ecc
            .eval((0.0, 0.0), (w as f64, h as f64))
            .max(ecc.eval((w as f64, 0.0), (0.0, h as f64)));
        Ok(Self {
            acuity: AcuityTable::new(&AcuityModel::new(config.weights), max_e + 1.0),
            lightness: LightnessLut::new(),
            rng: CounterRng::new(seed),
            grid: ReservoirGrid::empty(w, h),
            scratch: Buffer2D::filled(w, h, PixelReservoir::empty()),
            sources: vec![NO_HISTORY; w * h],
            foveated: Image::filled(w, h, [0.0; 3]),
            output: Image::filled(w, h, [0.0; 3]),
            prev_depth: DepthMap::filled(w, h, 0.0),
            has_history: false,
            frame: 0,
            config,
            geometry,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn geometry(&self) -> &DisplayGeometry {
        &self.geometry
    }

    pub fn grid(&self) -> &ReservoirGrid {
        &self.grid
    }

    /// Output of the most recent frame, `None` before the first.
    pub fn prev_output(&self) -> Option<&Image> {
        self.has_history.then_some(&self.output)
    }

    /// Index of the next frame to be processed.
    pub fn frame_index(&self) -> u64 {
        self.frame
    }

    pub fn step(&mut self, bundle: &FrameBundle, gaze: (f64, f64)) -> Result<StepOutput<'_>> {
        let dims = (self.geometry.width_px, self.geometry.height_px);
        if bundle.dims() != dims {
            return Err(Error::DimensionMismatch {
                expected: dims,
                actual: bundle.dims(),
            });
        }
        let w = dims.0;

        let t0 = Instant::now();
        foveate_into(
            &bundle.color,
            gaze,
            &self.config.foveation,
            &self.geometry,
            &mut self.foveated,
        )?;
        let t1 = Instant::now();

        if self.has_history {
            reprojection_sources(
                &bundle.motion,
                &self.prev_depth,
                &bundle.depth,
                self.config.eps_rel,
                &mut self.sources,
            )?;
        }
        let t2 = Instant::now();

        let frame = self.frame;
        let ecc = self.geometry.eccentricity_fn();
        let (acuity, lut, rng, cfg) = (&self.acuity, &self.lightness, &self.rng, &self.config);
        let r_f = cfg.weights.r_f;
        let history = self.grid.cells.as_slice();
        let foveated = &self.foveated;
        let sources = &self.sources;
        self.scratch
            .as_mut_slice()
            .par_chunks_mut(w)
            .zip(self.output.as_mut_slice().par_chunks_mut(w))
            .enumerate()
            .try_for_each(|(y, (cells, out))| -> Result<()> {
                for x in 0..w {
                    let pixel = y * w + x;
                    let color = *foveated.get(x, y);
                    let e = ecc.eval(DisplayGeometry::pixel_center(x, y), gaze);
                    let foveal = e <= r_f;
                    let weight = acuity.weight(e);
                    let candidate = PixelSample {
                        color,
                        lightness: lut.lightness(color),
                        foveal,
                    };
                    let src = sources[pixel];
                    let held = if src >= NO_HISTORY {
                        PixelReservoir::empty()
                    } else {
                        let r = history[src as usize];
                        match cfg.bias {
                            BiasMode::None => r,
                            BiasMode::Bernoulli => r.bias_wsum(weight),
                            BiasMode::Full => {
                                let d = match cfg.history_distance {
                                    HistoryDistance::Lightness => lightness_delta(
                                        candidate.lightness as f64,
                                        r.sample().lightness as f64,
                                    ),
                                    other => other.eval(color, r.sample().color),
                                };
                                r.full_bias(weight, d)?
                            }
                        }
                    };
                    let fresh = PixelReservoir::single(candidate, weight)?;
                    let mut merged = combine(held, fresh, rng.draw(frame, pixel as u64, 0));
                    if cfg.foveal_guard && foveal && !merged.sample().foveal {
                        merged = PixelReservoir::from_parts(
                            candidate,
                            weight,
                            merged.weight_sum(),
                            merged.count(),
                        )?;
                    }
                    out[x] = merged.sample().color;
                    cells[x] = merged;
                }
                Ok(())
            })?;
        let t3 = Instant::now();

        std::mem::swap(&mut self.grid.cells, &mut self.scratch);
        self.grid.frame_index = Some(frame);
        self.prev_depth
            .as_mut_slice()
            .copy_from_slice(bundle.depth.as_slice());
        self.has_history = true;
        self.frame += 1;

        Ok(StepOutput {
            image: &self.output,
            foveated: &self.foveated,
            timings: StageTimings {
                foveate: ms(t1 - t0),
                reproject: ms(t2 - t1),
                bias_combine: ms(t3 - t2),
            },
            sources: &self.sources,
        })
    }
}

fn ms(d: std::time::Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Plain foveated rendering.
    Fov,
    /// Foveated rendering followed by temporal reservoir resampling.
    Wrs,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Fov => "fov",
            Method::Wrs => "wrs",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fov" => Ok(Method::Fov),
            "wrs" => Ok(Method::Wrs),
            other => Err(Error::invalid(format!("unknown method {other:?}"))),
        }
    }
}

/// Runs one method over a frame sequence, calling `sink` with each frame
/// index, its input bundle and the step output, in order.
pub fn run_with<B: Borrow<FrameBundle>>(
    frames: impl IntoIterator<Item = Result<B>>,
    scanpath: &Scanpath,
    method: Method,
    config: &PipelineConfig,
    geometry: &DisplayGeometry,
    seed: u64,
    mut sink: impl FnMut(u64, &FrameBundle, StepOutput<'_>) -> Result<()>,
) -> Result<()> {
    let mut state = PipelineState::new(*config, *geometry, seed)?;
    let mut fov = Image::filled(geometry.width_px, geometry.height_px, [0.0; 3]);
    for (i, bundle) in frames.into_iter().enumerate() {
        let bundle = bundle?;
        let bundle = bundle.borrow();
        let index = i as u64;
        let gaze = scanpath.gaze_at(index);
        let out = match method {
            Method::Wrs => state.step(bundle, gaze)?,
            Method::Fov => {
                let t0 = Instant::now();
                foveate_into(&bundle.color, gaze, &config.foveation, geometry, &mut fov)?;
                StepOutput {
                    image: &fov,
                    foveated: &fov,
                    timings: StageTimings {
                        foveate: ms(t0.elapsed()),
                        ..Default::default()
                    },
                    sources: &[],
                }
            }
        };
        sink(index, bundle, out)?;
    }
    Ok(())
}

/// Collects the output images of [`run_with`].
pub fn run(
    frames: &[FrameBundle],
    scanpath: &Scanpath,
    method: Method,
    config: &PipelineConfig,
    geometry: &DisplayGeometry,
    seed: u64,
) -> Result<Vec<Image>> {
    let mut images = Vec::with_capacity(frames.len());
    run_with(
        frames.iter().map(Ok),
        scanpath,
        method,
        config,
        geometry,
        seed,
        |_, _, out| {
            images.push(out.image.clone());
            Ok(())
        },
    )?;
    Ok(images)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::foveation::foveate;
    use crate::scanpath::GazeSample;
    use crate::scene::{render_procedural, SceneKind, SceneSpec};

    fn geom() -> DisplayGeometry {
        DisplayGeometry::new(160, 96, 10.0).unwrap()
    }

    fn fixed_gaze(g: (f64, f64)) -> Scanpath {
        Scanpath::new(
            vec![GazeSample {
                frame: 0,
                x: g.0,
                y: g.1,
            }],
            None,
        )
        .unwrap()
    }

    fn grid_with(w: usize, h: usize) -> ReservoirGrid {
        let cells = Buffer2D::from_fn(w, h, |x, y| {
            PixelReservoir::single(
                PixelSample::new([x as f32 / w as f32, y as f32 / h as f32, 0.0], false),
                1.0 + x as f64,
            )
            .unwrap()
        });
        ReservoirGrid::from_cells(cells, Some(0))
    }

    #[test]
    fn reproject_zero_motion_is_identity() {
        let g = grid_with(12, 8);
        let depth = DepthMap::filled(12, 8, 5.0);
        let motion = MotionField::filled(12, 8, [0.0, 0.0]);
        let (out, mask) = reproject(&g, &motion, &depth, &depth, 0.02).unwrap();
        assert_eq!(out, g);
        assert!(mask.as_slice().iter().all(|m| !m));
    }

    #[test]
    fn reproject_uniform_shift_flushes_border() {
        let g = grid_with(12, 8);
        let depth = DepthMap::filled(12, 8, 5.0);
        let motion = MotionField::filled(12, 8, [3.0, 0.0]);
        let (out, mask) = reproject(&g, &motion, &depth, &depth, 0.02).unwrap();
        for y in 0..8 {
            for x in 0..12 {
                if x + 3 < 12 {
                    assert_eq!(out.get(x, y), g.get(x + 3, y));
                    assert!(!mask.get(x, y));
                } else {
                    assert!(out.get(x, y).is_empty());
                    assert!(mask.get(x, y));
                }
            }
        }
    }

    #[test]
    fn reproject_depth_step_flushes_one_cell() {
        let g = grid_with(12, 8);
        let prev = DepthMap::filled(12, 8, 5.0);
        let mut cur = prev.clone();
        *cur.get_mut(4, 3) = 5.2;
        // just inside tolerance
        *cur.get_mut(6, 3) = 5.0 * 1.019;
        let motion = MotionField::filled(12, 8, [0.0, 0.0]);
        let (_, mask) = reproject(&g, &motion, &prev, &cur, 0.02).unwrap();
        let flushed: Vec<_> = (0..8)
            .flat_map(|y| (0..12).map(move |x| (x, y)))
            .filter(|&(x, y)| *mask.get(x, y))
            .collect();
        assert_eq!(flushed, vec![(4, 3)]);
    }

    #[test]
    fn frame_zero_is_foveated_frame() {
        let g = geom();
        let cfg = PipelineConfig::default();
        let bundle = render_procedural(&SceneSpec::new(SceneKind::Checker), 0, &g).unwrap();
        let mut state = PipelineState::new(cfg, g, 1).unwrap();
        let out = state.step(&bundle, (40.0, 40.0)).unwrap();
        assert_eq!(
            *out.image,
            foveate(&bundle.color, (40.0, 40.0), &cfg.foveation, &g).unwrap()
        );
        assert!(state
            .grid()
            .cells()
            .as_slice()
            .iter()
            .all(|r| r.count() == 1));
        assert_eq!(state.grid().frame_index(), Some(0));
    }

    #[test]
    fn static_fixation_converges_to_first_frame() {
        let g = geom();
        let cfg = PipelineConfig::default();
        let bundle = render_procedural(&SceneSpec::new(SceneKind::TextPanel), 0, &g).unwrap();
        let frames = vec![bundle; 12];
        let sp = fixed_gaze((80.0, 48.0));
        let out = run(&frames, &sp, Method::Wrs, &cfg, &g, 9).unwrap();
        for img in &out {
            assert_eq!(img, &out[0]);
        }
        let fov = run(&frames, &sp, Method::Fov, &cfg, &g, 9).unwrap();
        assert_eq!(out[0], fov[0]);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let g = geom();
        let mut state = PipelineState::new(PipelineConfig::default(), g, 0).unwrap();
        let small = DisplayGeometry::new(32, 32, 10.0).unwrap();
        let bundle = render_procedural(&SceneSpec::new(SceneKind::Checker), 0, &small).unwrap();
        assert!(matches!(
            state.step(&bundle, (1.0, 1.0)),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn mismatched_fovea_radius_rejected() {
        let mut cfg = PipelineConfig::default();
        cfg.weights.r_f = 3.0;
        assert!(PipelineState::new(cfg, geom(), 0).is_err());
    }

    #[test]
    fn runs_are_deterministic() {
        let g = geom();
        let spec = SceneSpec::new(SceneKind::PerlinTexture).with_velocity(2.0);
        let frames: Vec<_> = (0..8)
            .map(|t| render_procedural(&spec, t, &g).unwrap())
            .collect();
        let sp = Scanpath::new(
            (0..8)
                .map(|f| GazeSample {
                    frame: f,
                    x: 20.0 + 15.0 * f as f64,
                    y: 48.0,
                })
                .collect(),
            Some(&g),
        )
        .unwrap();
        let cfg = PipelineConfig::default();
        let a = run(&frames, &sp, Method::Wrs, &cfg, &g, 42).unwrap();
        let b = run(&frames, &sp, Method::Wrs, &cfg, &g, 42).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn method_round_trips_through_str() {
        for m in [Method::Fov, Method::Wrs] {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert!("taa".parse::<Method>().is_err());
    }
}
