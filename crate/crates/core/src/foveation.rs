//! Foveated rendering simulated as a postprocess on a full-resolution frame.
//!
//! Two methods are available. `MipBilinear` renders the mid and far periphery
//! from block-averaged grids (one value per `mid_block`² or `far_block`²
//! pixels, grids anchored at the frame origin) and reconstructs them with
//! bilinear interpolation; neighbouring regions are blended linearly over
//! `blend_deg`. `Gaussian` blurs with a standard deviation that ramps from
//! zero at the fovea edge to `sigma_max` at the farthest frame corner.
//!
//! In both methods pixels with eccentricity `<= r_f` are copied unchanged.
//! The fovea/mid blend band therefore lies entirely outside the fovea disk,
//! spanning `[r_f, r_f + blend_deg]`; the mid/far band is centred on
//! `mid_radius`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DisplayGeometry;
use crate::image::{Image, Rgb};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum FoveationMethod {
    #[default]
    MipBilinear,
    Gaussian,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoveationConfig {
    pub method: FoveationMethod,
    /// Fovea radius in degrees.
    pub r_f: f64,
    /// Outer radius of the mid periphery in degrees.
    pub mid_radius: f64,
    /// Block edge in pixels for the mid periphery.
    pub mid_block: usize,
    /// Block edge in pixels for the far periphery.
    pub far_block: usize,
    pub blend_deg: f64,
    /// Gaussian method only: blur sigma in pixels at the farthest corner.
    pub sigma_max: f64,
}

impl Default for FoveationConfig {
    fn default() -> Self {
        Self {
            method: FoveationMethod::MipBilinear,
            r_f: 2.5,
            mid_radius: 7.5,
            mid_block: 8,
            far_block: 16,
            blend_deg: 1.0,
            sigma_max: 12.0,
        }
    }
}

impl FoveationConfig {
    pub fn with_fovea_radius(self, r_f: f64) -> Self {
        Self { r_f, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.r_f > 0.0 && self.r_f < self.mid_radius && self.mid_radius.is_finite()) {
            return Err(Error::invalid(format!(
                "need 0 < r_f < mid_radius, got r_f = {}, mid_radius = {}",
                self.r_f, self.mid_radius
            )));
        }
        for (name, b) in [("mid_block", self.mid_block), ("far_block", self.far_block)] {
            if b < 2 || !b.is_power_of_two() {
                return Err(Error::invalid(format!(
                    "{name} must be a power of two >= 2, got {b}"
                )));
            }
        }
        if self.far_block < self.mid_block {
            return Err(Error::invalid("far_block must be >= mid_block"));
        }
        if !(self.blend_deg > 0.0 && self.blend_deg.is_finite()) {
            return Err(Error::invalid("blend_deg must be positive"));
        }
        if !(self.sigma_max >= 0.0 && self.sigma_max.is_finite()) {
            return Err(Error::invalid("sigma_max must be >= 0"));
        }
        Ok(())
    }

    /// Centres of the fovea/mid and mid/far blend bands, in degrees.
    pub fn boundaries(&self) -> [f64; 2] {
        [self.r_f + self.blend_deg / 2.0, self.mid_radius]
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Region {
    Fovea,
    Mid,
    Far,
}

/// Which two regions contribute at eccentricity `e`, and the weight `t` of
/// the outer one.
pub fn region_blend(e: f64, cfg: &FoveationConfig) -> (Region, Region, f64) {
    let [inner, outer] = cfg.boundaries();
    let ramp = |b: f64| ((e - (b - cfg.blend_deg / 2.0)) / cfg.blend_deg).clamp(0.0, 1.0);
    if e <= cfg.r_f {
        return (Region::Fovea, Region::Fovea, 0.0);
    }
    if e < (inner + outer) / 2.0 {
        (Region::Fovea, Region::Mid, ramp(inner))
    } else {
        (Region::Mid, Region::Far, ramp(outer))
    }
}

/// Applies the configured foveation around `gaze` (pixel coordinates).
pub fn foveate(
    frame: &Image,
    gaze: (f64, f64),
    cfg: &FoveationConfig,
    geom: &DisplayGeometry,
) -> Result<Image> {
    let mut out = Image::filled(frame.width(), frame.height(), [0.0; 3]);
    foveate_into(frame, gaze, cfg, geom, &mut out)?;
    Ok(out)
}

/// [`foveate`] into a caller-owned buffer of the frame's dimensions.
pub fn foveate_into(
    frame: &Image,
    gaze: (f64, f64),
    cfg: &FoveationConfig,
    geom: &DisplayGeometry,
    out: &mut Image,
) -> Result<()> {
    cfg.validate()?;
    if frame.dims() != (geom.width_px, geom.height_px) {
        return Err(Error::DimensionMismatch {
            expected: (geom.width_px, geom.height_px),
            actual: frame.dims(),
        });
    }
    frame.ensure_same_dims(out)?;
    out.as_mut_slice().copy_from_slice(frame.as_slice());
    match cfg.method {
        FoveationMethod::MipBilinear => foveate_mip(frame, gaze, cfg, geom, out),
        FoveationMethod::Gaussian => foveate_gaussian(frame, gaze, cfg, geom, out),
    }
    Ok(())
}

/// Box-averaged grid with one cell per `block`² pixels, anchored at the origin.
/// Partial blocks at the right and bottom edges average the pixels present.
#[derive(Clone, Debug)]
pub struct BlockGrid {
    block: usize,
    cols: usize,
    rows: usize,
    cells: Vec<[f64; 3]>,
}

impl BlockGrid {
    pub fn build(frame: &Image, block: usize) -> Self {
        let (w, h) = frame.dims();
        let cols = w.div_ceil(block);
        let rows = h.div_ceil(block);
        let cells = (0..rows)
            .into_par_iter()
            .flat_map_iter(|by| {
                let y0 = by * block;
                let y1 = (y0 + block).min(h);
                (0..cols).map(move |bx| {
                    let x0 = bx * block;
                    let x1 = (x0 + block).min(w);
                    let mut acc = [0.0f64; 3];
                    for y in y0..y1 {
                        for x in x0..x1 {
                            let p = frame.get(x, y);
                            for c in 0..3 {
                                acc[c] += p[c] as f64;
                            }
                        }
                    }
                    let n = ((x1 - x0) * (y1 - y0)) as f64;
                    acc.map(|v| v / n)
                })
            })
            .collect();
        Self {
            block,
            cols,
            rows,
            cells,
        }
    }

    #[inline]
    pub fn cell(&self, bx: usize, by: usize) -> [f64; 3] {
        self.cells[by * self.cols + bx]
    }

    /// Bilinear reconstruction at pixel `(x, y)`; cell values sit at block
    /// centres and the grid is clamped at its borders.
    #[inline]
    pub fn sample(&self, x: usize, y: usize) -> Rgb {
        let b = self.block as f64;
        let u = ((x as f64 + 0.5) / b - 0.5).clamp(0.0, (self.cols - 1) as f64);
        let v = ((y as f64 + 0.5) / b - 0.5).clamp(0.0, (self.rows - 1) as f64);
        let x0 = u.floor() as usize;
        let y0 = v.floor() as usize;
        let x1 = (x0 + 1).min(self.cols - 1);
        let y1 = (y0 + 1).min(self.rows - 1);
        let fx = u - x0 as f64;
        let fy = v - y0 as f64;
        let (c00, c10, c01, c11) = (
            self.cell(x0, y0),
            self.cell(x1, y0),
            self.cell(x0, y1),
            self.cell(x1, y1),
        );
        let mut out = [0.0f32; 3];
        for c in 0..3 {
            let top = lerp64(c00[c], c10[c], fx);
            let bottom = lerp64(c01[c], c11[c], fx);
            out[c] = lerp64(top, bottom, fy) as f32;
        }
        out
    }
}

/// `a + (b - a) * t`, exact when `a == b`.
#[inline]
fn lerp64(a: f64, b: f64, t: f64) -> f64 {
    a + (b - a) * t
}

#[inline]
fn lerp_rgb(a: Rgb, b: Rgb, t: f64) -> Rgb {
    let t = t as f32;
    [0, 1, 2].map(|c| a[c] + (b[c] - a[c]) * t)
}

fn foveate_mip(
    frame: &Image,
    gaze: (f64, f64),
    cfg: &FoveationConfig,
    geom: &DisplayGeometry,
    out: &mut Image,
) {
    let (w, _) = frame.dims();
    let ecc = geom.eccentricity_fn();
    let mid = BlockGrid::build(frame, cfg.mid_block);
    let far = BlockGrid::build(frame, cfg.far_block);
    let region_value = |r: Region, x: usize, y: usize| match r {
        Region::Fovea => *frame.get(x, y),
        Region::Mid => mid.sample(x, y),
        Region::Far => far.sample(x, y),
    };
    out.as_mut_slice()
        .par_chunks_mut(w)
        .enumerate()
        .for_each(|(y, row)| {
            for (x, px) in row.iter_mut().enumerate() {
                let e = ecc.eval(DisplayGeometry::pixel_center(x, y), gaze);
                let (inner, outer, t) = region_blend(e, cfg);
                if inner == Region::Fovea && t == 0.0 {
                    continue;
                }
                let a = region_value(inner, x, y);
                *px = if t >= 1.0 {
                    region_value(outer, x, y)
                } else if t <= 0.0 {
                    a
                } else {
                    lerp_rgb(a, region_value(outer, x, y), t)
                };
            }
        });
}

const SIGMA_STEPS_PER_PX: f64 = 4.0;

/// Normalized 1-D Gaussian kernels for sigmas quantized to 1/4 pixel.
struct KernelBank {
    kernels: Vec<Vec<f32>>,
}

impl KernelBank {
    fn new(sigma_max: f64) -> Self {
        let levels = (sigma_max * SIGMA_STEPS_PER_PX).ceil() as usize + 1;
        let kernels = (0..levels)
            .map(|level| {
                let sigma = level as f64 / SIGMA_STEPS_PER_PX;
                if level == 0 {
                    return vec![1.0];
                }
                let radius = (3.0 * sigma).ceil() as i64;
                let raw: Vec<f64> = (-radius..=radius)
                    .map(|k| (-(k * k) as f64 / (2.0 * sigma * sigma)).exp())
                    .collect();
                let total: f64 = raw.iter().sum();
                raw.iter().map(|v| (v / total) as f32).collect()
            })
            .collect();
        Self { kernels }
    }

    #[inline]
    fn level(&self, sigma: f64) -> usize {
        ((sigma * SIGMA_STEPS_PER_PX).round() as usize).min(self.kernels.len() - 1)
    }
}

fn foveate_gaussian(
    frame: &Image,
    gaze: (f64, f64),
    cfg: &FoveationConfig,
    geom: &DisplayGeometry,
    out: &mut Image,
) {
    let (w, h) = frame.dims();
    let ecc = geom.eccentricity_fn();
    let e_max = geom.max_eccentricity(gaze);
    let bank = KernelBank::new(cfg.sigma_max);
    let span = (e_max - cfg.r_f).max(f64::EPSILON);
    let levels: Vec<usize> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let e = ecc.eval(DisplayGeometry::pixel_center(i % w, i / w), gaze);
            if e <= cfg.r_f {
                0
            } else {
                bank.level(cfg.sigma_max * ((e - cfg.r_f) / span).min(1.0))
            }
        })
        .collect();

    let src = frame.as_slice();
    let mut horizontal = vec![[0.0f32; 3]; w * h];
    horizontal
        .par_chunks_mut(w)
        .enumerate()
        .for_each(|(y, row)| {
            for (x, out) in row.iter_mut().enumerate() {
                let i = y * w + x;
                *out = convolve(
                    &bank.kernels[levels[i]],
                    |k| src[y * w + (x as i64 + k).clamp(0, w as i64 - 1) as usize],
                    src[i],
                );
            }
        });

    out.as_mut_slice()
        .par_chunks_mut(w)
        .enumerate()
        .for_each(|(y, row)| {
            for (x, px) in row.iter_mut().enumerate() {
                let i = y * w + x;
                if levels[i] == 0 {
                    continue;
                }
                *px = convolve(
                    &bank.kernels[levels[i]],
                    |k| horizontal[(y as i64 + k).clamp(0, h as i64 - 1) as usize * w + x],
                    horizontal[i],
                );
            }
        });
}

#[inline]
fn convolve(kernel: &[f32], fetch: impl Fn(i64) -> Rgb, center: Rgb) -> Rgb {
    if kernel.len() == 1 {
        return center;
    }
    let radius = (kernel.len() / 2) as i64;
    let mut acc = [0.0f64; 3];
    for (j, &kw) in kernel.iter().enumerate() {
        let p = fetch(j as i64 - radius);
        for c in 0..3 {
            acc[c] += kw as f64 * p[c] as f64;
        }
    }
    // kernel sums to 1 only up to rounding; renormalize so constants pass through
    let total: f64 = kernel.iter().map(|&k| k as f64).sum();
    acc.map(|v| (v / total) as f32)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn geom() -> DisplayGeometry {
        DisplayGeometry::new(256, 160, 16.0).unwrap() // 16 px/deg
    }

    fn checker(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, |x, y| {
            let v = ((x + y) % 2) as f32;
            [v, v, v]
        })
    }

    fn noise(w: usize, h: usize, seed: u64) -> Image {
        let rng = crate::rng::CounterRng::new(seed);
        Image::from_fn(w, h, |x, y| {
            let i = (y * w + x) as u64;
            [0, 1, 2].map(|c| rng.draw(0, i, c).value() as f32)
        })
    }

    #[test]
    fn region_blend_examples() {
        let cfg = FoveationConfig::default();
        assert_eq!(region_blend(0.0, &cfg), (Region::Fovea, Region::Fovea, 0.0));
        for b in cfg.boundaries() {
            let (_, _, t) = region_blend(b, &cfg);
            assert!((t - 0.5).abs() < 1e-12);
            let (_, _, t) = region_blend(b + cfg.blend_deg / 2.0, &cfg);
            assert_eq!(t, 1.0);
            let (_, _, t) = region_blend(b - cfg.blend_deg / 2.0, &cfg);
            assert_eq!(t, 0.0);
        }
        assert_eq!(region_blend(5.0, &cfg), (Region::Fovea, Region::Mid, 1.0));
        assert_eq!(region_blend(20.0, &cfg), (Region::Mid, Region::Far, 1.0));
        // t is linear inside a band
        let (_, _, a) = region_blend(7.25, &cfg);
        assert!((a - 0.25).abs() < 1e-12);
    }

    #[test]
    fn whole_frame_foveal_is_identity() {
        let g = geom();
        let img = noise(256, 160, 1);
        for method in [FoveationMethod::MipBilinear, FoveationMethod::Gaussian] {
            let cfg = FoveationConfig {
                method,
                r_f: 30.0,
                mid_radius: 40.0,
                ..Default::default()
            };
            assert_eq!(foveate(&img, g.center(), &cfg, &g).unwrap(), img);
        }
    }

    #[test]
    fn constant_image_is_preserved() {
        let g = geom();
        let img = Image::filled(256, 160, [0.3, 0.55, 0.91]);
        for method in [FoveationMethod::MipBilinear, FoveationMethod::Gaussian] {
            let cfg = FoveationConfig {
                method,
                ..Default::default()
            };
            assert_eq!(foveate(&img, (40.0, 30.0), &cfg, &g).unwrap(), img);
        }
    }

    #[test]
    fn checkerboard_mid_region_is_block_mean() {
        let g = geom();
        let img = checker(256, 160);
        let cfg = FoveationConfig {
            mid_radius: 20.0,
            ..Default::default()
        };
        let gaze = (8.0, 80.0);
        let out = foveate(&img, gaze, &cfg, &g).unwrap();
        // pixel 160 px right of gaze: e = 10 deg, well inside the mid region
        for (x, y) in [(168, 80), (170, 81), (165, 77)] {
            let e = crate::geometry::eccentricity(DisplayGeometry::pixel_center(x, y), gaze, &g);
            assert!(e > 9.0 && e < 11.0);
            // brute-force block mean around the pixel
            let bx = x / 8 * 8;
            let by = y / 8 * 8;
            let mut sum = 0.0;
            for yy in by..by + 8 {
                for xx in bx..bx + 8 {
                    sum += img.get(xx, yy)[0] as f64;
                }
            }
            assert_eq!(sum / 64.0, 0.5);
            assert!((out.get(x, y)[0] - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn fovea_is_bit_identical() {
        let g = geom();
        let img = noise(256, 160, 9);
        for method in [FoveationMethod::MipBilinear, FoveationMethod::Gaussian] {
            let cfg = FoveationConfig {
                method,
                ..Default::default()
            };
            for gaze in [(0.0, 0.0), (128.0, 80.0), (200.5, 17.25), (256.0, 160.0)] {
                let out = foveate(&img, gaze, &cfg, &g).unwrap();
                let mut checked = 0;
                for y in 0..160 {
                    for x in 0..256 {
                        let e = crate::geometry::eccentricity(
                            DisplayGeometry::pixel_center(x, y),
                            gaze,
                            &g,
                        );
                        if e <= cfg.r_f {
                            assert_eq!(out.get(x, y), img.get(x, y));
                            checked += 1;
                        }
                    }
                }
                assert!(checked > 0);
            }
        }
    }

    #[test]
    fn periphery_loses_detail() {
        let g = geom();
        let img = noise(256, 160, 3);
        let cfg = FoveationConfig::default();
        let out = foveate(&img, (20.0, 20.0), &cfg, &g).unwrap();
        assert_ne!(out.get(250, 150), img.get(250, 150));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let img = Image::filled(100, 100, [0.0; 3]);
        let err = foveate(&img, (0.0, 0.0), &FoveationConfig::default(), &geom());
        assert!(matches!(err, Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn config_validation() {
        let ok = FoveationConfig::default();
        assert!(ok.validate().is_ok());
        assert!(FoveationConfig { mid_block: 6, ..ok }.validate().is_err());
        assert!(FoveationConfig { far_block: 4, ..ok }.validate().is_err());
        assert!(FoveationConfig { r_f: 8.0, ..ok }.validate().is_err());
        assert!(FoveationConfig {
            blend_deg: 0.0,
            ..ok
        }
        .validate()
        .is_err());
    }

    /// Affine content, whose block means are themselves affine.
    fn ramp(w: usize, h: usize) -> Image {
        Image::from_fn(w, h, |x, y| {
            let v = 0.1 + 0.5 * x as f32 / w as f32 + 0.3 * y as f32 / h as f32;
            [v, 0.9 - 0.6 * x as f32 / w as f32, 0.5]
        })
    }

    fn interior_far_blocks(
        cfg: &FoveationConfig,
        gaze: (f64, f64),
        g: &DisplayGeometry,
    ) -> Vec<(usize, usize)> {
        let b = cfg.far_block;
        let mut blocks = Vec::new();
        for by in 2..g.height_px / b - 2 {
            for bx in 2..g.width_px / b - 2 {
                // the block and its 8 neighbours, which feed its bilinear weights
                let far_enough = ((by - 1) * b..(by + 2) * b).all(|y| {
                    ((bx - 1) * b..(bx + 2) * b).all(|x| {
                        crate::geometry::eccentricity(DisplayGeometry::pixel_center(x, y), gaze, g)
                            > cfg.mid_radius + cfg.blend_deg
                    })
                });
                if far_enough {
                    blocks.push((bx, by));
                }
            }
        }
        blocks
    }

    #[test]
    fn far_block_means_preserved_for_affine_content() {
        let g = geom();
        let img = ramp(256, 160);
        let cfg = FoveationConfig::default();
        let gaze = (30.0, 30.0);
        let out = foveate(&img, gaze, &cfg, &g).unwrap();
        let blocks = interior_far_blocks(&cfg, gaze, &g);
        assert!(blocks.len() > 8, "{}", blocks.len());
        let a = BlockGrid::build(&img, cfg.far_block);
        let b = BlockGrid::build(&out, cfg.far_block);
        for (bx, by) in blocks {
            for c in 0..3 {
                assert!((a.cell(bx, by)[c] - b.cell(bx, by)[c]).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn refoveation_idempotent_in_interior_blocks() {
        let g = geom();
        let img = ramp(256, 160);
        let cfg = FoveationConfig::default();
        let gaze = (30.0, 30.0);
        let once = foveate(&img, gaze, &cfg, &g).unwrap();
        let twice = foveate(&once, gaze, &cfg, &g).unwrap();
        let b = cfg.far_block;
        for (bx, by) in interior_far_blocks(&cfg, gaze, &g) {
            for y in by * b..(by + 1) * b {
                for x in bx * b..(bx + 1) * b {
                    for c in 0..3 {
                        assert!((once.get(x, y)[c] - twice.get(x, y)[c]).abs() < 1e-5);
                    }
                }
            }
        }
    }

    #[test]
    fn gaussian_blur_grows_with_eccentricity() {
        let g = geom();
        let img = noise(256, 160, 5);
        let cfg = FoveationConfig {
            method: FoveationMethod::Gaussian,
            ..Default::default()
        };
        let gaze = (10.0, 80.0);
        let out = foveate(&img, gaze, &cfg, &g).unwrap();
        let err_at = |x0: usize| {
            (x0..x0 + 8)
                .flat_map(|x| (76..84).map(move |y| (x, y)))
                .map(|(x, y)| (out.get(x, y)[0] - img.get(x, y)[0]).abs() as f64)
                .sum::<f64>()
        };
        assert!(err_at(80) < err_at(240));
    }
}
