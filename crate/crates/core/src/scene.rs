//! Procedural ground-truth frames with analytic depth and motion.
//!
//! Every scene is a flat texture seen by a camera translating laterally at
//! `velocity` px/frame: screen pixel `x` on frame `t` shows texture
//! coordinate `x + velocity * t`, so the content under a pixel sat at
//! `x + velocity` on the previous frame and the motion vector is
//! `(velocity, 0)`. `LayeredOccluders` adds foreground bars that slide at
//! their own velocity in front of the background, producing disocclusions.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::DisplayGeometry;
use crate::image::{Buffer2D, DepthMap, Image, MotionField, Rgb};
use crate::rng::hash4;

pub const BACKGROUND_DEPTH: f32 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneKind {
    Checker,
    TextPanel,
    PerlinTexture,
    LayeredOccluders,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OccluderParams {
    /// Number of bars across one frame width.
    pub count: usize,
    /// Bar width in pixels.
    pub width_px: f64,
    /// Screen-space velocity of the bars, px/frame.
    pub velocity: f64,
    pub depth: f32,
}

impl Default for OccluderParams {
    fn default() -> Self {
        Self {
            count: 6,
            width_px: 48.0,
            velocity: 4.0,
            depth: 2.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub kind: SceneKind,
    /// Characteristic texture feature size in pixels.
    #[serde(default = "default_scale")]
    pub scale: f64,
    /// Lateral camera velocity, px/frame.
    #[serde(default)]
    pub velocity: f64,
    #[serde(default)]
    pub seed: u64,
    /// Background contrast about mid grey; 1 keeps the native palette.
    #[serde(default = "unit_contrast")]
    pub contrast: f64,
    #[serde(default)]
    pub occluders: OccluderParams,
}

fn default_scale() -> f64 {
    16.0
}

impl SceneSpec {
    pub fn new(kind: SceneKind) -> Self {
        Self {
            kind,
            scale: default_scale(),
            velocity: 0.0,
            seed: 0,
            contrast: 1.0,
            occluders: OccluderParams::default(),
        }
    }

    pub fn with_contrast(self, contrast: f64) -> Self {
        Self { contrast, ..self }
    }

    pub fn with_scale(self, scale: f64) -> Self {
        Self { scale, ..self }
    }

    pub fn with_velocity(self, velocity: f64) -> Self {
        Self { velocity, ..self }
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }

    /// True when every frame renders identically.
    pub fn is_static(&self) -> bool {
        self.velocity == 0.0
            && (self.kind != SceneKind::LayeredOccluders || self.occluders.velocity == 0.0)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale >= 1.0 && self.scale.is_finite()) {
            return Err(Error::invalid(format!(
                "scene scale must be >= 1, got {}",
                self.scale
            )));
        }
        if !(self.contrast > 0.0 && self.contrast <= 1.0) {
            return Err(Error::invalid(format!(
                "scene contrast must be in (0, 1], got {}",
                self.contrast
            )));
        }
        if !self.velocity.is_finite() {
            return Err(Error::invalid("scene velocity must be finite"));
        }
        if self.kind == SceneKind::LayeredOccluders {
            let o = &self.occluders;
            let positive = |v: f64| v > 0.0 && v.is_finite();
            if o.count == 0
                || !positive(o.width_px)
                || !o.velocity.is_finite()
                || !positive(f64::from(o.depth))
            {
                return Err(Error::invalid("invalid occluder parameters"));
            }
        }
        Ok(())
    }
}

/// One frame: color, depth and motion planes of equal size.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameBundle {
    pub color: Image,
    pub depth: DepthMap,
    pub motion: MotionField,
}

impl FrameBundle {
    pub fn new(color: Image, depth: DepthMap, motion: MotionField) -> Result<Self> {
        color.ensure_same_dims(&depth)?;
        color.ensure_same_dims(&motion)?;
        Ok(Self {
            color,
            depth,
            motion,
        })
    }

    /// A frame with constant depth and no motion.
    pub fn still(color: Image) -> Self {
        let (w, h) = color.dims();
        Self {
            depth: DepthMap::filled(w, h, 1.0),
            motion: MotionField::filled(w, h, [0.0, 0.0]),
            color,
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        self.color.dims()
    }
}

pub fn render_procedural(
    spec: &SceneSpec,
    frame_index: u64,
    geom: &DisplayGeometry,
) -> Result<FrameBundle> {
    spec.validate()?;
    geom.validate()?;
    let (w, h) = (geom.width_px, geom.height_px);
    let t = frame_index as f64;
    let first = frame_index == 0;
    let offset = spec.velocity * t;
    let texture = Texture::new(spec);

    let mut pixels: Vec<(Rgb, f32, [f32; 2])> = vec![([0.0; 3], 0.0, [0.0; 2]); w * h];
    pixels.par_chunks_mut(w).enumerate().for_each(|(y, row)| {
        let wy = y as f64 + 0.5;
        for (x, px) in row.iter_mut().enumerate() {
            let sx = x as f64 + 0.5;
            let background = || {
                let motion = if first {
                    [0.0; 2]
                } else {
                    [spec.velocity as f32, 0.0]
                };
                (
                    texture.background(sx + offset, wy),
                    BACKGROUND_DEPTH,
                    motion,
                )
            };
            *px = match spec.kind {
                SceneKind::LayeredOccluders => {
                    let o = &spec.occluders;
                    let fx = sx + o.velocity * t;
                    let period = w as f64 / o.count as f64;
                    if fx.rem_euclid(period) < o.width_px.min(period) {
                        let motion = if first {
                            [0.0; 2]
                        } else {
                            [o.velocity as f32, 0.0]
                        };
                        (texture.occluder(fx, wy), o.depth, motion)
                    } else {
                        background()
                    }
                }
                _ => background(),
            };
        }
    });

    let color = Buffer2D::from_vec(w, h, pixels.iter().map(|p| p.0).collect())?;
    let depth = Buffer2D::from_vec(w, h, pixels.iter().map(|p| p.1).collect())?;
    let motion = Buffer2D::from_vec(w, h, pixels.iter().map(|p| p.2).collect())?;
    FrameBundle::new(color, depth, motion)
}

fn unit_contrast() -> f64 {
    1.0
}

struct Texture {
    kind: SceneKind,
    scale: f64,
    seed: u64,
    contrast: f32,
}

const CHECKER_LIGHT: Rgb = [0.80, 0.76, 0.68];
const CHECKER_DARK: Rgb = [0.22, 0.28, 0.36];
const PAGE: Rgb = [0.93, 0.92, 0.88];
const INK: Rgb = [0.10, 0.10, 0.14];

impl Texture {
    fn new(spec: &SceneSpec) -> Self {
        Self {
            kind: spec.kind,
            scale: spec.scale,
            seed: spec.seed,
            contrast: spec.contrast as f32,
        }
    }

    fn background(&self, wx: f64, wy: f64) -> Rgb {
        let c = self.native(wx, wy);
        if self.contrast == 1.0 {
            return c;
        }
        c.map(|v| 0.5 + self.contrast * (v - 0.5))
    }

    fn native(&self, wx: f64, wy: f64) -> Rgb {
        match self.kind {
            SceneKind::Checker => checker(wx, wy, self.scale),
            SceneKind::TextPanel => text(wx, wy, self.scale, self.seed),
            SceneKind::PerlinTexture | SceneKind::LayeredOccluders => {
                perlin_color(wx, wy, self.scale, self.seed)
            }
        }
    }

    fn occluder(&self, fx: f64, wy: f64) -> Rgb {
        // vertical bars with a coarse horizontal stripe pattern
        let stripe = ((wy / (self.scale * 0.5)).floor() as i64).rem_euclid(2) as f32;
        let shade = 0.35 + 0.25 * stripe + 0.1 * ((fx / self.scale).sin() as f32);
        [shade * 0.9, shade * 0.5, shade * 0.3]
    }
}

fn checker(wx: f64, wy: f64, scale: f64) -> Rgb {
    let cx = floor_i64(wx / scale);
    let cy = floor_i64(wy / scale);
    if (cx + cy).rem_euclid(2) == 0 {
        CHECKER_LIGHT
    } else {
        CHECKER_DARK
    }
}

/// Lines of pseudo-glyphs: 5x7 bitmaps drawn from a hash of the glyph cell.
fn text(wx: f64, wy: f64, scale: f64, seed: u64) -> Rgb {
    let glyph_w = scale * 0.75;
    let line_h = scale * 1.6;
    let line = (wy / line_h).floor();
    let col = (wx / glyph_w).floor();
    let ly = (wy - line * line_h) / scale; // 0..1.6
    let lx = (wx - col * glyph_w) / glyph_w; // 0..1
    if !(0.15..1.05).contains(&ly) || !(0.1..0.9).contains(&lx) {
        return PAGE;
    }
    let cell = hash4(seed, line as i64 as u64, col as i64 as u64, 0x7e47);
    // roughly one cell in six is a space
    if cell % 6 == 0 {
        return PAGE;
    }
    let gx = (((lx - 0.1) / 0.8) * 5.0).floor().clamp(0.0, 4.0) as u64;
    let gy = (((ly - 0.15) / 0.9) * 7.0).floor().clamp(0.0, 6.0) as u64;
    let bit = (cell >> (8 + gy * 5 + gx)) & 1;
    if bit == 1 {
        INK
    } else {
        PAGE
    }
}

fn perlin_color(wx: f64, wy: f64, scale: f64, seed: u64) -> Rgb {
    let n0 = fbm(wx / scale, wy / scale, seed);
    let n1 = fbm(wx / scale + 37.2, wy / scale - 11.9, seed ^ 0x5151);
    let base = (0.5 + 0.9 * n0).clamp(0.0, 1.0);
    let tint = (0.5 + 0.9 * n1).clamp(0.0, 1.0);
    [
        (0.15 + 0.75 * base) as f32,
        (0.15 + 0.55 * base + 0.2 * tint) as f32,
        (0.2 + 0.3 * base + 0.4 * (1.0 - tint)) as f32,
    ]
}

fn fbm(x: f64, y: f64, seed: u64) -> f64 {
    let mut sum = 0.0;
    let mut amp = 0.5;
    let mut freq = 1.0;
    for octave in 0..4 {
        sum += amp * gradient_noise(x * freq, y * freq, seed.wrapping_add(octave));
        amp *= 0.5;
        freq *= 2.0;
    }
    sum
}

/// `x.floor() as i64` without the libm call on baseline x86-64.
#[inline]
fn floor_i64(x: f64) -> i64 {
    let i = x as i64;
    if (i as f64) > x {
        i - 1
    } else {
        i
    }
}

/// Cheap single-round hash of a noise lattice point.
#[inline]
fn lattice_hash(seed: u64, gx: i64, gy: i64) -> u64 {
    let mut z = seed
        ^ (gx as u64).wrapping_mul(0x9e37_79b9_7f4a_7c15)
        ^ (gy as u64).wrapping_mul(0xc2b2_ae3d_27d4_eb4f);
    z = (z ^ (z >> 32)).wrapping_mul(0xd6e8_feb8_6659_fd93);
    z ^ (z >> 32)
}

/// 256 unit gradient directions, evenly spaced on the circle.
fn gradients() -> &'static [(f64, f64); 256] {
    static TABLE: OnceLock<[(f64, f64); 256]> = OnceLock::new();
    TABLE.get_or_init(|| {
        std::array::from_fn(|i| {
            let a = i as f64 * (std::f64::consts::TAU / 256.0);
            (a.cos(), a.sin())
        })
    })
}

/// 2-D Perlin gradient noise, roughly in `[-0.7, 0.7]`.
fn gradient_noise(x: f64, y: f64, seed: u64) -> f64 {
    let (ix, iy) = (floor_i64(x), floor_i64(y));
    let (fx, fy) = (x - ix as f64, y - iy as f64);
    let table = gradients();
    let grad = |gx: i64, gy: i64, dx: f64, dy: f64| {
        let (c, s) = table[(lattice_hash(seed, gx, gy) >> 56) as usize];
        c * dx + s * dy
    };
    let fade = |t: f64| t * t * t * (t * (t * 6.0 - 15.0) + 10.0);
    let (u, v) = (fade(fx), fade(fy));
    let n00 = grad(ix, iy, fx, fy);
    let n10 = grad(ix + 1, iy, fx - 1.0, fy);
    let n01 = grad(ix, iy + 1, fx, fy - 1.0);
    let n11 = grad(ix + 1, iy + 1, fx - 1.0, fy - 1.0);
    let a = n00 + (n10 - n00) * u;
    let b = n01 + (n11 - n01) * u;
    a + (b - a) * v
}
