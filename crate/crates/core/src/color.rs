//! sRGB to CIELAB (D65) and the lightness / ΔE94 distances used to distrust
//! stale history.

use serde::{Deserialize, Serialize};

use crate::image::Rgb;

const WHITE_D65: [f64; 3] = [0.95047, 1.0, 1.08883];

#[inline]
pub fn srgb_to_linear(c: f64) -> f64 {
    if c <= 0.04045 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

#[inline]
fn lab_f(t: f64) -> f64 {
    const DELTA: f64 = 6.0 / 29.0;
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

/// Relative luminance Y of an sRGB-encoded color.
#[inline]
pub fn luminance(rgb: Rgb) -> f64 {
    let [r, g, b] = rgb.map(|c| srgb_to_linear(c as f64));
    0.212_672_9 * r + 0.715_152_2 * g + 0.072_175_0 * b
}

/// CIE L* in `[0, 100]` (up to rounding in the matrix coefficients).
#[inline]
pub fn lightness(rgb: Rgb) -> f64 {
    116.0 * lab_f(luminance(rgb) / WHITE_D65[1]) - 16.0
}

pub fn srgb_to_lab(rgb: Rgb) -> [f64; 3] {
    let [r, g, b] = rgb.map(|c| srgb_to_linear(c as f64));
    let x = 0.412_456_4 * r + 0.357_576_1 * g + 0.180_437_5 * b;
    let y = 0.212_672_9 * r + 0.715_152_2 * g + 0.072_175_0 * b;
    let z = 0.019_333_9 * r + 0.119_192_0 * g + 0.950_304_1 * b;
    let fx = lab_f(x / WHITE_D65[0]);
    let fy = lab_f(y / WHITE_D65[1]);
    let fz = lab_f(z / WHITE_D65[2]);
    [116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)]
}

/// `|L*_a - L*_b| / 100`, clamped to `[0, 1]`.
pub fn delta_l(a: Rgb, b: Rgb) -> f64 {
    lightness_delta(lightness(a), lightness(b))
}

/// [`delta_l`] from precomputed L* values.
#[inline]
pub fn lightness_delta(l_a: f64, l_b: f64) -> f64 {
    ((l_a - l_b).abs() / 100.0).clamp(0.0, 1.0)
}

/// CIE94 color difference (graphic-arts weights), with `a` as reference.
pub fn delta_e94(a: Rgb, b: Rgb) -> f64 {
    let [l1, a1, b1] = srgb_to_lab(a);
    let [l2, a2, b2] = srgb_to_lab(b);
    let c1 = a1.hypot(b1);
    let c2 = a2.hypot(b2);
    let dl = l1 - l2;
    let dc = c1 - c2;
    let (da, db) = (a1 - a2, b1 - b2);
    let dh2 = (da * da + db * db - dc * dc).max(0.0);
    let sc = 1.0 + 0.045 * c1;
    let sh = 1.0 + 0.015 * c1;
    (dl * dl + (dc / sc).powi(2) + dh2 / (sh * sh)).sqrt()
}

const DECODE_SEGMENTS: usize = 4096;
const LIGHTNESS_SEGMENTS: usize = 16384;

/// Table-driven [`lightness`] for per-pixel loops. Piecewise-linear tables
/// for the sRGB decode and for `Y -> L*`; absolute error below 1e-3 L*.
#[derive(Clone, Debug)]
pub struct LightnessLut {
    decode: Vec<f32>,
    lightness: Vec<f32>,
}

impl Default for LightnessLut {
    fn default() -> Self {
        Self::new()
    }
}

impl LightnessLut {
    pub fn new() -> Self {
        let decode = (0..=DECODE_SEGMENTS)
            .map(|i| srgb_to_linear(i as f64 / DECODE_SEGMENTS as f64) as f32)
            .collect();
        let lightness = (0..=LIGHTNESS_SEGMENTS)
            .map(|i| (116.0 * lab_f(i as f64 / LIGHTNESS_SEGMENTS as f64) - 16.0) as f32)
            .collect();
        Self { decode, lightness }
    }

    #[inline]
    fn interp(table: &[f32], v: f32) -> f32 {
        let n = table.len() - 1;
        let t = v.clamp(0.0, 1.0) * n as f32;
        let i = (t as usize).min(n - 1);
        let f = t - i as f32;
        table[i] + (table[i + 1] - table[i]) * f
    }

    #[inline]
    pub fn lightness(&self, rgb: Rgb) -> f32 {
        let [r, g, b] = rgb.map(|c| Self::interp(&self.decode, c));
        let y = 0.212_672_9 * r + 0.715_152_2 * g + 0.072_175_0 * b;
        Self::interp(&self.lightness, y)
    }
}

/// Which distance feeds the `(1 - |ΔL|)` history trust factor.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HistoryDistance {
    /// Normalized L* difference.
    #[default]
    Lightness,
    /// ΔE94 / 100, clamped to `[0, 1]`.
    DeltaE94,
}

impl HistoryDistance {
    pub fn eval(self, current: Rgb, history: Rgb) -> f64 {
        match self {
            HistoryDistance::Lightness => delta_l(current, history),
            HistoryDistance::DeltaE94 => (delta_e94(current, history) / 100.0).clamp(0.0, 1.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lightness_table_tracks_exact() {
        let lut = LightnessLut::new();
        let mut worst = 0.0f64;
        for i in 0..=40 {
            for j in 0..=40 {
                for k in 0..=10 {
                    let c = [i as f32 / 40.0, j as f32 / 40.0, k as f32 / 10.0];
                    worst = worst.max((lut.lightness(c) as f64 - lightness(c)).abs());
                }
            }
        }
        for i in 0..=1000 {
            let c = [i as f32 / 1000.0; 3];
            worst = worst.max((lut.lightness(c) as f64 - lightness(c)).abs());
        }
        assert!(worst < 1e-3, "{worst}");
    }

    #[test]
    fn identical_colors() {
        for c in [[0.0; 3], [0.2, 0.7, 0.1], [1.0; 3]] {
            assert_eq!(delta_l(c, c), 0.0);
            assert_eq!(delta_e94(c, c), 0.0);
        }
    }

    #[test]
    fn black_white_is_one() {
        assert_eq!(delta_l([0.0; 3], [1.0; 3]), 1.0);
        assert_eq!(lightness([0.0; 3]), 0.0);
    }

    #[test]
    fn red_vs_green() {
        let d = delta_l([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        assert!(d > 0.0 && d < 1.0);
        assert!((d - 0.344_939_282_114_907).abs() < 1e-9, "{d}");
        let e = delta_e94([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        assert!((e - 73.430_425_020_332_27).abs() < 1e-6, "{e}");
    }

    #[test]
    fn lab_of_primaries() {
        let [l, a, b] = srgb_to_lab([1.0, 0.0, 0.0]);
        assert!((l - 53.240_794).abs() < 1e-5);
        assert!((a - 80.092_459).abs() < 1e-5);
        assert!((b - 67.203_196).abs() < 1e-5);
    }

    #[test]
    fn history_distance_modes() {
        let a = [0.2, 0.4, 0.6];
        let b = [0.6, 0.4, 0.2];
        assert_eq!(HistoryDistance::Lightness.eval(a, b), delta_l(a, b));
        let e = HistoryDistance::DeltaE94.eval(a, b);
        assert!(e > 0.0 && e <= 1.0);
    }
}
