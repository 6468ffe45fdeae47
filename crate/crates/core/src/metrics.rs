//! Full-reference image quality metrics.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::image::{Image, Rgb};

/// 10·log10(1/MSE) over all channels; `f64::INFINITY` for identical images.
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    a.ensure_same_dims(b)?;
    if a.is_empty() {
        return Err(Error::invalid("psnr of empty images"));
    }
    let w = a.width();
    // per-row partials summed in order, so the result is thread-count independent
    let rows: Vec<f64> = a
        .as_slice()
        .par_chunks(w)
        .zip(b.as_slice().par_chunks(w))
        .map(|(ra, rb)| {
            ra.iter()
                .zip(rb)
                .map(|(p, q)| {
                    (0..3)
                        .map(|c| {
                            let d = p[c] as f64 - q[c] as f64;
                            d * d
                        })
                        .sum::<f64>()
                })
                .sum::<f64>()
        })
        .collect();
    let mse = rows.iter().sum::<f64>() / (3 * a.len()) as f64;
    Ok(if mse == 0.0 {
        f64::INFINITY
    } else {
        -10.0 * mse.log10()
    })
}

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_K1: f64 = 0.01;
pub const SSIM_K2: f64 = 0.03;

/// Rec.709 luma of an encoded color.
#[inline]
pub fn luma(p: Rgb) -> f64 {
    0.2126 * p[0] as f64 + 0.7152 * p[1] as f64 + 0.0722 * p[2] as f64
}

fn gaussian_window() -> [f64; SSIM_WINDOW] {
    let r = (SSIM_WINDOW / 2) as f64;
    let mut k = [0.0; SSIM_WINDOW];
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - r;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let total: f64 = k.iter().sum();
    k.map(|v| v / total)
}

/// Mean SSIM of the Rec.709 luma planes over all fully covered windows.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    SsimEvaluator::new(a)?.score(b)
}

/// SSIM against a fixed reference with the reference statistics and all
/// scratch planes kept between calls.
#[derive(Clone, Debug)]
pub struct SsimEvaluator {
    width: usize,
    height: usize,
    kernel: [f64; SSIM_WINDOW],
    ref_luma: Vec<f64>,
    ref_mean: Vec<f64>,
    ref_var: Vec<f64>,
    luma: Vec<f64>,
    horizontal: Vec<[f64; 3]>,
}

impl SsimEvaluator {
    pub fn new(reference: &Image) -> Result<Self> {
        let (w, h) = reference.dims();
        if w < SSIM_WINDOW || h < SSIM_WINDOW {
            return Err(Error::invalid(format!(
                "ssim needs at least {SSIM_WINDOW}x{SSIM_WINDOW} pixels, got {w}x{h}"
            )));
        }
        let valid = (w + 1 - SSIM_WINDOW) * (h + 1 - SSIM_WINDOW);
        let mut e = Self {
            width: w,
            height: h,
            kernel: gaussian_window(),
            ref_luma: vec![0.0; w * h],
            ref_mean: vec![0.0; valid],
            ref_var: vec![0.0; valid],
            luma: vec![0.0; w * h],
            horizontal: vec![[0.0; 3]; (w + 1 - SSIM_WINDOW) * h],
        };
        e.set_reference(reference)?;
        Ok(e)
    }

    fn valid_width(&self) -> usize {
        self.width + 1 - SSIM_WINDOW
    }

    fn check(&self, img: &Image) -> Result<()> {
        if img.dims() != (self.width, self.height) {
            return Err(Error::DimensionMismatch {
                expected: (self.width, self.height),
                actual: img.dims(),
            });
        }
        Ok(())
    }

    pub fn set_reference(&mut self, reference: &Image) -> Result<()> {
        self.check(reference)?;
        fill_luma(reference, &mut self.ref_luma);
        let ow = self.valid_width();
        let k = self.kernel;
        let (w, luma) = (self.width, &self.ref_luma);
        self.horizontal
            .par_chunks_mut(ow)
            .enumerate()
            .for_each(|(y, row)| {
                let src = &luma[y * w..(y + 1) * w];
                for (x, out) in row.iter_mut().enumerate() {
                    let mut acc = [0.0; 3];
                    for (i, &kw) in k.iter().enumerate() {
                        let v = src[x + i];
                        acc[0] += kw * v;
                        acc[1] += kw * v * v;
                    }
                    *out = acc;
                }
            });
        let horizontal = &self.horizontal;
        self.ref_mean
            .par_chunks_mut(ow)
            .zip(self.ref_var.par_chunks_mut(ow))
            .enumerate()
            .for_each(|(y, (mean, var))| {
                for x in 0..ow {
                    let (mut m, mut sq) = (0.0, 0.0);
                    for (i, &kw) in k.iter().enumerate() {
                        let hv = horizontal[(y + i) * ow + x];
                        m += kw * hv[0];
                        sq += kw * hv[1];
                    }
                    mean[x] = m;
                    var[x] = sq - m * m;
                }
            });
        Ok(())
    }

    pub fn score(&mut self, img: &Image) -> Result<f64> {
        self.check(img)?;
        fill_luma(img, &mut self.luma);
        let ow = self.valid_width();
        let oh = self.height + 1 - SSIM_WINDOW;
        let k = self.kernel;
        let (w, luma, ref_luma) = (self.width, &self.luma, &self.ref_luma);
        self.horizontal
            .par_chunks_mut(ow)
            .enumerate()
            .for_each(|(y, row)| {
                let b = &luma[y * w..(y + 1) * w];
                let a = &ref_luma[y * w..(y + 1) * w];
                for (x, out) in row.iter_mut().enumerate() {
                    let mut acc = [0.0; 3];
                    for (i, &kw) in k.iter().enumerate() {
                        let (va, vb) = (a[x + i], b[x + i]);
                        acc[0] += kw * vb;
                        acc[1] += kw * vb * vb;
                        acc[2] += kw * va * vb;
                    }
                    *out = acc;
                }
            });
        let c1 = SSIM_K1 * SSIM_K1;
        let c2 = SSIM_K2 * SSIM_K2;
        let (horizontal, ref_mean, ref_var) = (&self.horizontal, &self.ref_mean, &self.ref_var);
        let rows: Vec<f64> = (0..oh)
            .into_par_iter()
            .map(|y| {
                let mut row_sum = 0.0;
                for x in 0..ow {
                    let mut acc = [0.0; 3];
                    for (i, &kw) in k.iter().enumerate() {
                        let hv = horizontal[(y + i) * ow + x];
                        acc[0] += kw * hv[0];
                        acc[1] += kw * hv[1];
                        acc[2] += kw * hv[2];
                    }
                    let (ma, va) = (ref_mean[y * ow + x], ref_var[y * ow + x]);
                    let mb = acc[0];
                    let vb = acc[1] - mb * mb;
                    let cov = acc[2] - ma * mb;
                    row_sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                        / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                }
                row_sum
            })
            .collect();
        Ok((rows.iter().sum::<f64>() / (ow * oh) as f64).clamp(-1.0, 1.0))
    }
}

fn fill_luma(img: &Image, out: &mut [f64]) {
    out.par_iter_mut()
        .zip(img.as_slice().par_iter())
        .for_each(|(o, p)| *o = luma(*p));
}
