//! Pixel-to-visual-angle mapping.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AngularMapping {
    /// Constant pixels-per-degree across the frame.
    #[default]
    Linear,
    /// Flat screen viewed from the distance implied by the horizontal FOV.
    Perspective,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DisplayGeometry {
    pub width_px: usize,
    pub height_px: usize,
    pub horizontal_fov_deg: f64,
    #[serde(default)]
    pub mapping: AngularMapping,
}

impl DisplayGeometry {
    pub fn new(width_px: usize, height_px: usize, horizontal_fov_deg: f64) -> Result<Self> {
        let g = Self {
            width_px,
            height_px,
            horizontal_fov_deg,
            mapping: AngularMapping::Linear,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn with_mapping(self, mapping: AngularMapping) -> Self {
        Self { mapping, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width_px == 0 || self.height_px == 0 {
            return Err(Error::invalid("display dimensions must be positive"));
        }
        if !(self.horizontal_fov_deg > 0.0 && self.horizontal_fov_deg < 180.0) {
            return Err(Error::invalid(format!(
                "horizontal_fov_deg must lie in (0, 180), got {}",
                self.horizontal_fov_deg
            )));
        }
        Ok(())
    }

    /// Pixels per degree under the linear mapping.
    #[inline]
    pub fn pixels_per_degree(&self) -> f64 {
        self.width_px as f64 / self.horizontal_fov_deg
    }

    /// Eye-to-screen distance in pixels for the perspective mapping.
    pub fn viewer_distance_px(&self) -> f64 {
        (self.width_px as f64 / 2.0) / (self.horizontal_fov_deg.to_radians() / 2.0).tan()
    }

    pub fn center(&self) -> (f64, f64) {
        (self.width_px as f64 / 2.0, self.height_px as f64 / 2.0)
    }

    /// Center of pixel `(x, y)` in continuous pixel coordinates.
    #[inline]
    pub fn pixel_center(x: usize, y: usize) -> (f64, f64) {
        (x as f64 + 0.5, y as f64 + 0.5)
    }

    /// Clamps a point into `[0, width] x [0, height]`.
    pub fn clamp_point(&self, p: (f64, f64)) -> (f64, f64) {
        (
            p.0.clamp(0.0, self.width_px as f64),
            p.1.clamp(0.0, self.height_px as f64),
        )
    }

    pub fn contains(&self, p: (f64, f64)) -> bool {
        (0.0..=self.width_px as f64).contains(&p.0) && (0.0..=self.height_px as f64).contains(&p.1)
    }

    /// Returns a per-geometry evaluator with the mapping constants hoisted.
    pub fn eccentricity_fn(&self) -> EccentricityFn {
        EccentricityFn {
            mapping: self.mapping,
            inv_ppd: 1.0 / self.pixels_per_degree(),
            distance: self.viewer_distance_px(),
            center: self.center(),
        }
    }

    /// Largest eccentricity of any frame corner seen from `gaze`.
    pub fn max_eccentricity(&self, gaze: (f64, f64)) -> f64 {
        let (w, h) = (self.width_px as f64, self.height_px as f64);
        let f = self.eccentricity_fn();
        [(0.0, 0.0), (w, 0.0), (0.0, h), (w, h)]
            .into_iter()
            .map(|c| f.eval(c, gaze))
            .fold(0.0, f64::max)
    }
}

/// Angular distance in degrees between a pixel position and the gaze point.
pub fn eccentricity(pixel: (f64, f64), gaze: (f64, f64), geom: &DisplayGeometry) -> f64 {
    geom.eccentricity_fn().eval(pixel, gaze)
}

#[derive(Clone, Copy, Debug)]
pub struct EccentricityFn {
    mapping: AngularMapping,
    inv_ppd: f64,
    distance: f64,
    center: (f64, f64),
}

impl EccentricityFn {
    #[inline]
    pub fn eval(&self, pixel: (f64, f64), gaze: (f64, f64)) -> f64 {
        match self.mapping {
            AngularMapping::Linear => {
                let dx = pixel.0 - gaze.0;
                let dy = pixel.1 - gaze.1;
                (dx * dx + dy * dy).sqrt() * self.inv_ppd
            }
            AngularMapping::Perspective => {
                let a = [
                    pixel.0 - self.center.0,
                    pixel.1 - self.center.1,
                    self.distance,
                ];
                let b = [
                    gaze.0 - self.center.0,
                    gaze.1 - self.center.1,
                    self.distance,
                ];
                let cross = [
                    a[1] * b[2] - a[2] * b[1],
                    a[2] * b[0] - a[0] * b[2],
                    a[0] * b[1] - a[1] * b[0],
                ];
                let sin = (cross[0] * cross[0] + cross[1] * cross[1] + cross[2] * cross[2]).sqrt();
                let cos = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
                sin.atan2(cos).to_degrees()
            }
        }
    }
}
