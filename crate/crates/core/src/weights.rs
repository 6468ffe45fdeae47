//! Candidate weights from retinal cone density.
//!
//! Density follows Watson's formula
//!
//! ```text
//! d(e) = 2 dc0 (1 + e/r_m)^-1 [ a_k (1 + e/r_2k)^-2 + (1 - a_k) exp(-e/r_ek) ]
//! ```
//!
//! and the acuity weight is 1 inside the fovea and `d(e) / d(r_f)` outside.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightParams {
    pub a_k: f64,
    /// degrees
    pub r_2k: f64,
    /// degrees
    pub r_ek: f64,
    /// cones / deg^2 at the foveal center
    pub dc0: f64,
    /// degrees
    pub r_m: f64,
    /// fovea radius, degrees
    pub r_f: f64,
}

impl Default for WeightParams {
    fn default() -> Self {
        Self {
            a_k: 0.9851,
            r_2k: 1.058,
            r_ek: 22.14,
            dc0: 14804.6,
            r_m: 41.03,
            r_f: 2.5,
        }
    }
}

impl WeightParams {
    pub fn with_fovea_radius(self, r_f: f64) -> Self {
        Self { r_f, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("r_2k", self.r_2k),
            ("r_ek", self.r_ek),
            ("dc0", self.dc0),
            ("r_m", self.r_m),
            ("r_f", self.r_f),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        if !(self.a_k > 0.0 && self.a_k < 1.0) {
            return Err(Error::invalid(format!(
                "a_k must lie in (0, 1), got {}",
                self.a_k
            )));
        }
        Ok(())
    }
}

/// Cone density in cones per square degree at eccentricity `e` degrees.
pub fn cone_density(e: f64, p: &WeightParams) -> Result<f64> {
    if !(e >= 0.0 && e.is_finite()) {
        return Err(Error::invalid(format!(
            "eccentricity must be >= 0, got {e}"
        )));
    }
    Ok(density(e, p))
}

#[inline]
fn density(e: f64, p: &WeightParams) -> f64 {
    let midget = p.a_k / ((1.0 + e / p.r_2k) * (1.0 + e / p.r_2k));
    let tail = (1.0 - p.a_k) * (-e / p.r_ek).exp();
    2.0 * p.dc0 / (1.0 + e / p.r_m) * (midget + tail)
}

/// Normalized weight in `(0, 1]`.
pub fn acuity_weight(e: f64, p: &WeightParams) -> Result<f64> {
    cone_density(e, p)?;
    Ok(AcuityModel::new(*p).weight(e))
}

/// [`acuity_weight`] with `d(r_f)` precomputed, for per-pixel use.
#[derive(Clone, Copy, Debug)]
pub struct AcuityModel {
    params: WeightParams,
    inv_fovea_density: f64,
}

impl AcuityModel {
    pub fn new(params: WeightParams) -> Self {
        Self {
            params,
            inv_fovea_density: 1.0 / density(params.r_f, &params),
        }
    }

    pub fn params(&self) -> &WeightParams {
        &self.params
    }

    #[inline]
    pub fn weight(&self, e: f64) -> f64 {
        if e <= self.params.r_f {
            1.0
        } else {
            density(e, &self.params) * self.inv_fovea_density
        }
    }
}

/// Piecewise-linear table of [`AcuityModel::weight`] for per-pixel loops.
/// Exactly 1 inside the fovea; relative error below 1e-6 outside.
#[derive(Clone, Debug)]
pub struct AcuityTable {
    r_f: f64,
    steps_per_deg: f64,
    values: Vec<f64>,
}

impl AcuityTable {
    const STEPS_PER_DEG: f64 = 256.0;

    /// Covers eccentricities up to `max_e`; beyond that the last entry holds.
    pub fn new(model: &AcuityModel, max_e: f64) -> Self {
        let n = (max_e.max(0.0) * Self::STEPS_PER_DEG).ceil() as usize + 2;
        let values = (0..n)
            .map(|i| model.weight(i as f64 / Self::STEPS_PER_DEG))
            .collect();
        Self {
            r_f: model.params.r_f,
            steps_per_deg: Self::STEPS_PER_DEG,
            values,
        }
    }

    #[inline]
    pub fn weight(&self, e: f64) -> f64 {
        if e <= self.r_f {
            return 1.0;
        }
        let t = e * self.steps_per_deg;
        let i = (t as usize).min(self.values.len() - 2);
        let f = (t - i as f64).min(1.0);
        self.values[i] + (self.values[i + 1] - self.values[i]) * f
    }
}
