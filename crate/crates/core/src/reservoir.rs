//! Single-slot weighted reservoirs.
//!
//! A [`Reservoir`] holds one sample drawn from a weighted stream together with
//! the sample's weight, the running weight sum of every candidate it has
//! evaluated, and the candidate count. Candidates enter one at a time through
//! [`Reservoir::update`] (A-Chao replacement) or as whole reservoirs through
//! [`combine`].
//!
//! Temporal bias is applied to the history reservoir before it is combined
//! with a new candidate:
//!
//! * [`Reservoir::bias_wsum`] scales the weight sum by the probability that
//!   the held sample survives the upcoming comparison (Bernoulli-trial bias).
//! * [`Reservoir::full_bias`] additionally scales by `1 - |ΔL|`, where ΔL is a
//!   normalized lightness difference between the new candidate and the held
//!   sample.
//! * [`memoryless_bias`] is the classic exponential decay, kept for
//!   comparison only.
//!
//! Biasing only touches the weight sum, so a biased reservoir may report
//! `weight_sum() < weight()`, and a fully distrusted one has a zero weight sum
//! while still holding a sample. Emptiness is decided by the candidate count.
//!
//! [`AesReservoir`] implements the A-ES random-key variant for comparisons; it
//! keeps no weight sum.

use crate::error::{Error, Result};
use crate::rng::RandomDraw;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Reservoir<T> {
    sample: T,
    weight: f64,
    weight_sum: f64,
    count: u32,
}

impl<T: Default> Default for Reservoir<T> {
    fn default() -> Self {
        Self::empty()
    }
}

impl<T: Default> Reservoir<T> {
    /// A reservoir that has seen no candidates. Identity element for [`combine`].
    pub fn empty() -> Self {
        Self {
            sample: T::default(),
            weight: 0.0,
            weight_sum: 0.0,
            count: 0,
        }
    }
}

impl<T> Reservoir<T> {
    /// A reservoir holding exactly one candidate.
    pub fn single(sample: T, weight: f64) -> Result<Self> {
        check_weight(weight)?;
        Ok(Self {
            sample,
            weight,
            weight_sum: weight,
            count: 1,
        })
    }

    /// Rebuilds a reservoir from raw fields.
    ///
    /// Accepts biased states (`weight_sum < weight`), but rejects non-finite
    /// or negative values and a non-zero weight sum on an empty reservoir.
    pub fn from_parts(sample: T, weight: f64, weight_sum: f64, count: u32) -> Result<Self> {
        check_weight(weight)?;
        check_weight(weight_sum)?;
        if count == 0 && weight_sum != 0.0 {
            return Err(Error::invalid("empty reservoir with non-zero weight sum"));
        }
        Ok(Self {
            sample,
            weight,
            weight_sum,
            count,
        })
    }

    #[inline]
    pub fn sample(&self) -> &T {
        &self.sample
    }

    #[inline]
    pub fn weight(&self) -> f64 {
        self.weight
    }

    #[inline]
    pub fn weight_sum(&self) -> f64 {
        self.weight_sum
    }

    #[inline]
    pub fn count(&self) -> u32 {
        self.count
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    pub fn into_sample(self) -> T {
        self.sample
    }

    /// A-Chao update with one candidate.
    ///
    /// The candidate replaces the held sample iff `u * w_sum' < w`, where
    /// `w_sum'` already includes the candidate weight.
    pub fn update(self, candidate: T, weight: f64, u: RandomDraw) -> Result<Self> {
        check_weight(weight)?;
        let weight_sum = self.weight_sum + weight;
        let count = self.count.saturating_add(1);
        if u.value() * weight_sum < weight {
            Ok(Self {
                sample: candidate,
                weight,
                weight_sum,
                count,
            })
        } else {
            Ok(Self {
                weight_sum,
                count,
                ..self
            })
        }
    }

    /// Scales the weight sum by the survival probability of the held sample
    /// against an incoming reservoir of weight sum `incoming_wsum`.
    ///
    /// Empty reservoirs are returned unchanged.
    pub fn bias_wsum(self, incoming_wsum: f64) -> Self {
        if self.is_empty() || self.weight_sum + incoming_wsum <= 0.0 {
            return self;
        }
        Self {
            weight_sum: self.weight_sum * survival(self.weight_sum, incoming_wsum),
            ..self
        }
    }

    /// Bernoulli-trial bias further scaled by `1 - |delta_l|`, with that
    /// factor clamped to `[0, 1]`.
    pub fn full_bias(self, incoming_wsum: f64, delta_l: f64) -> Result<Self> {
        if !delta_l.is_finite() {
            return Err(Error::invalid(format!(
                "delta_l must be finite, got {delta_l}"
            )));
        }
        let trust = (1.0 - delta_l.abs()).clamp(0.0, 1.0);
        let biased = self.bias_wsum(incoming_wsum);
        Ok(Self {
            weight_sum: biased.weight_sum * trust,
            ..biased
        })
    }
}

/// Merges two reservoirs as if their streams had been concatenated.
///
/// `r1` wins iff `u * (r1.w_sum + r2.w_sum) <= r1.w_sum`. Empty reservoirs are
/// identities, so combining with one returns the other unchanged.
pub fn combine<T>(r1: Reservoir<T>, r2: Reservoir<T>, u: RandomDraw) -> Reservoir<T> {
    if r2.is_empty() {
        return r1;
    }
    if r1.is_empty() {
        return r2;
    }
    let weight_sum = r1.weight_sum + r2.weight_sum;
    let count = r1.count.saturating_add(r2.count);
    let winner = if u.value() * weight_sum <= r1.weight_sum {
        r1
    } else {
        r2
    };
    Reservoir {
        weight_sum,
        count,
        ..winner
    }
}

/// Probability that a held sample with history weight `history_wsum`
/// survives a comparison against a candidate of weight `weight`.
pub fn survival_probability(history_wsum: f64, weight: f64) -> Result<f64> {
    check_weight(history_wsum)?;
    check_weight(weight)?;
    if history_wsum + weight == 0.0 {
        return Err(Error::Undefined(
            "survival probability with zero history and zero candidate weight".into(),
        ));
    }
    Ok(survival(history_wsum, weight))
}

#[inline]
fn survival(history_wsum: f64, weight: f64) -> f64 {
    1.0 - weight / (history_wsum + weight)
}

/// Parameters of the exponential memory-less bias.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BiasParams {
    lambda: f64,
    held_index: u64,
    candidate_index: u64,
}

impl BiasParams {
    pub fn new(lambda: f64, held_index: u64, candidate_index: u64) -> Result<Self> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::invalid(format!("lambda must be >= 0, got {lambda}")));
        }
        if candidate_index < held_index {
            return Err(Error::invalid(format!(
                "candidate index {candidate_index} precedes held index {held_index}"
            )));
        }
        Ok(Self {
            lambda,
            held_index,
            candidate_index,
        })
    }
}

/// `w * exp(-lambda * (i - j))`.
pub fn memoryless_bias(weight: f64, params: BiasParams) -> f64 {
    let elapsed = (params.candidate_index - params.held_index) as f64;
    weight * (-params.lambda * elapsed).exp()
}

/// A-ES key `u^(1/w)`. A draw of exactly zero is nudged to the smallest
/// positive double so the key stays in `(0, 1)`.
pub fn aes_key(u: RandomDraw, weight: f64) -> Result<f64> {
    if !(weight.is_finite() && weight > 0.0) {
        return Err(Error::invalid(format!(
            "A-ES weight must be positive, got {weight}"
        )));
    }
    let u = if u.value() == 0.0 {
        f64::MIN_POSITIVE
    } else {
        u.value()
    };
    Ok(u.powf(1.0 / weight))
}

/// Single-slot A-ES reservoir: keeps the candidate with the largest key.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AesReservoir<T> {
    held: Option<(T, f64)>,
}

impl<T> Default for AesReservoir<T> {
    fn default() -> Self {
        Self { held: None }
    }
}

impl<T> AesReservoir<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn offer(&mut self, candidate: T, weight: f64, u: RandomDraw) -> Result<()> {
        let key = aes_key(u, weight)?;
        match &self.held {
            Some((_, held_key)) if *held_key >= key => {}
            _ => self.held = Some((candidate, key)),
        }
        Ok(())
    }

    pub fn sample(&self) -> Option<&T> {
        self.held.as_ref().map(|(s, _)| s)
    }

    pub fn key(&self) -> Option<f64> {
        self.held.as_ref().map(|(_, k)| *k)
    }
}

fn check_weight(w: f64) -> Result<()> {
    if w.is_finite() && w >= 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "weight must be finite and >= 0, got {w}"
        )))
    }
}
