//! Counter-based random draws.
//!
//! Every random decision in the pipeline is a pure function of
//! `(seed, frame, pixel, counter)`, so results do not depend on the order in
//! which pixels are scheduled across threads.

use crate::error::{Error, Result};

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// A uniform real in `[0, 1)`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct RandomDraw(f64);

impl RandomDraw {
    pub fn new(u: f64) -> Result<Self> {
        if (0.0..1.0).contains(&u) {
            Ok(Self(u))
        } else {
            Err(Error::invalid(format!("random draw {u} outside [0, 1)")))
        }
    }

    /// Maps the top 53 bits of `bits` onto `[0, 1)`.
    #[inline]
    pub fn from_bits(bits: u64) -> Self {
        Self((bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64))
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }
}

/// splitmix64 finalizer.
#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Hashes the four coordinates of a draw into 64 bits.
#[inline]
pub fn hash4(seed: u64, frame: u64, pixel: u64, counter: u64) -> u64 {
    let mut h = mix(seed.wrapping_add(GOLDEN));
    h = mix(h ^ frame.wrapping_add(GOLDEN.wrapping_mul(2)));
    h = mix(h ^ pixel.wrapping_add(GOLDEN.wrapping_mul(3)));
    mix(h ^ counter.wrapping_add(GOLDEN.wrapping_mul(4)))
}

/// Stateless draw source keyed by a global seed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CounterRng {
    seed: u64,
}

impl CounterRng {
    pub const fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub const fn seed(&self) -> u64 {
        self.seed
    }

    #[inline]
    pub fn draw(&self, frame: u64, pixel: u64, counter: u64) -> RandomDraw {
        RandomDraw::from_bits(hash4(self.seed, frame, pixel, counter))
    }
}
