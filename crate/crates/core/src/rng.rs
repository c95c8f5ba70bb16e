//! Pinned pseudo-random generation.
//!
//! Every random draw in the crate goes through [`Rng`], a Marsaglia xorshift128
//! generator (`x ^= x << 11; x ^= x >> 8; w ^= w >> 19 ^ x`, 32-bit words)
//! seeded from a `u64` through the PCG32 expansion of `rand_core`
//! (multiplier `6364136223846793005`, increment `11634580027462260723`).
//! Conversions to floats and bounded integers are done here rather than by a
//! distribution library so the whole stream is reproducible from the
//! documented algorithm alone.

use rand_core::{RngCore, SeedableRng};
use rand_xorshift::XorShiftRng;
use std::hash::Hasher;

#[derive(Clone, Debug)]
pub struct Rng {
    inner: XorShiftRng,
    spare_normal: Option<f64>,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: XorShiftRng::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)` with 53 bits of precision.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `(0, 1]`.
    pub fn uniform_open_closed(&mut self) -> f64 {
        1.0 - self.uniform()
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Unbiased integer in `[0, n)` by rejection sampling. `n` must be nonzero.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let zone = u64::MAX - (u64::MAX % n);
        loop {
            let x = self.next_u64();
            if x < zone {
                return x % n;
            }
        }
    }

    /// Standard normal via the Box-Muller transform; draws come in pairs.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare_normal.take() {
            return z;
        }
        let u1 = self.uniform_open_closed();
        let u2 = self.uniform();
        let radius = (-2.0 * u1.ln()).sqrt();
        let angle = std::f64::consts::TAU * u2;
        self.spare_normal = Some(radius * angle.sin());
        radius * angle.cos()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    /// In-place Fisher-Yates shuffle (Durstenfeld, descending index).
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.below(i as u64 + 1) as usize;
            items.swap(i, j);
        }
    }
}

/// Pinned 64-bit FNV-1a hash of a sequence of tagged parts, used to derive
/// sub-seeds. Each part is written as its UTF-8 bytes followed by a `0xff`
/// separator so that `("ab", "c")` and `("a", "bc")` differ.
pub fn derive_seed(parts: &[&str]) -> u64 {
    let mut hasher = fnv::FnvHasher::default();
    for part in parts {
        hasher.write(part.as_bytes());
        hasher.write(&[0xff]);
    }
    hasher.finish()
}

/// Sub-seed for a numbered sub-stream of `seed`.
pub fn child_seed(seed: u64, tag: &str, index: u64) -> u64 {
    derive_seed(&[&seed.to_string(), tag, &index.to_string()])
}
