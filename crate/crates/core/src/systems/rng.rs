//! Seeded randomness.
//!
//! Every stochastic operation takes an explicit 64-bit seed and draws from
//! xoshiro256++ seeded through SplitMix64, so reports are bit-reproducible.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::{SplitMix64, Xoshiro256PlusPlus};

#[derive(Debug, Clone)]
pub struct Rng64(Xoshiro256PlusPlus);

impl Rng64 {
    pub fn new(seed: u64) -> Self {
        Self(Xoshiro256PlusPlus::seed_from_u64(seed))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    /// Uniform in `[0, 1)` with 53 random bits.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `0..n` (Lemire's multiply-shift with rejection).
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let threshold = n.wrapping_neg() % n;
        loop {
            let m = (self.next_u64() as u128) * (n as u128);
            if (m as u64) >= threshold {
                return (m >> 64) as u64;
            }
        }
    }

    /// Index drawn from the cumulative distribution `cdf` (last entry ~1).
    pub fn categorical(&mut self, cdf: &[f64]) -> usize {
        let u = self.next_f64();
        cdf.iter()
            .position(|&c| u < c)
            .unwrap_or(cdf.len() - 1)
    }
}

/// Independent child seed for stream `stream` of `seed`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    let mut sm = SplitMix64::seed_from_u64(seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15));
    sm.next_u64() ^ sm.next_u64().rotate_left(17)
}
