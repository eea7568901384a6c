//! Seeded random streams.
//!
//! Every replica draws from its own ChaCha8 stream, addressed by a 64-bit
//! seed and a 64-bit stream index. ChaCha is counter based, so two streams
//! with the same seed never overlap and a replica's draws do not depend on
//! how many other replicas ran before it.
//!
//! Uniforms are built from the top 53 bits of a `u64`, and the exponential
//! transform uses the pure-Rust `libm` logarithm, so sample paths are the
//! same on every platform.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// A reproducible random stream.
#[derive(Clone, Debug)]
pub struct StreamRng {
    inner: ChaCha8Rng,
}

impl StreamRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self { inner }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform on `[0, 1)`.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `(0, 1]`.
    #[inline]
    pub fn uniform_pos(&mut self) -> f64 {
        1.0 - self.uniform()
    }

    /// Exponential variate with the given rate.
    #[inline]
    pub fn exponential(&mut self, rate: f64) -> f64 {
        -libm::log(self.uniform_pos()) / rate
    }

    /// Uniform integer in `0..n`. Uses rejection so the result is exactly uniform.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0);
        let zone = u64::MAX - (u64::MAX - n + 1) % n;
        loop {
            let v = self.next_u64();
            if v <= zone {
                return v % n;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let mut a = StreamRng::new(7, 0);
        let mut b = StreamRng::new(7, 0);
        let mut c = StreamRng::new(7, 1);
        let xa: Vec<u64> = (0..8).map(|_| a.next_u64()).collect();
        let xb: Vec<u64> = (0..8).map(|_| b.next_u64()).collect();
        let xc: Vec<u64> = (0..8).map(|_| c.next_u64()).collect();
        assert_eq!(xa, xb);
        assert_ne!(xa, xc);
    }

    #[test]
    fn reference_vector_is_pinned() {
        // Frozen first draws of (seed 2024, stream 3); a change here breaks
        // every reproducibility guarantee downstream.
        let mut r = StreamRng::new(2024, 3);
        let v: Vec<u64> = (0..3).map(|_| r.next_u64()).collect();
        assert_eq!(v, REFERENCE);
    }

    const REFERENCE: [u64; 3] = [375113258134689447, 4791808305642323029, 13302992560170932137];

    #[test]
    fn uniform_ranges() {
        let mut r = StreamRng::new(1, 0);
        for _ in 0..10_000 {
            let u = r.uniform();
            assert!((0.0..1.0).contains(&u));
            let v = r.uniform_pos();
            assert!(v > 0.0 && v <= 1.0);
            assert!(r.below(3) < 3);
        }
    }

    #[test]
    fn exponential_mean() {
        let mut r = StreamRng::new(11, 0);
        let n = 200_000;
        let mean: f64 = (0..n).map(|_| r.exponential(2.0)).sum::<f64>() / n as f64;
        // sd of the mean is 0.5/sqrt(n)
        assert!((mean - 0.5).abs() < 4.0 * 0.5 / (n as f64).sqrt());
    }
}
