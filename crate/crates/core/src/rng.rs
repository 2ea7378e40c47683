//! Reproducible random streams.
//!
//! Every stream is ChaCha8 keyed by the 64-bit seed (little-endian in the first
//! eight key bytes, remaining key bytes zero) with the ChaCha stream id set to
//! the stream index. Uniform doubles take the top 53 bits of `next_u64`.
//! Gaussians use the Box-Muller transform on consecutive uniform pairs, emitting
//! the cosine branch first and the sine branch on the following call.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone)]
pub struct StreamRng {
    inner: ChaCha8Rng,
    spare: Option<f64>,
}

impl StreamRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        let mut inner = ChaCha8Rng::from_seed(key);
        inner.set_stream(stream);
        StreamRng { inner, spare: None }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    /// Uniform in [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Standard normal deviate.
    pub fn gaussian(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // 1 - U keeps the logarithm argument in (0, 1].
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn bit(&mut self) -> bool {
        self.next_u64() >> 63 == 1
    }
}

/// Stream id for frame `frame` of SNR point `point` in a simulation sweep.
pub fn sweep_stream(point: usize, frame: u64) -> u64 {
    ((point as u64) << 40) | frame
}
