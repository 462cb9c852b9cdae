//! Reproducible Gaussian streams on top of counter-mode ChaCha.
//!
//! A stream is identified by `(seed, stream_id)`: the seed keys the cipher and
//! the stream id selects ChaCha's 64-bit nonce, so distinct ids never share
//! keystream. Every normal deviate consumes exactly two 64-bit words, which
//! makes draw `k` of a stream a pure function of `(seed, stream_id, k)`.

use std::f64::consts::TAU;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngStream {
    pub seed: u64,
    pub stream_id: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        Self { seed, stream_id }
    }

    /// Derived stream for sub-task `index` (e.g. one particle).
    pub fn child(&self, index: u64) -> RngStream {
        RngStream { seed: self.seed, stream_id: splitmix64(self.stream_id).wrapping_add(index) }
    }

    pub fn normals(&self) -> NormalSource {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream_id);
        NormalSource { rng }
    }

    /// `count` i.i.d. standard normal samples.
    pub fn gaussian_draws(&self, count: usize) -> Vec<f64> {
        let mut src = self.normals();
        (0..count).map(|_| src.next_normal()).collect()
    }
}

/// Sequential standard-normal generator for one stream.
#[derive(Debug, Clone)]
pub struct NormalSource {
    rng: ChaCha8Rng,
}

impl NormalSource {
    /// Uniform on the open interval (0, 1).
    pub fn next_uniform(&mut self) -> f64 {
        ((self.rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Box–Muller, cosine branch only; always consumes two words.
    pub fn next_normal(&mut self) -> f64 {
        let u1 = self.next_uniform();
        let u2 = self.next_uniform();
        (-2.0 * u1.ln()).sqrt() * (TAU * u2).cos()
    }

    /// Fills `out` using both Box–Muller branches (two words per pair).
    pub fn fill_normals(&mut self, out: &mut [f64]) {
        let mut pairs = out.chunks_exact_mut(2);
        for pair in &mut pairs {
            let r = (-2.0 * self.next_uniform().ln()).sqrt();
            let (s, c) = (TAU * self.next_uniform()).sin_cos();
            pair[0] = r * c;
            pair[1] = r * s;
        }
        if let [last] = pairs.into_remainder() {
            *last = self.next_normal();
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
