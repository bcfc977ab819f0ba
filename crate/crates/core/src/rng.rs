//! Seeded, stream-splittable random source used by every generator.
//!
//! The generator is ChaCha8 keyed by the seed, with one independent stream per
//! instance component. Uniforms take the top 53 bits of each 64-bit word and
//! normals come from Box–Muller on that uniform stream, so fixtures can be
//! reproduced from any language that has a ChaCha8 implementation.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

/// Name and version of the generator, recorded in instance files.
pub const GENERATOR: &str = "chacha8-boxmuller-v1";

/// Stream identifiers, one per random component of an instance.
pub mod streams {
    pub const ECQP_A: u64 = 0x0101;
    pub const ECQP_B: u64 = 0x0102;
    pub const ECQP_C: u64 = 0x0103;
    pub const ECQP_Q: u64 = 0x0104;
    pub const NNQP_H: u64 = 0x0201;
    pub const NNQP_B: u64 = 0x0202;
    pub const NNQP_RHS: u64 = 0x0203;
    pub const NNQP_C: u64 = 0x0204;
    pub const NOISE: u64 = 0x0301;
    pub const SVM_SAMPLES: u64 = 0x0401;
    pub const QP2: u64 = 0x0501;
    pub const POWER_START: u64 = 0x0601;
}

#[derive(Clone, Debug)]
pub struct SeededStream {
    rng: ChaCha8Rng,
    spare: Option<f64>,
}

impl SeededStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        Self { rng, spare: None }
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn uniform_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// Standard normal via the Box–Muller transform.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // 1 - u lies in (0, 1], so the logarithm is finite.
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }

    pub fn normal_vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.normal()).collect()
    }

    pub fn uniform_vec(&mut self, n: usize) -> Vec<f64> {
        (0..n).map(|_| self.uniform()).collect()
    }
}
