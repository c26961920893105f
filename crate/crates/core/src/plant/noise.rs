use nalgebra::DVector;
use rand_core::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseKind {
    None,
    Uniform,
}

/// Output measurement noise: i.i.d. uniform on `[−half_width, half_width]`
/// per channel and sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub half_width: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self { kind: NoiseKind::None, half_width: 0.0, seed: 0 }
    }

    pub fn uniform(half_width: f64, seed: u64) -> Self {
        Self { kind: NoiseKind::Uniform, half_width, seed }
    }

    pub fn stream(&self) -> NoiseStream {
        NoiseStream { spec: *self, rng: Xoshiro256PlusPlus::seed_from_u64(self.seed) }
    }
}

/// Per-run noise generator.
///
/// xoshiro256++ seeded through SplitMix64; each sample takes the top 53 bits
/// of one 64-bit draw as `u ∈ [0, 1)` and returns `a·(2u − 1)`. Only integer
/// state and exact float operations are involved, so a seed reproduces the
/// same stream on every platform.
#[derive(Debug, Clone)]
pub struct NoiseStream {
    spec: NoiseSpec,
    rng: Xoshiro256PlusPlus,
}

impl NoiseStream {
    pub fn sample(&mut self, channels: usize) -> DVector<f64> {
        match self.spec.kind {
            NoiseKind::None => DVector::zeros(channels),
            NoiseKind::Uniform => DVector::from_fn(channels, |_, _| {
                let u = (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
                self.spec.half_width * (2.0 * u - 1.0)
            }),
        }
    }
}
