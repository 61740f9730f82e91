//! Generation of per-block second moments.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, Normal, StandardNormal};

use crate::registry::Registry;

/// Raw (zero-mean) second moments of one signal block.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SignalSums {
    pub aa: f64,
    pub ab: f64,
    pub bb: f64,
}

/// Source of block statistics for `x_B = gain·x_A + noise`.
pub trait BlockSampler: Send + Sync {
    fn name(&self) -> &'static str;
    /// Sums of `x_A²`, `x_A x_B`, `x_B²` over `n` pulses.
    fn signal(&self, rng: &mut ChaCha8Rng, n: u64, v_a: f64, gain: f64, noise_var: f64) -> SignalSums;
    /// Sum of `x_0²` over `n` shot-noise pulses of variance `var`.
    fn shot(&self, rng: &mut ChaCha8Rng, n: u64, var: f64) -> f64;
}

/// Draws every pulse.
pub struct PerPulse;

impl BlockSampler for PerPulse {
    fn name(&self) -> &'static str {
        "per_pulse"
    }

    fn signal(&self, rng: &mut ChaCha8Rng, n: u64, v_a: f64, gain: f64, noise_var: f64) -> SignalSums {
        let sa = v_a.sqrt();
        let sn = noise_var.sqrt();
        let mut s = SignalSums::default();
        for _ in 0..n {
            let za: f64 = rng.sample(StandardNormal);
            let zn: f64 = rng.sample(StandardNormal);
            let xa = sa * za;
            let xb = gain * xa + sn * zn;
            s.aa += xa * xa;
            s.ab += xa * xb;
            s.bb += xb * xb;
        }
        s
    }

    fn shot(&self, rng: &mut ChaCha8Rng, n: u64, var: f64) -> f64 {
        let normal = Normal::new(0.0, var.sqrt()).expect("finite variance");
        (0..n).map(|_| normal.sample(rng).powi(2)).sum()
    }
}

/// Draws the block's scatter matrix directly from its Wishart law (Bartlett decomposition).
pub struct Sufficient;

fn chi2(rng: &mut ChaCha8Rng, dof: u64) -> f64 {
    ChiSquared::new(dof as f64).expect("positive degrees of freedom").sample(rng)
}

impl BlockSampler for Sufficient {
    fn name(&self) -> &'static str {
        "sufficient"
    }

    fn signal(&self, rng: &mut ChaCha8Rng, n: u64, v_a: f64, gain: f64, noise_var: f64) -> SignalSums {
        let a11 = chi2(rng, n).sqrt();
        let a22 = chi2(rng, n - 1).sqrt();
        let a21: f64 = rng.sample(StandardNormal);
        // Cholesky factor of [[V_A, g V_A], [g V_A, g² V_A + σ²]]
        let l11 = v_a.sqrt();
        let l21 = gain * l11;
        let l22 = noise_var.sqrt();
        // S = L A Aᵀ Lᵀ with A = [[a11, 0], [a21, a22]]
        let (u11, u21, u22) = (a11 * a11, a11 * a21, a21 * a21 + a22 * a22);
        SignalSums {
            aa: l11 * l11 * u11,
            ab: l11 * (l21 * u11 + l22 * u21),
            bb: l21 * l21 * u11 + 2.0 * l21 * l22 * u21 + l22 * l22 * u22,
        }
    }

    fn shot(&self, rng: &mut ChaCha8Rng, n: u64, var: f64) -> f64 {
        var * chi2(rng, n)
    }
}

pub fn sampler_registry() -> Registry<dyn BlockSampler> {
    let mut reg: Registry<dyn BlockSampler> = Registry::new("block sampler");
    reg.register("sufficient", || Box::new(Sufficient))
        .register("per_pulse", || Box::new(PerPulse));
    reg
}
