//! Homodyne acquisition sessions and the (T, ξ) estimator.

use std::io::Write;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{AcquisitionConfig, Schedule};
use super::drift::block_levels;
use super::sampler::sampler_registry;
use crate::error::{finite, invalid, Error, Result};
use crate::keyrate::{excess_noise_std, CvqkdSystem, EstimatorAux};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Shot,
    Signal,
}

impl BlockKind {
    pub fn label(self) -> &'static str {
        match self {
            BlockKind::Shot => "shot",
            BlockKind::Signal => "signal",
        }
    }
}

/// Second-moment sums of one block. Shot blocks only fill `sum_bb`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlockRecord {
    pub index: u64,
    pub kind: BlockKind,
    pub pulses: u64,
    pub sum_aa: f64,
    pub sum_ab: f64,
    pub sum_bb: f64,
    /// Shot-noise level during the block.
    pub n0: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Session {
    pub blocks: Vec<BlockRecord>,
}

impl Session {
    /// Writes `block_index,kind,variance,covariance` rows.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let io = |e: csv::Error| invalid("block dump", e.to_string());
        w.write_record(["block_index", "kind", "variance", "covariance"]).map_err(io)?;
        for b in &self.blocks {
            let n = b.pulses as f64;
            let cov = match b.kind {
                BlockKind::Signal => format!("{:e}", b.sum_ab / n),
                BlockKind::Shot => String::new(),
            };
            w.write_record([
                b.index.to_string(),
                b.kind.label().to_string(),
                format!("{:e}", b.sum_bb / n),
                cov,
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| invalid("block dump", e.to_string()))
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of an independent stream for `(seed, stream)`.
pub fn derive_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream))
}

const DRIFT_STREAM: u64 = u64::MAX;

pub fn block_kind(schedule: Schedule, index: u64, n_blocks: u64) -> BlockKind {
    match schedule {
        Schedule::Alternating if index % 2 == 0 => BlockKind::Shot,
        Schedule::Alternating => BlockKind::Signal,
        Schedule::Sequential if index < n_blocks / 2 => BlockKind::Shot,
        Schedule::Sequential => BlockKind::Signal,
    }
}

/// Simulates an acquisition of alternating or sequential shot and signal blocks.
///
/// Signal pulses: `x_B = √(η_B T)·x_A + N(0, N_0(t) + η_B T ξ + v_el)`;
/// shot pulses: `N(0, N_0(t) + v_el)`. Blocks are generated in parallel from
/// per-block seeds, so the output does not depend on scheduling.
pub fn simulate_homodyne_session(
    system: &CvqkdSystem,
    t: f64,
    xi_true: f64,
    cfg: &AcquisitionConfig,
) -> Result<Session> {
    cfg.validate()?;
    finite("xi_true", xi_true)?;
    if xi_true < 0.0 {
        return Err(invalid("xi_true", "must be >= 0"));
    }
    if !(t >= 0.0 && t <= 1.0) {
        return Err(invalid("transmission", format!("{t} not in [0, 1]")));
    }
    if !(system.v_a >= 0.0 && system.eta_b > 0.0 && system.v_el >= 0.0) {
        return Err(invalid("system", "needs V_A >= 0, eta_B > 0, v_el >= 0"));
    }
    let sampler = sampler_registry().create(&cfg.sampler)?;
    let n_blocks = cfg.n_blocks();
    let mut drift_rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, DRIFT_STREAM));
    let levels = block_levels(&mut drift_rng, n_blocks as usize, cfg.block_pulses, cfg.drift.step());
    let g2 = system.eta_b * t;
    let gain = g2.sqrt();
    let blocks = (0..n_blocks)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, i));
            let n0 = levels[i as usize];
            let kind = block_kind(cfg.schedule, i, n_blocks);
            let record = |aa, ab, bb| BlockRecord {
                index: i,
                kind,
                pulses: cfg.block_pulses,
                sum_aa: aa,
                sum_ab: ab,
                sum_bb: bb,
                n0,
            };
            match kind {
                BlockKind::Shot => {
                    let bb = sampler.shot(&mut rng, cfg.block_pulses, n0 + system.v_el);
                    record(0.0, 0.0, bb)
                }
                BlockKind::Signal => {
                    let noise = n0 + g2 * xi_true + system.v_el;
                    let s = sampler.signal(&mut rng, cfg.block_pulses, system.v_a, gain, noise);
                    record(s.aa, s.ab, s.bb)
                }
            }
        })
        .collect();
    Ok(Session { blocks })
}

/// Receiver calibration the estimator relies on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorCalibration {
    pub v_a: f64,
    pub eta_b: f64,
    pub v_el: f64,
}

impl From<&CvqkdSystem> for EstimatorCalibration {
    fn from(s: &CvqkdSystem) -> Self {
        EstimatorCalibration {
            v_a: s.v_a,
            eta_b: s.eta_b,
            v_el: s.v_el,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationResult {
    pub t_hat: f64,
    /// Input-referred; may be negative for finite samples.
    pub xi_hat: f64,
    pub xi_hat_at_bob: f64,
    pub n0_hat: f64,
    /// Signal pulses used.
    pub n_used: u64,
    pub n_shot: u64,
    /// Delta-method standard deviation of `xi_hat`.
    pub std_xi: f64,
    pub std_xi_at_bob: f64,
    /// Set when sampling noise pushes `t_hat` above 1.
    pub t_above_one: bool,
}

/// Estimates `T` and `ξ` from pooled block moments.
///
/// `N̂_0 = <x_0²> - v_el`, `T̂ = (<x_A x_B>/V_A)²/η_B`,
/// `ξ̂_bob = (<x_B²> - <x_A x_B>²/V_A - <x_0²>)/N̂_0` and `ξ̂ = ξ̂_bob/(η_B T̂)`.
pub fn estimate_t_xi(blocks: &[BlockRecord], cal: &EstimatorCalibration) -> Result<EstimationResult> {
    if !(cal.v_a > 0.0) {
        return Err(invalid("v_a", "estimator needs V_A > 0"));
    }
    let (mut n_sig, mut sab, mut sbb) = (0u64, 0.0, 0.0);
    let (mut n_shot, mut s00) = (0u64, 0.0);
    for b in blocks {
        match b.kind {
            BlockKind::Signal => {
                n_sig += b.pulses;
                sab += b.sum_ab;
                sbb += b.sum_bb;
            }
            BlockKind::Shot => {
                n_shot += b.pulses;
                s00 += b.sum_bb;
            }
        }
    }
    if n_sig == 0 || n_shot == 0 {
        return Err(invalid("blocks", "need at least one signal and one shot-noise block"));
    }
    let c = sab / n_sig as f64;
    let b = sbb / n_sig as f64;
    let s = s00 / n_shot as f64;
    let n0_hat = s - cal.v_el;
    if !(n0_hat > 0.0) {
        return Err(Error::Calibration(format!("shot-noise estimate {n0_hat} is not positive")));
    }
    let t_hat = (c / cal.v_a).powi(2) / cal.eta_b;
    let xi_bob = (b - c * c / cal.v_a - s) / n0_hat;
    let xi = xi_bob / (cal.eta_b * t_hat);
    let aux = EstimatorAux {
        v_a: cal.v_a,
        t: t_hat,
        eta_b: cal.eta_b,
        v_el: cal.v_el,
    };
    let std = excess_noise_std(&aux, xi.max(0.0), n_sig as f64, n_shot as f64);
    Ok(EstimationResult {
        t_hat,
        xi_hat: xi,
        xi_hat_at_bob: xi_bob,
        n0_hat,
        n_used: n_sig,
        n_shot,
        std_xi: std.at_alice,
        std_xi_at_bob: std.at_bob,
        t_above_one: t_hat > 1.0,
    })
}
