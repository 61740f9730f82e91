use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

/// Relative random-walk step per pulse that puts the mean absolute drift
/// between consecutive 2e8-pulse windows at 1.5e-3 (and ~3e-5 at 1e5 pulses).
pub const DEFAULT_DRIFT_STEP: f64 = 1.628e-7;

/// Order of shot-noise and signal blocks in time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// Shot, signal, shot, signal, ...
    Alternating,
    /// All shot-noise blocks first, then all signal blocks.
    Sequential,
}

/// Temporal behaviour of the shot-noise level `N_0(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DriftModel {
    None,
    /// Gaussian random walk of `N_0` with the given standard deviation per pulse (relative to nominal).
    RandomWalk { step_per_pulse: f64 },
}

impl DriftModel {
    pub fn calibrated() -> Self {
        DriftModel::RandomWalk {
            step_per_pulse: DEFAULT_DRIFT_STEP,
        }
    }

    pub fn step(&self) -> f64 {
        match *self {
            DriftModel::None => 0.0,
            DriftModel::RandomWalk { step_per_pulse } => step_per_pulse,
        }
    }
}

impl Default for DriftModel {
    fn default() -> Self {
        DriftModel::calibrated()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AcquisitionConfig {
    pub n_total_pulses: u64,
    pub block_pulses: u64,
    pub schedule: Schedule,
    pub drift: DriftModel,
    pub seed: u64,
    /// Registered block sampler name.
    pub sampler: String,
}

impl Default for AcquisitionConfig {
    fn default() -> Self {
        AcquisitionConfig {
            n_total_pulses: 2_000_000,
            block_pulses: 100_000,
            schedule: Schedule::Alternating,
            drift: DriftModel::default(),
            seed: 0,
            sampler: "sufficient".into(),
        }
    }
}

impl AcquisitionConfig {
    pub fn validate(&self) -> Result<()> {
        if self.block_pulses < 2 {
            return Err(invalid("block_pulses", "must be >= 2"));
        }
        if self.n_total_pulses % self.block_pulses != 0 {
            return Err(invalid(
                "block_pulses",
                format!("{} does not divide n_total_pulses {}", self.block_pulses, self.n_total_pulses),
            ));
        }
        let blocks = self.n_total_pulses / self.block_pulses;
        if blocks < 2 || blocks % 2 != 0 {
            return Err(invalid(
                "n_total_pulses",
                format!("needs an even number (>= 2) of blocks, got {blocks}"),
            ));
        }
        if let DriftModel::RandomWalk { step_per_pulse } = self.drift {
            if !(step_per_pulse >= 0.0 && step_per_pulse.is_finite()) {
                return Err(invalid("drift step", "must be finite and >= 0"));
            }
        }
        Ok(())
    }

    pub fn n_blocks(&self) -> u64 {
        self.n_total_pulses / self.block_pulses
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        AcquisitionConfig {
            seed,
            ..self.clone()
        }
    }

    pub fn with_drift(&self, drift: DriftModel) -> Self {
        AcquisitionConfig {
            drift,
            ..self.clone()
        }
    }

    pub fn with_schedule(&self, schedule: Schedule) -> Self {
        AcquisitionConfig {
            schedule,
            ..self.clone()
        }
    }
}
