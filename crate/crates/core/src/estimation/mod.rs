//! Monte Carlo simulation of homodyne parameter estimation with a drifting
//! shot-noise reference.

mod config;
mod drift;
mod experiments;
mod sampler;
mod session;

pub use config::{AcquisitionConfig, DriftModel, Schedule, DEFAULT_DRIFT_STEP};
pub use drift::{block_levels, block_moments, consecutive_window_variance};
pub use experiments::{
    drift_curve, estimator_spread, power_law_fit, run_schedule_experiment, DriftPoint, EstimatorSpread,
    ScheduleOutcome, MIN_SEEDS,
};
pub use sampler::{sampler_registry, BlockSampler, PerPulse, SignalSums, Sufficient};
pub use session::{
    block_kind, derive_seed, estimate_t_xi, simulate_homodyne_session, BlockKind, BlockRecord,
    EstimationResult, EstimatorCalibration, Session,
};
