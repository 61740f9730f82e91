//! Excess noise induced on the quantum channel by co-propagating and
//! counter-propagating classical traffic.

mod budget;
mod channel;
mod raman;
mod sources;

pub use budget::{
    scenario_key_rate, total_noise_budget, total_noise_budget_with, total_xi_at_alice, BudgetEntry,
    CoexistenceScenario, NoiseBudget,
};
pub use channel::{Direction, Modulation, MuxSpec, WdmChannel};
pub use raman::{
    excess_to_input_referred, fit_raman_coefficient, matched_noise_to_excess, raman_geometry,
    raman_matched_photons, read_measurements, RamanEntry, RamanMeasurement, RamanProfile, MAX_BETA,
};
pub use sources::{
    ase_noise, fwm_noise, fwm_noise_all, leakage_noise, noise_source_registry, sideband_noise,
    xpm_noise, xpm_phase, Amplifier, NoiseCalibration, NoiseContext, NoiseSource, SourceTerm,
    XpmOverlap, GAWBS_RATIONALE, RAYLEIGH_RATIONALE, SBS_RATIONALE,
};
