//! Wavelength allocation and single-channel power/distance envelopes.

mod envelope;
mod greedy;

pub use envelope::{dark_reach, max_tolerable_power, reachable_distance, PowerLimit, ReachResult, DEFAULT_PROBE_INDEX};
pub use greedy::{
    allocate, allocate_with, objective_registry, AllocationMode, AllocationObjective, AllocationRequest,
    AllocationResult, MaxNoise, MinNoise, PlacedChannel, Placement, TIE_TOLERANCE,
};
