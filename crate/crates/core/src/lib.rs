//! Coexistence of Gaussian-modulated coherent-state CV-QKD with DWDM classical
//! channels: excess-noise budgets, key rates, parameter-estimation
//! simulation and channel allocation.

pub mod allocator;
pub mod error;
pub mod estimation;
pub mod keyrate;
pub mod noise;
pub mod registry;
pub mod solve;
pub mod units;

pub use error::{Error, Result};
