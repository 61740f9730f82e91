use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::units::{dbm_to_mw, itu_channel, ItuChannel, PowerDbm, PowerMw};

/// Propagation direction relative to the quantum signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn label(self) -> &'static str {
        match self {
            Direction::Forward => "fwd",
            Direction::Backward => "bwd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Modulation {
    Continuous,
    OnOffKeying { rate_gbps: f64 },
}

impl Default for Modulation {
    fn default() -> Self {
        Modulation::OnOffKeying { rate_gbps: 10.0 }
    }
}

/// A classical channel sharing the fiber.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WdmChannel {
    pub itu: ItuChannel,
    pub direction: Direction,
    pub launch_power: PowerDbm,
    pub modulation: Modulation,
}

impl WdmChannel {
    pub fn new(index: i32, direction: Direction, launch_power: PowerDbm) -> Result<Self> {
        Ok(WdmChannel {
            itu: itu_channel(index)?,
            direction,
            launch_power,
            modulation: Modulation::default(),
        })
    }

    pub fn with_modulation(mut self, modulation: Modulation) -> Self {
        self.modulation = modulation;
        self
    }

    /// Launch power in mW; `-inf` dBm maps to zero.
    pub fn power_mw(&self) -> Result<PowerMw> {
        if self.launch_power.0 == f64::NEG_INFINITY {
            return Ok(PowerMw::ZERO);
        }
        dbm_to_mw(self.launch_power)
    }
}

/// Multiplexer and add/drop module characteristics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MuxSpec {
    pub adjacent_isolation_db: f64,
    pub nonadjacent_isolation_db: f64,
    /// Per-side multiplexer loss, applied once at each end.
    pub insertion_loss_db: f64,
    /// Per-side add/drop module loss, applied once at each end.
    pub adm_insertion_loss_db: f64,
    pub channel_spacing_ghz: f64,
}

impl Default for MuxSpec {
    fn default() -> Self {
        MuxSpec {
            adjacent_isolation_db: -40.0,
            nonadjacent_isolation_db: -80.0,
            insertion_loss_db: 0.0,
            adm_insertion_loss_db: 0.5,
            channel_spacing_ghz: 100.0,
        }
    }
}

impl MuxSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.adjacent_isolation_db < 0.0 && self.nonadjacent_isolation_db < 0.0) {
            return Err(invalid("mux isolation", "must be negative dB"));
        }
        if !(self.insertion_loss_db >= 0.0 && self.adm_insertion_loss_db >= 0.0) {
            return Err(invalid("mux insertion loss", "must be >= 0 dB"));
        }
        if !(self.channel_spacing_ghz > 0.0) {
            return Err(invalid("channel spacing", "must be > 0 GHz"));
        }
        Ok(())
    }

    /// Transmission through one side (multiplexer plus add/drop module).
    pub fn side_transmission(&self) -> f64 {
        10f64.powf(-(self.insertion_loss_db + self.adm_insertion_loss_db) / 10.0)
    }

    /// Isolation in dB seen by the quantum channel from a channel `grid_distance` slots away.
    pub fn isolation_db(&self, grid_distance: u32) -> f64 {
        if grid_distance <= 1 {
            self.adjacent_isolation_db
        } else {
            self.nonadjacent_isolation_db
        }
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.channel_spacing_ghz * 1e9
    }
}
