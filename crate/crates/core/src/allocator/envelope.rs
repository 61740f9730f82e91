//! Power and distance limits for a single classical channel.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::keyrate::{null_key_threshold, secret_key_rate};
use crate::noise::{total_xi_at_alice, CoexistenceScenario, Direction, WdmChannel};
use crate::solve::bisect;
use crate::units::{PowerDbm, PowerMw, ShotNoiseUnits};

/// Grid slot used to probe a single classical channel unless told otherwise.
pub const DEFAULT_PROBE_INDEX: i32 = 34;

const MAX_PROBE_MW: f64 = 1e6;
const MAX_REACH_KM: f64 = 2000.0;
const MIN_REACH_KM: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerLimit {
    pub distance_km: f64,
    pub direction: Direction,
    pub power: PowerMw,
    pub power_dbm: PowerDbm,
    pub threshold: ShotNoiseUnits,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReachResult {
    pub distance_km: f64,
    /// False when no positive key exists even at the shortest length probed.
    pub reachable: bool,
}

fn probe(base: &CoexistenceScenario, index: i32, direction: Direction, p_mw: f64) -> Result<CoexistenceScenario> {
    let dbm = if p_mw > 0.0 { PowerDbm(10.0 * p_mw.log10()) } else { PowerDbm(f64::NEG_INFINITY) };
    let mut channels = base.channels.clone();
    channels.push(WdmChannel::new(index, direction, dbm)?);
    Ok(base.with_channels(channels))
}

/// Launch power of one extra channel at which the key rate at `distance_km` drops to zero.
pub fn max_tolerable_power(
    distance_km: f64,
    direction: Direction,
    base: &CoexistenceScenario,
    probe_index: i32,
) -> Result<PowerLimit> {
    let scenario = base.with_length(distance_km);
    scenario.validate()?;
    let threshold = null_key_threshold(&scenario.system, scenario.channel_transmission())?;
    let excess = |p: f64| -> Result<f64> {
        Ok(total_xi_at_alice(&probe(&scenario, probe_index, direction, p)?)? - threshold.value)
    };
    let dark = excess(0.0)?;
    if dark >= 0.0 {
        return Err(Error::Infeasible(format!(
            "noise without the probe channel already reaches the threshold at {distance_km} km"
        )));
    }
    let mut hi = 1.0;
    while excess(hi)? < 0.0 {
        hi *= 2.0;
        if hi > MAX_PROBE_MW {
            return Err(Error::Infeasible(format!("no power up to {MAX_PROBE_MW} mW closes the key")));
        }
    }
    let mut failure = None;
    let root = bisect(
        |p| {
            excess(p).unwrap_or_else(|e| {
                failure.get_or_insert(e);
                f64::NAN
            })
        },
        0.0,
        hi,
        hi * 1e-13,
        0.0,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let p = root.ok_or_else(|| Error::Infeasible("power bisection failed".into()))?;
    let power = PowerMw::new(p)?;
    Ok(PowerLimit {
        distance_km,
        direction,
        power,
        power_dbm: power.to_dbm(),
        threshold,
    })
}

fn key_at(base: &CoexistenceScenario, km: f64) -> Result<f64> {
    let s = base.with_length(km);
    let xi = total_xi_at_alice(&s)?;
    Ok(secret_key_rate(&s.system, s.channel_transmission(), ShotNoiseUnits::at_alice(xi))?.key_bits_per_pulse)
}

fn zero_crossing(base: &CoexistenceScenario, lo: f64, hi: f64) -> Result<f64> {
    let mut failure = None;
    let root = bisect(
        |km| {
            key_at(base, km).unwrap_or_else(|e| {
                failure.get_or_insert(e);
                f64::NAN
            })
        },
        lo,
        hi,
        1e-9,
        0.0,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    root.ok_or_else(|| Error::Infeasible("distance bisection failed".into()))
}

/// Length at which the key rate vanishes with only the system's own noise.
pub fn dark_reach(base: &CoexistenceScenario) -> Result<f64> {
    let dark = base.with_channels(Vec::new());
    if key_at(&dark, MIN_REACH_KM)? <= 0.0 {
        return Ok(0.0);
    }
    let mut hi = 50.0;
    while key_at(&dark, hi)? > 0.0 {
        hi *= 2.0;
        if hi > MAX_REACH_KM {
            return Err(Error::Infeasible(format!("key rate stays positive beyond {MAX_REACH_KM} km")));
        }
    }
    zero_crossing(&dark, MIN_REACH_KM, hi)
}

/// Longest fiber over which a key survives one extra channel at `power` on the probe slot.
pub fn reachable_distance(
    power: PowerDbm,
    direction: Direction,
    base: &CoexistenceScenario,
    probe_index: i32,
) -> Result<ReachResult> {
    if power.0.is_nan() || power.0 == f64::INFINITY {
        return Err(invalid("power", format!("{} dBm", power.0)));
    }
    let mut channels = base.channels.clone();
    channels.push(WdmChannel::new(probe_index, direction, power)?);
    let loaded = base.with_channels(channels);
    loaded.with_length(MIN_REACH_KM).validate()?;
    let l_dark = dark_reach(base)?;
    if l_dark <= MIN_REACH_KM || key_at(&loaded, MIN_REACH_KM)? <= 0.0 {
        return Ok(ReachResult {
            distance_km: 0.0,
            reachable: false,
        });
    }
    // a silent probe leaves the dark limit unchanged
    let distance_km = if key_at(&loaded, l_dark)? >= 0.0 {
        l_dark
    } else {
        zero_crossing(&loaded, MIN_REACH_KM, l_dark)?
    };
    Ok(ReachResult {
        distance_km,
        reachable: true,
    })
}
