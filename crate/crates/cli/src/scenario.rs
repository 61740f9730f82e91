//! Scenario files: strict TOML with every default spelled out by `cvqkd-coexist defaults`.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use cvqkd_coexist::allocator::{AllocationMode, AllocationRequest, Placement, DEFAULT_PROBE_INDEX};
use cvqkd_coexist::estimation::{AcquisitionConfig, DriftModel, Schedule};
use cvqkd_coexist::keyrate::{CvqkdSystem, DEFAULT_QUANTUM_INDEX};
use cvqkd_coexist::noise::{
    Amplifier, CoexistenceScenario, Direction, Modulation, MuxSpec, NoiseCalibration, RamanProfile, WdmChannel,
};
use cvqkd_coexist::units::{itu_channel, FiberLink, PowerDbm, ShotNoiseUnits};
use serde::{Deserialize, Serialize};

use crate::Validation;

/// Environment variable naming a TOML file that replaces the built-in defaults.
pub const DEFAULTS_ENV: &str = "QKD_COEXIST_DEFAULTS";

/// Beta used when no profile file is given, per km·nm.
pub const DEFAULT_FLAT_BETA: f64 = 3e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SystemSection {
    pub v_a: f64,
    pub clock_hz: f64,
    pub lo_photons: f64,
    pub pulse_ns: f64,
    pub eta_b: f64,
    pub v_el: f64,
    pub beta_rec: f64,
    /// Input-referred system excess noise.
    pub xi_system_n0: f64,
    pub quantum_index: i32,
    pub key_fraction: f64,
}

impl Default for SystemSection {
    fn default() -> Self {
        let s = CvqkdSystem::default();
        SystemSection {
            v_a: s.v_a,
            clock_hz: s.clock_hz,
            lo_photons: s.lo_photons,
            pulse_ns: s.pulse_ns,
            eta_b: s.eta_b,
            v_el: s.v_el,
            beta_rec: s.beta_rec,
            xi_system_n0: s.xi_system.value,
            quantum_index: DEFAULT_QUANTUM_INDEX,
            key_fraction: s.key_fraction,
        }
    }
}

impl SystemSection {
    pub fn build(&self) -> Result<CvqkdSystem> {
        let sys = CvqkdSystem {
            v_a: self.v_a,
            clock_hz: self.clock_hz,
            lo_photons: self.lo_photons,
            pulse_ns: self.pulse_ns,
            eta_b: self.eta_b,
            v_el: self.v_el,
            beta_rec: self.beta_rec,
            xi_system: ShotNoiseUnits::at_alice(self.xi_system_n0),
            quantum_channel: itu_channel(self.quantum_index).context("system.quantum_index")?,
            key_fraction: self.key_fraction,
        };
        sys.validate().context("system")?;
        Ok(sys)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelSpec {
    pub index: i32,
    pub direction: Direction,
    pub power_dbm: f64,
    #[serde(default)]
    pub modulation: Modulation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    /// Launch power of every scenario channel, mW.
    Power,
    /// Fiber length, km.
    Distance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub axis: SweepAxis,
    pub start: f64,
    pub stop: f64,
    #[serde(default = "default_points")]
    pub points: usize,
    /// Direction of the single probe channel used for the null-key power column.
    #[serde(default = "default_direction")]
    pub direction: Direction,
    #[serde(default = "default_probe")]
    pub probe_index: i32,
}

fn default_points() -> usize {
    21
}

fn default_direction() -> Direction {
    Direction::Forward
}

fn default_probe() -> i32 {
    DEFAULT_PROBE_INDEX
}

impl SweepSection {
    pub fn grid(&self) -> Result<Vec<f64>> {
        if !(self.start.is_finite() && self.stop.is_finite()) {
            return Err(Validation("sweep range must be finite".into()).into());
        }
        if self.start == self.stop || self.points < 2 {
            return Err(Validation(format!(
                "empty sweep range: {}..{} with {} points",
                self.start, self.stop, self.points
            ))
            .into());
        }
        let step = (self.stop - self.start) / (self.points - 1) as f64;
        Ok((0..self.points).map(|i| self.start + step * i as f64).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AllocationSection {
    pub forward_dbm: f64,
    pub backward_dbm: f64,
    pub objective: String,
    /// Place exactly this many steps; unset means as many as keep the key positive.
    pub pairs: Option<usize>,
    pub placement: Placement,
    /// Grid indices to choose from; unset means the whole C band minus the quantum slot.
    pub candidates: Option<Vec<i32>>,
}

impl Default for AllocationSection {
    fn default() -> Self {
        AllocationSection {
            forward_dbm: 0.0,
            backward_dbm: 0.0,
            objective: "min_noise".into(),
            pairs: None,
            placement: Placement::Pairs,
            candidates: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationSection {
    pub n_total_pulses: u64,
    pub block_pulses: u64,
    pub schedule: Schedule,
    pub drift: DriftModel,
    pub sampler: String,
    /// Independent sessions, each with a seed derived from the scenario seed.
    pub runs: u64,
}

impl Default for SimulationSection {
    fn default() -> Self {
        let a = AcquisitionConfig::default();
        SimulationSection {
            n_total_pulses: a.n_total_pulses,
            block_pulses: a.block_pulses,
            schedule: a.schedule,
            drift: a.drift,
            sampler: a.sampler,
            runs: 1,
        }
    }
}

impl SimulationSection {
    pub fn acquisition(&self, seed: u64) -> AcquisitionConfig {
        AcquisitionConfig {
            n_total_pulses: self.n_total_pulses,
            block_pulses: self.block_pulses,
            schedule: self.schedule,
            drift: self.drift,
            seed,
            sampler: self.sampler.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioFile {
    pub seed: u64,
    /// CSV `pump_nm,quantum_nm,beta_per_km_nm`, relative to the scenario file.
    pub raman_profile: Option<String>,
    /// Noise sources to include; unset means all registered sources.
    pub sources: Option<Vec<String>>,
    pub system: SystemSection,
    pub link: FiberLink,
    pub mux: MuxSpec,
    pub calibration: NoiseCalibration,
    pub amplifier: Option<Amplifier>,
    pub channels: Vec<ChannelSpec>,
    pub sweep: Option<SweepSection>,
    pub allocation: AllocationSection,
    pub simulation: SimulationSection,
}

impl Default for ScenarioFile {
    fn default() -> Self {
        ScenarioFile {
            seed: 0,
            raman_profile: None,
            sources: None,
            system: SystemSection::default(),
            link: FiberLink::default(),
            mux: MuxSpec::default(),
            calibration: NoiseCalibration::default(),
            amplifier: None,
            channels: Vec::new(),
            sweep: None,
            allocation: AllocationSection::default(),
            simulation: SimulationSection::default(),
        }
    }
}

/// A parsed scenario with the directory its relative paths refer to.
#[derive(Debug, Clone)]
pub struct Loaded {
    pub file: ScenarioFile,
    pub base_dir: PathBuf,
}

fn read_table(path: &Path) -> Result<toml::Table> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    // parse strictly first so errors carry line and key context
    toml::from_str::<ScenarioFile>(&text)
        .map_err(|e| Validation(format!("{}: {e}", path.display())))?;
    Ok(toml::from_str::<toml::Table>(&text).map_err(|e| Validation(format!("{}: {e}", path.display())))?)
}

fn merge(into: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (into.get_mut(&k), v) {
            (Some(toml::Value::Table(a)), toml::Value::Table(b)) => merge(a, b),
            (_, v) => {
                into.insert(k, v);
            }
        }
    }
}

/// Built-in defaults, overlaid by the defaults file (if any), overlaid by the scenario.
pub fn load(path: Option<&Path>) -> Result<Loaded> {
    let mut table = match toml::Value::try_from(ScenarioFile::default()).context("serialising defaults")? {
        toml::Value::Table(t) => t,
        _ => unreachable!("a struct serialises to a table"),
    };
    if let Some(defaults) = std::env::var_os(DEFAULTS_ENV) {
        let p = PathBuf::from(defaults);
        merge(&mut table, read_table(&p).with_context(|| format!("{DEFAULTS_ENV} file"))?);
    }
    let base_dir = match path {
        Some(p) => {
            merge(&mut table, read_table(p)?);
            p.parent().map(Path::to_path_buf).unwrap_or_default()
        }
        None => PathBuf::from("."),
    };
    let file: ScenarioFile = toml::Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| Validation(e.to_string()))?;
    Ok(Loaded { file, base_dir })
}

impl Loaded {
    pub fn profile_path(&self) -> Option<PathBuf> {
        self.file.raman_profile.as_ref().map(|p| self.base_dir.join(p))
    }

    pub fn scenario(&self) -> Result<CoexistenceScenario> {
        let f = &self.file;
        let system = f.system.build()?;
        let profile = match self.profile_path() {
            Some(p) => RamanProfile::from_csv_path(&p).with_context(|| format!("raman_profile {}", p.display()))?,
            None => RamanProfile::flat(DEFAULT_FLAT_BETA, system.quantum_channel.wavelength_nm)?,
        };
        let channels = f
            .channels
            .iter()
            .enumerate()
            .map(|(i, c)| {
                WdmChannel::new(c.index, c.direction, PowerDbm(c.power_dbm))
                    .map(|w| w.with_modulation(c.modulation))
                    .with_context(|| format!("channels[{i}]"))
            })
            .collect::<Result<Vec<_>>>()?;
        let scenario = CoexistenceScenario {
            system,
            link: f.link,
            channels,
            mux: f.mux,
            profile,
            calibration: f.calibration,
            amplifier: f.amplifier,
            sources: f.sources.clone(),
        };
        scenario.validate()?;
        Ok(scenario)
    }

    pub fn allocation_request(&self) -> Result<AllocationRequest> {
        let a = &self.file.allocation;
        let mut req = AllocationRequest::new(self.scenario()?, PowerDbm(a.forward_dbm), PowerDbm(a.backward_dbm));
        req.objective = a.objective.clone();
        req.placement = a.placement;
        req.mode = match a.pairs {
            Some(k) => AllocationMode::FixedPairs(k),
            None => AllocationMode::MaxPairs,
        };
        if let Some(c) = &a.candidates {
            req.candidate_indices = c.clone();
        }
        Ok(req)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let text = toml::to_string(&ScenarioFile::default()).unwrap();
        let back: ScenarioFile = toml::from_str(&text).unwrap();
        assert_eq!(back, ScenarioFile::default());
    }

    #[test]
    fn unknown_keys_rejected_with_context() {
        let err = toml::from_str::<ScenarioFile>("[link]\nlenght_km = 3\n").unwrap_err().to_string();
        assert!(err.contains("lenght_km"), "{err}");
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn nested_merge_keeps_untouched_keys() {
        let mut a: toml::Table = toml::from_str("[link]\nlength_km = 1.0\nalpha_db_per_km = 0.2\n").unwrap();
        merge(&mut a, toml::from_str("[link]\nlength_km = 50.0\n").unwrap());
        let link = a["link"].as_table().unwrap();
        assert_eq!(link["length_km"].as_float(), Some(50.0));
        assert_eq!(link["alpha_db_per_km"].as_float(), Some(0.2));
    }

    #[test]
    fn sweep_grid_rejects_empty_range() {
        let mut s = SweepSection {
            axis: SweepAxis::Power,
            start: 0.0,
            stop: 8.0,
            points: 5,
            direction: Direction::Forward,
            probe_index: 34,
        };
        assert_eq!(s.grid().unwrap(), vec![0.0, 2.0, 4.0, 6.0, 8.0]);
        s.stop = 0.0;
        assert!(s.grid().is_err());
        s.stop = 1.0;
        s.points = 1;
        assert!(s.grid().is_err());
    }
}
