//! Aggregation of every noise source for a coexistence scenario.

use serde::{Deserialize, Serialize};

use super::channel::{MuxSpec, WdmChannel};
use super::raman::RamanProfile;
use super::sources::{noise_source_registry, Amplifier, NoiseCalibration, NoiseContext, NoiseSource};
use crate::error::{invalid, Error, Result};
use crate::keyrate::{secret_key_rate, CvqkdSystem, KeyRateResult};
use crate::registry::Registry;
use crate::units::{Conversion, FiberLink, Reference, ShotNoiseUnits};

/// A CV-QKD link sharing fiber with classical channels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoexistenceScenario {
    pub system: CvqkdSystem,
    pub link: FiberLink,
    pub channels: Vec<WdmChannel>,
    pub mux: MuxSpec,
    pub profile: RamanProfile,
    pub calibration: NoiseCalibration,
    pub amplifier: Option<Amplifier>,
    /// Registered noise sources to include; `None` means all of them.
    pub sources: Option<Vec<String>>,
}

impl CoexistenceScenario {
    pub fn new(system: CvqkdSystem, link: FiberLink, profile: RamanProfile) -> Self {
        CoexistenceScenario {
            system,
            link,
            channels: Vec::new(),
            mux: MuxSpec::default(),
            profile,
            calibration: NoiseCalibration::default(),
            amplifier: None,
            sources: None,
        }
    }

    /// Checks the scenario and returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        self.system.validate()?;
        self.link.validate()?;
        self.mux.validate()?;
        self.calibration.validate()?;
        if !(self.link.length_km > 0.0) {
            return Err(invalid("link length", "must be > 0 km"));
        }
        let q = self.system.quantum_channel;
        let mut warnings = Vec::new();
        for (i, ch) in self.channels.iter().enumerate() {
            if ch.itu.index == q.index {
                return Err(invalid(
                    "channels",
                    format!("channel {i} occupies the quantum channel (ITU {})", q.index),
                ));
            }
            if ch.launch_power.0.is_nan() || ch.launch_power.0 == f64::INFINITY {
                return Err(invalid("channels", format!("channel {i} has launch power {}", ch.launch_power.0)));
            }
            if ch.itu.wavelength_nm <= q.wavelength_nm {
                warnings.push(format!(
                    "classical channel ITU {} ({:.2} nm) is below the quantum wavelength {:.2} nm; Stokes scattering is not modelled",
                    ch.itu.index, ch.itu.wavelength_nm, q.wavelength_nm
                ));
            }
        }
        Ok(warnings)
    }

    /// Transmittance of Bob's drop side (multiplexer plus add/drop module).
    pub fn eta_d(&self) -> f64 {
        self.mux.side_transmission()
    }

    /// End-to-end channel transmission: fiber and both multiplexing sides.
    pub fn channel_transmission(&self) -> f64 {
        let side = self.mux.side_transmission();
        self.link.transmission() * side * side
    }

    /// Conversion between Bob's input (after the drop filter) and the channel input.
    pub fn conversion(&self) -> Conversion {
        let side = self.mux.side_transmission();
        Conversion {
            eta_d: side,
            transmission: self.link.transmission() * side,
        }
    }

    pub fn with_channels(&self, channels: Vec<WdmChannel>) -> Self {
        CoexistenceScenario {
            channels,
            ..self.clone()
        }
    }

    pub fn with_length(&self, length_km: f64) -> Self {
        let mut s = self.clone();
        s.link.length_km = length_km;
        s
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BudgetEntry {
    pub source: String,
    pub value: ShotNoiseUnits,
    pub note: String,
}

/// Per-source excess noise, all expressed at one reference point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseBudget {
    pub reference: Reference,
    pub entries: Vec<BudgetEntry>,
    pub total: ShotNoiseUnits,
    pub conversion: Conversion,
    pub warnings: Vec<String>,
}

impl NoiseBudget {
    pub fn get(&self, source: &str) -> Option<f64> {
        self.entries.iter().find(|e| e.source == source).map(|e| e.value.value)
    }

    /// Budget re-expressed at `target` with the budget's own conversion.
    pub fn to_reference(&self, target: Reference) -> Result<NoiseBudget> {
        let entries = self
            .entries
            .iter()
            .map(|e| {
                Ok(BudgetEntry {
                    value: e.value.to_reference(target, Some(self.conversion))?,
                    ..e.clone()
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let total = ShotNoiseUnits {
            value: entries.iter().map(|e| e.value.value).sum(),
            reference: target,
        };
        Ok(NoiseBudget {
            reference: target,
            entries,
            total,
            conversion: self.conversion,
            warnings: self.warnings.clone(),
        })
    }
}

/// Budget from the built-in source registry.
pub fn total_noise_budget(scenario: &CoexistenceScenario, reference: Reference) -> Result<NoiseBudget> {
    total_noise_budget_with(scenario, &noise_source_registry(), reference)
}

/// Budget from the sources of `registry` selected by the scenario.
pub fn total_noise_budget_with(
    scenario: &CoexistenceScenario,
    registry: &Registry<dyn NoiseSource>,
    reference: Reference,
) -> Result<NoiseBudget> {
    let warnings = scenario.validate()?;
    let sources: Vec<Box<dyn NoiseSource>> = match &scenario.sources {
        None => registry.create_all(),
        Some(names) => names
            .iter()
            .map(|n| registry.create(n))
            .collect::<Result<Vec<_>>>()?,
    };
    let ctx = NoiseContext {
        system: &scenario.system,
        link: &scenario.link,
        channels: &scenario.channels,
        mux: &scenario.mux,
        profile: &scenario.profile,
        calibration: &scenario.calibration,
        amplifier: scenario.amplifier.as_ref(),
        eta_d: scenario.eta_d(),
    };
    let conversion = scenario.conversion();
    let mut entries = Vec::with_capacity(sources.len());
    for src in &sources {
        let term = src.evaluate(&ctx)?;
        if !(term.value.value >= 0.0) {
            return Err(Error::NonFinite {
                what: "noise contribution",
                value: term.value.value,
            });
        }
        entries.push(BudgetEntry {
            source: src.name().to_string(),
            value: term.value.to_reference(reference, Some(conversion))?,
            note: term.note,
        });
    }
    let total = ShotNoiseUnits {
        value: entries.iter().map(|e| e.value.value).sum(),
        reference,
    };
    Ok(NoiseBudget {
        reference,
        entries,
        total,
        conversion,
        warnings,
    })
}

/// Input-referred total excess noise of the scenario.
pub fn total_xi_at_alice(scenario: &CoexistenceScenario) -> Result<f64> {
    Ok(total_noise_budget(scenario, Reference::AtAlice)?.total.value)
}

/// Asymptotic key rate of the scenario with its full noise budget.
pub fn scenario_key_rate(scenario: &CoexistenceScenario) -> Result<(NoiseBudget, KeyRateResult)> {
    let budget = total_noise_budget(scenario, Reference::AtAlice)?;
    let rate = secret_key_rate(&scenario.system, scenario.channel_transmission(), budget.total)?;
    Ok((budget, rate))
}
