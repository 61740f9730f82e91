//! Units, physical constants, the C-band ITU grid and elementary fiber math.

use serde::{Deserialize, Serialize};

use crate::error::{finite, invalid, Error, Result};

/// Speed of light expressed in nm·THz, so that `λ[nm] = C_NM_THZ / ν[THz]`.
pub const C_NM_THZ: f64 = 299_792.458;
/// Speed of light in m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Planck constant in J·s.
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Anchor of the 100 GHz grid used throughout (THz at index 0).
pub const GRID_ANCHOR_THZ: f64 = 190.0;
/// Grid spacing in THz.
pub const GRID_SPACING_THZ: f64 = 0.1;
/// Accepted wavelength window, nm.
pub const C_BAND_NM: (f64, f64) = (1528.0, 1568.0);
/// Lowest grid index whose wavelength falls inside [`C_BAND_NM`].
pub const C_BAND_MIN_INDEX: i32 = 12;
/// Highest grid index whose wavelength falls inside [`C_BAND_NM`].
pub const C_BAND_MAX_INDEX: i32 = 61;

/// Optical power in dBm.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PowerDbm(pub f64);

/// Optical power in mW. Never negative.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PowerMw(f64);

impl PowerMw {
    pub const ZERO: PowerMw = PowerMw(0.0);

    pub fn new(mw: f64) -> Result<Self> {
        finite("power (mW)", mw)?;
        if mw < 0.0 {
            return Err(invalid("power", format!("{mw} mW is negative")));
        }
        Ok(PowerMw(mw))
    }

    pub fn value(self) -> f64 {
        self.0
    }

    pub fn watts(self) -> f64 {
        self.0 * 1e-3
    }

    /// Converts to dBm; zero power maps to `-inf`.
    pub fn to_dbm(self) -> PowerDbm {
        PowerDbm(10.0 * self.0.log10())
    }
}

pub fn dbm_to_mw(p: PowerDbm) -> Result<PowerMw> {
    finite("power (dBm)", p.0)?;
    Ok(PowerMw(10f64.powf(p.0 / 10.0)))
}

pub fn mw_to_dbm(p: PowerMw) -> PowerDbm {
    p.to_dbm()
}

/// A channel of the 100 GHz C-band grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ItuChannel {
    pub index: i32,
    pub frequency_thz: f64,
    pub wavelength_nm: f64,
}

/// Grid frequency of `index` in THz, without any band check.
pub fn grid_frequency_thz(index: i32) -> f64 {
    GRID_ANCHOR_THZ + GRID_SPACING_THZ * f64::from(index)
}

pub fn itu_channel(index: i32) -> Result<ItuChannel> {
    let frequency_thz = grid_frequency_thz(index);
    let wavelength_nm = C_NM_THZ / frequency_thz;
    if !(C_BAND_NM.0..=C_BAND_NM.1).contains(&wavelength_nm) {
        return Err(Error::OutOfBand {
            index,
            min: C_BAND_MIN_INDEX,
            max: C_BAND_MAX_INDEX,
        });
    }
    Ok(ItuChannel {
        index,
        frequency_thz,
        wavelength_nm,
    })
}

impl ItuChannel {
    /// Photon energy in joules.
    pub fn photon_energy(&self) -> f64 {
        PLANCK * self.frequency_thz * 1e12
    }

    pub fn wavelength_m(&self) -> f64 {
        self.wavelength_nm * 1e-9
    }

    /// Number of grid slots between two channels.
    pub fn grid_distance(&self, other: &ItuChannel) -> u32 {
        self.index.abs_diff(other.index)
    }

    pub fn spectral_distance_thz(&self, other: &ItuChannel) -> f64 {
        (self.frequency_thz - other.frequency_thz).abs()
    }
}

/// Every accepted channel of the grid, ascending index.
pub fn c_band_channels() -> Vec<ItuChannel> {
    (C_BAND_MIN_INDEX..=C_BAND_MAX_INDEX)
        .map(|i| itu_channel(i).expect("grid bounds are consistent"))
        .collect()
}

/// Single-mode fiber span.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FiberLink {
    pub length_km: f64,
    pub alpha_db_per_km: f64,
    /// Nonlinear index, m²/mW.
    pub n2_m2_per_mw: f64,
    pub a_eff_um2: f64,
    /// Chromatic dispersion, ps/(nm·km); only used for four-wave-mixing phase matching.
    pub dispersion_ps_nm_km: f64,
}

impl Default for FiberLink {
    fn default() -> Self {
        FiberLink {
            length_km: 25.0,
            alpha_db_per_km: 0.2,
            n2_m2_per_mw: 3e-23,
            a_eff_um2: 83.0,
            dispersion_ps_nm_km: 17.0,
        }
    }
}

impl FiberLink {
    pub fn with_length(length_km: f64) -> Self {
        FiberLink {
            length_km,
            ..FiberLink::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        finite("link length", self.length_km)?;
        if self.length_km < 0.0 {
            return Err(invalid("link length", "must be >= 0 km"));
        }
        if !(self.alpha_db_per_km > 0.0 && self.alpha_db_per_km.is_finite()) {
            return Err(invalid("attenuation", "must be > 0 dB/km"));
        }
        if !(self.n2_m2_per_mw >= 0.0 && self.a_eff_um2 > 0.0) {
            return Err(invalid("nonlinear parameters", "n2 >= 0 and A_eff > 0 required"));
        }
        if !(self.dispersion_ps_nm_km.is_finite()) {
            return Err(invalid("dispersion", "must be finite"));
        }
        Ok(())
    }

    /// Linear attenuation coefficient in 1/km (`alpha_db · ln 10 / 10`).
    pub fn alpha_lin_per_km(&self) -> f64 {
        self.alpha_db_per_km * std::f64::consts::LN_10 / 10.0
    }

    /// Power transmission of the whole span.
    pub fn transmission(&self) -> f64 {
        10f64.powf(-self.alpha_db_per_km * self.length_km / 10.0)
    }

    pub fn effective_length_km(&self) -> f64 {
        effective_length_unchecked(self.alpha_lin_per_km(), self.length_km)
    }
}

/// Power transmission over `length_km` of the link, `10^(-alpha·L/10)`.
pub fn fiber_transmission(link: &FiberLink, length_km: f64) -> Result<f64> {
    finite("length", length_km)?;
    if length_km < 0.0 {
        return Err(invalid("length", format!("{length_km} km is negative")));
    }
    if length_km > link.length_km {
        return Err(invalid(
            "length",
            format!("{length_km} km exceeds the link length {} km", link.length_km),
        ));
    }
    Ok(10f64.powf(-link.alpha_db_per_km * length_km / 10.0))
}

/// Nonlinear effective length `(1 - e^{-αL})/α` in km.
pub fn effective_length(link: &FiberLink, length_km: f64) -> Result<f64> {
    finite("length", length_km)?;
    if length_km < 0.0 {
        return Err(invalid("length", format!("{length_km} km is negative")));
    }
    Ok(effective_length_unchecked(link.alpha_lin_per_km(), length_km))
}

pub(crate) fn effective_length_unchecked(alpha_lin: f64, length_km: f64) -> f64 {
    let x = alpha_lin * length_km;
    if x < 1e-8 {
        // series keeps the L -> 0 limit exact
        return length_km * (1.0 - x / 2.0);
    }
    -(-x).exp_m1() / alpha_lin
}

/// Where a quadrature noise variance is referred to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reference {
    /// Input-referred (channel input, Alice side).
    AtAlice,
    /// Output-referred, at the input of Bob's receiver with unit detection efficiency.
    AtBob,
}

impl Reference {
    pub fn label(self) -> &'static str {
        match self {
            Reference::AtAlice => "alice",
            Reference::AtBob => "bob",
        }
    }
}

/// Efficiencies linking the two reference points: `ξ_alice = ξ_bob / (eta_d · transmission)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Conversion {
    pub eta_d: f64,
    pub transmission: f64,
}

impl Conversion {
    pub fn validate(&self) -> Result<()> {
        if !(self.eta_d > 0.0 && self.eta_d <= 1.0) {
            return Err(invalid("eta_d", format!("{} not in (0, 1]", self.eta_d)));
        }
        if !(self.transmission > 0.0 && self.transmission <= 1.0) {
            return Err(invalid(
                "transmission",
                format!("{} not in (0, 1]", self.transmission),
            ));
        }
        Ok(())
    }

    pub fn efficiency(&self) -> f64 {
        self.eta_d * self.transmission
    }
}

/// A variance in shot-noise units together with its reference point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotNoiseUnits {
    pub value: f64,
    pub reference: Reference,
}

impl ShotNoiseUnits {
    pub fn at_alice(value: f64) -> Self {
        ShotNoiseUnits {
            value,
            reference: Reference::AtAlice,
        }
    }

    pub fn at_bob(value: f64) -> Self {
        ShotNoiseUnits {
            value,
            reference: Reference::AtBob,
        }
    }

    /// Re-expresses the value at `target`. Changing reference needs `conversion`.
    pub fn to_reference(self, target: Reference, conversion: Option<Conversion>) -> Result<Self> {
        if self.reference == target {
            return Ok(self);
        }
        let conv = conversion.ok_or(Error::ReferenceMismatch {
            from: self.reference.label(),
            to: target.label(),
        })?;
        conv.validate()?;
        let value = match target {
            Reference::AtAlice => self.value / conv.efficiency(),
            Reference::AtBob => self.value * conv.efficiency(),
        };
        Ok(ShotNoiseUnits {
            value,
            reference: target,
        })
    }
}
