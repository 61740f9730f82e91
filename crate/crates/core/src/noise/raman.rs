//! Spontaneous anti-Stokes Raman scattering and the photon-to-noise conversions.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::channel::{Direction, WdmChannel};
use crate::error::{finite, invalid, Error, Result};
use crate::units::{
    c_band_channels, FiberLink, Reference, ShotNoiseUnits, PLANCK, SPEED_OF_LIGHT,
};

/// Upper bound accepted for a Raman coefficient, per km per nm.
pub const MAX_BETA: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamanEntry {
    pub pump_nm: f64,
    pub quantum_nm: f64,
    pub beta_per_km_nm: f64,
}

/// Raman coefficient as a function of pump wavelength, for one or more
/// quantum wavelengths. Lookups interpolate linearly over pump wavelength and
/// hold the end values outside the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RamanProfile {
    entries: Vec<RamanEntry>,
}

impl RamanProfile {
    pub fn new(mut entries: Vec<RamanEntry>) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Profile("no entries".into()));
        }
        for e in &entries {
            if !(e.pump_nm.is_finite() && e.quantum_nm.is_finite() && e.pump_nm > 0.0) {
                return Err(Error::Profile(format!("bad wavelengths in {e:?}")));
            }
            if !(0.0..=MAX_BETA).contains(&e.beta_per_km_nm) {
                return Err(Error::Profile(format!(
                    "beta {} outside [0, {MAX_BETA}] per km·nm",
                    e.beta_per_km_nm
                )));
            }
        }
        entries.sort_by(|a, b| {
            a.quantum_nm
                .total_cmp(&b.quantum_nm)
                .then(a.pump_nm.total_cmp(&b.pump_nm))
        });
        Ok(RamanProfile { entries })
    }

    /// The same coefficient for every C-band pump.
    pub fn flat(beta: f64, quantum_nm: f64) -> Result<Self> {
        RamanProfile::new(
            c_band_channels()
                .into_iter()
                .map(|ch| RamanEntry {
                    pump_nm: ch.wavelength_nm,
                    quantum_nm,
                    beta_per_km_nm: beta,
                })
                .collect(),
        )
    }

    pub fn entries(&self) -> &[RamanEntry] {
        &self.entries
    }

    /// Coefficient for `pump_nm`, taken from the rows whose quantum wavelength is closest to `quantum_nm`.
    pub fn beta(&self, pump_nm: f64, quantum_nm: f64) -> f64 {
        let nearest = self
            .entries
            .iter()
            .map(|e| (e.quantum_nm - quantum_nm).abs())
            .fold(f64::INFINITY, f64::min);
        let rows: Vec<&RamanEntry> = self
            .entries
            .iter()
            .filter(|e| ((e.quantum_nm - quantum_nm).abs() - nearest).abs() < 1e-6)
            .collect();
        let first = rows[0];
        let last = rows[rows.len() - 1];
        if pump_nm <= first.pump_nm {
            return first.beta_per_km_nm;
        }
        if pump_nm >= last.pump_nm {
            return last.beta_per_km_nm;
        }
        for w in rows.windows(2) {
            let (a, b) = (w[0], w[1]);
            if pump_nm <= b.pump_nm {
                if b.pump_nm == a.pump_nm {
                    return b.beta_per_km_nm;
                }
                let f = (pump_nm - a.pump_nm) / (b.pump_nm - a.pump_nm);
                return a.beta_per_km_nm + f * (b.beta_per_km_nm - a.beta_per_km_nm);
            }
        }
        last.beta_per_km_nm
    }

    pub fn from_csv_reader<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
        let mut entries = Vec::new();
        for (line, row) in rdr.deserialize::<RamanEntry>().enumerate() {
            let e = row.map_err(|e| Error::Profile(format!("row {}: {e}", line + 2)))?;
            entries.push(e);
        }
        RamanProfile::new(entries)
    }

    pub fn from_csv_path(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path)
            .map_err(|e| Error::Profile(format!("{}: {e}", path.display())))?;
        RamanProfile::from_csv_reader(file)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        for e in &self.entries {
            w.serialize(e).map_err(|e| Error::Profile(e.to_string()))?;
        }
        w.flush().map_err(|e| Error::Profile(e.to_string()))
    }
}

/// Fiber geometry factor of the scattered power, in km.
///
/// Forward: `L·e^{-αL}`. Backward: `(1 - e^{-2αL})/(2α)`.
pub fn raman_geometry(direction: Direction, alpha_lin_per_km: f64, length_km: f64) -> f64 {
    match direction {
        Direction::Forward => length_km * (-alpha_lin_per_km * length_km).exp(),
        Direction::Backward => {
            let x = 2.0 * alpha_lin_per_km * length_km;
            if x < 1e-8 {
                length_km
            } else {
                -(-x).exp_m1() / (2.0 * alpha_lin_per_km)
            }
        }
    }
}

/// Photons per mode per (W · km · [1/(km·nm)]) before geometry: `½ λ³/(h c²) · 1e9`.
fn photon_prefactor(quantum_wavelength_nm: f64) -> f64 {
    let lambda = quantum_wavelength_nm * 1e-9;
    0.5 * lambda.powi(3) / (PLANCK * SPEED_OF_LIGHT * SPEED_OF_LIGHT) * 1e9
}

/// Mean matched Raman photons per mode at Bob's input, behind a drop filter of transmittance `eta_d`.
pub fn raman_matched_photons(
    channel: &WdmChannel,
    link: &FiberLink,
    profile: &RamanProfile,
    eta_d: f64,
    quantum_wavelength_nm: f64,
) -> Result<f64> {
    if !(eta_d > 0.0 && eta_d <= 1.0) {
        return Err(invalid("eta_d", format!("{eta_d} not in (0, 1]")));
    }
    if !(link.length_km > 0.0) {
        return Err(invalid("link length", "must be > 0 km"));
    }
    let p_w = channel.power_mw()?.watts();
    let beta = profile.beta(channel.itu.wavelength_nm, quantum_wavelength_nm);
    let geom = raman_geometry(channel.direction, link.alpha_lin_per_km(), link.length_km);
    Ok(photon_prefactor(quantum_wavelength_nm) * beta * eta_d * p_w * geom)
}

/// Output-referred excess noise of chaotic matched photons, `2·η_B·n`.
pub fn matched_noise_to_excess(n_matched: f64, eta_b: f64) -> Result<ShotNoiseUnits> {
    finite("matched photons", n_matched)?;
    if n_matched < 0.0 {
        return Err(invalid("matched photons", "must be >= 0"));
    }
    if !(eta_b > 0.0 && eta_b <= 1.0) {
        return Err(invalid("eta_b", format!("{eta_b} not in (0, 1]")));
    }
    Ok(ShotNoiseUnits::at_bob(2.0 * eta_b * n_matched))
}

/// Refers an output excess noise to the channel input: `ξ_in = ξ_out/(η_D·T)`.
pub fn excess_to_input_referred(xi_out: ShotNoiseUnits, eta_d: f64, t: f64) -> Result<ShotNoiseUnits> {
    if xi_out.reference != Reference::AtBob {
        return Err(invalid("xi_out", "expected an output-referred value"));
    }
    if !(t > 0.0 && t <= 1.0) {
        return Err(invalid("transmission", format!("{t} not in (0, 1]")));
    }
    if !(eta_d > 0.0 && eta_d <= 1.0) {
        return Err(invalid("eta_d", format!("{eta_d} not in (0, 1]")));
    }
    Ok(ShotNoiseUnits::at_alice(xi_out.value / (eta_d * t)))
}

/// One optical power measurement of Raman light in the quantum band.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RamanMeasurement {
    pub pump_nm: f64,
    pub quantum_nm: f64,
    pub length_km: f64,
    pub direction: Direction,
    pub power_in_mw: f64,
    pub scattered_power_mw: f64,
}

pub fn read_measurements<R: Read>(reader: R) -> Result<Vec<RamanMeasurement>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(reader);
    rdr.deserialize::<RamanMeasurement>()
        .enumerate()
        .map(|(i, row)| row.map_err(|e| Error::Profile(format!("row {}: {e}", i + 2))))
        .collect()
}

/// Least-squares Raman coefficient per (pump, quantum) wavelength pair.
///
/// The scattered power in a band of `band_nm` is `P_in · β · band · geometry`,
/// so each group is fitted through the origin: `β = Σ g·y / Σ g²`.
pub fn fit_raman_coefficient(
    measurements: &[RamanMeasurement],
    band_nm: f64,
    link: &FiberLink,
) -> Result<RamanProfile> {
    if !(band_nm > 0.0) {
        return Err(invalid("band", "must be > 0 nm"));
    }
    if measurements.is_empty() {
        return Err(Error::Profile("no measurements to fit".into()));
    }
    let alpha = link.alpha_lin_per_km();
    let mut groups: Vec<(f64, f64, f64, f64)> = Vec::new();
    for m in measurements {
        let g = m.power_in_mw * band_nm * raman_geometry(m.direction, alpha, m.length_km);
        if !(g > 0.0) || !m.scattered_power_mw.is_finite() {
            return Err(Error::Profile(format!(
                "zero geometry or power for measurement at {} nm, {} km",
                m.pump_nm, m.length_km
            )));
        }
        let key = (m.pump_nm, m.quantum_nm);
        match groups
            .iter_mut()
            .find(|(p, q, _, _)| (p - key.0).abs() < 1e-6 && (q - key.1).abs() < 1e-6)
        {
            Some(slot) => {
                slot.2 += g * m.scattered_power_mw;
                slot.3 += g * g;
            }
            None => groups.push((key.0, key.1, g * m.scattered_power_mw, g * g)),
        }
    }
    RamanProfile::new(
        groups
            .into_iter()
            .map(|(pump_nm, quantum_nm, gy, gg)| RamanEntry {
                pump_nm,
                quantum_nm,
                beta_per_km_nm: (gy / gg).max(0.0),
            })
            .collect(),
    )
}
