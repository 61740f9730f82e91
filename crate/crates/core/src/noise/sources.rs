//! Individual excess-noise processes and the registry that holds them.
//!
//! Every source reports its contribution at its natural reference point:
//! photon-counting processes at Bob (after the drop filter, unit detection
//! efficiency), the calibrated system noise at Alice. The budget converts.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::channel::{Direction, Modulation, MuxSpec, WdmChannel};
use super::raman::{matched_noise_to_excess, raman_matched_photons, RamanProfile};
use crate::error::{invalid, Result};
use crate::keyrate::CvqkdSystem;
use crate::registry::Registry;
use crate::units::{FiberLink, ItuChannel, ShotNoiseUnits, SPEED_OF_LIGHT};

/// Erbium amplifier in front of Alice's multiplexer.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Amplifier {
    pub gain: f64,
    pub n_sp: f64,
}

impl Default for Amplifier {
    fn default() -> Self {
        Amplifier {
            gain: 100.0,
            n_sp: 1.5,
        }
    }
}

/// Phase-difference statistics between signal and LO slots under XPM.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum XpmOverlap {
    /// Phase takes 0 or φ_max with equal probability.
    WorstCase,
    /// Phase uniform on [0, φ_max].
    Uniform,
    None,
}

impl XpmOverlap {
    pub fn variance(self, phi_max: f64) -> f64 {
        match self {
            XpmOverlap::WorstCase => phi_max * phi_max / 4.0,
            XpmOverlap::Uniform => phi_max * phi_max / 12.0,
            XpmOverlap::None => 0.0,
        }
    }
}

/// Constants tying the secondary noise models to their single-point anchors.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoiseCalibration {
    /// Fraction of leaked unmatched photons that reaches the homodyne output.
    pub kappa_unmatched: f64,
    /// FWM product power for two 0 dBm pumps at the anchor spacing and length.
    pub fwm_anchor_dbm: f64,
    pub fwm_anchor_spacing_ghz: f64,
    pub fwm_anchor_length_km: f64,
    /// Laser side-mode suppression at the quantum wavelength.
    pub sideband_suppression_db: f64,
    /// Scale between `V_A·Var(φ)` and the output-referred excess noise.
    pub kappa_xpm: f64,
    pub xpm_overlap: XpmOverlap,
}

impl Default for NoiseCalibration {
    fn default() -> Self {
        NoiseCalibration {
            kappa_unmatched: 0.25,
            fwm_anchor_dbm: -81.0,
            fwm_anchor_spacing_ghz: 100.0,
            fwm_anchor_length_km: 25.0,
            sideband_suppression_db: -40.0,
            kappa_xpm: 7.85e-3,
            xpm_overlap: XpmOverlap::WorstCase,
        }
    }
}

impl NoiseCalibration {
    pub fn validate(&self) -> Result<()> {
        if !(self.kappa_unmatched >= 0.0 && self.kappa_xpm >= 0.0) {
            return Err(invalid("calibration", "kappa constants must be >= 0"));
        }
        if !(self.fwm_anchor_spacing_ghz > 0.0 && self.fwm_anchor_length_km > 0.0) {
            return Err(invalid("calibration", "FWM anchor spacing and length must be > 0"));
        }
        if !(self.sideband_suppression_db < 0.0) {
            return Err(invalid("sideband suppression", "must be negative dB"));
        }
        if self.fwm_anchor_dbm.is_nan() {
            return Err(invalid("calibration", "FWM anchor power is NaN"));
        }
        Ok(())
    }
}

fn db(x: f64) -> f64 {
    10f64.powf(x / 10.0)
}

/// Photons per mode of a spectrally flat power `p_w` spread over `bandwidth_hz`, one polarization.
fn photons_per_mode(p_w: f64, quantum: &ItuChannel, bandwidth_hz: f64) -> f64 {
    0.5 * p_w / (quantum.photon_energy() * bandwidth_hz)
}

/// Unmatched photons from classical channels leaking through the quantum channel's drop port.
///
/// Photons per LO slot: `P·T·10^(iso/10)·τ_LO/(hν)`; excess noise
/// `2·n_slot/n_LO·κ_unmatched`. Only forward channels reach Bob's receiver.
pub fn leakage_noise(
    channels: &[WdmChannel],
    mux: &MuxSpec,
    system: &CvqkdSystem,
    link: &FiberLink,
    calibration: &NoiseCalibration,
) -> Result<ShotNoiseUnits> {
    if !(system.lo_photons > 0.0) {
        return Err(invalid("lo_photons", "must be > 0"));
    }
    let tau = system.pulse_ns * 1e-9;
    let t = link.transmission();
    let mut xi = 0.0;
    for ch in channels.iter().filter(|c| c.direction == Direction::Forward) {
        let iso = mux.isolation_db(ch.itu.grid_distance(&system.quantum_channel));
        let n_slot = ch.power_mw()?.watts() * t * db(iso) * tau / ch.itu.photon_energy();
        xi += 2.0 * n_slot / system.lo_photons * calibration.kappa_unmatched;
    }
    Ok(ShotNoiseUnits::at_bob(xi))
}

/// Linear-attenuation phase-matching efficiency of an FWM product.
fn fwm_phase_matching(link: &FiberLink, length_km: f64, quantum_nm: f64, df1_hz: f64, df2_hz: f64) -> f64 {
    let alpha = link.alpha_lin_per_km() * 1e-3;
    let d = link.dispersion_ps_nm_km * 1e-6;
    let lambda = quantum_nm * 1e-9;
    let dbeta = 2.0 * PI * lambda * lambda * d / SPEED_OF_LIGHT * df1_hz * df2_hz;
    let l = length_km * 1e3;
    let loss = (-alpha * l).exp();
    let denom = (1.0 - loss).powi(2);
    let osc = if denom > 0.0 {
        4.0 * loss * (dbeta * l / 2.0).sin().powi(2) / denom
    } else {
        0.0
    };
    alpha * alpha / (alpha * alpha + dbeta * dbeta) * (1.0 + osc)
}

/// Length dependence of the FWM product power at the fiber output, `L_eff²·e^{-αL}`.
fn fwm_length_factor(link: &FiberLink, length_km: f64) -> f64 {
    let leff = crate::units::effective_length_unchecked(link.alpha_lin_per_km(), length_km);
    leff * leff * (-link.alpha_lin_per_km() * length_km).exp()
}

/// FWM power (W) of pumps `i`, `j` mixing with `k` into `f_i + f_j - f_k`.
fn fwm_product_w(
    pi: &WdmChannel,
    pj: &WdmChannel,
    pk: &WdmChannel,
    link: &FiberLink,
    quantum: &ItuChannel,
    calibration: &NoiseCalibration,
) -> Result<f64> {
    let (a, b, c) = (pi.power_mw()?.value(), pj.power_mw()?.value(), pk.power_mw()?.value());
    if a == 0.0 || b == 0.0 || c == 0.0 {
        return Ok(0.0);
    }
    let degeneracy: f64 = if pi.itu.index == pj.itu.index { 1.0 } else { 2.0 };
    let anchor_df = calibration.fwm_anchor_spacing_ghz * 1e9;
    let anchor_eta = fwm_phase_matching(
        link,
        calibration.fwm_anchor_length_km,
        quantum.wavelength_nm,
        anchor_df,
        anchor_df,
    );
    let eta = fwm_phase_matching(
        link,
        link.length_km,
        quantum.wavelength_nm,
        (pi.itu.frequency_thz - pk.itu.frequency_thz).abs() * 1e12,
        (pj.itu.frequency_thz - pk.itu.frequency_thz).abs() * 1e12,
    );
    let length = fwm_length_factor(link, link.length_km) / fwm_length_factor(link, calibration.fwm_anchor_length_km);
    let anchor_w = db(calibration.fwm_anchor_dbm) * 1e-3;
    Ok(anchor_w * a * b * c * degeneracy * degeneracy * eta / anchor_eta * length)
}

/// FWM products of co-propagating channels that land on the quantum channel.
///
/// The product power is scaled from the anchor (two 0 dBm pumps, one grid
/// spacing apart) by pump powers, degeneracy, phase matching and length, and
/// converted to matched photons as a flat spectrum over one channel spacing.
pub fn fwm_noise_all(
    channels: &[WdmChannel],
    link: &FiberLink,
    quantum: &ItuChannel,
    mux: &MuxSpec,
    eta_d: f64,
    calibration: &NoiseCalibration,
) -> Result<ShotNoiseUnits> {
    let fwd: Vec<&WdmChannel> = channels
        .iter()
        .filter(|c| c.direction == Direction::Forward)
        .collect();
    let mut p_w = 0.0;
    for (x, pi) in fwd.iter().enumerate() {
        for pj in &fwd[x..] {
            for pk in &fwd {
                if pk.itu.index == pi.itu.index || pk.itu.index == pj.itu.index {
                    continue;
                }
                if pi.itu.index + pj.itu.index - pk.itu.index != quantum.index {
                    continue;
                }
                p_w += fwm_product_w(pi, pj, pk, link, quantum, calibration)?;
            }
        }
    }
    let n = photons_per_mode(p_w, quantum, mux.bandwidth_hz()) * eta_d;
    matched_noise_to_excess(n, 1.0)
}

/// FWM noise of a pump pair on the quantum channel (both pumps forward).
pub fn fwm_noise(
    pumps: (&WdmChannel, &WdmChannel),
    link: &FiberLink,
    quantum: &ItuChannel,
    mux: &MuxSpec,
    eta_d: f64,
    calibration: &NoiseCalibration,
) -> Result<ShotNoiseUnits> {
    if pumps.0.itu.index == pumps.1.itu.index {
        return Err(invalid("fwm pumps", "pumps share a wavelength"));
    }
    let mut a = *pumps.0;
    let mut b = *pumps.1;
    a.direction = Direction::Forward;
    b.direction = Direction::Forward;
    fwm_noise_all(&[a, b], link, quantum, mux, eta_d, calibration)
}

/// ASE of an amplifier ahead of the multiplexer, filtered by the quantum port.
///
/// Matched photons: `n_sp·(G-1)·10^(iso/10)·½·T·η_D` with the non-adjacent isolation as the
/// out-of-band rejection of the multiplexer.
pub fn ase_noise(
    amplifier: &Amplifier,
    mux: &MuxSpec,
    link: &FiberLink,
    eta_d: f64,
) -> Result<ShotNoiseUnits> {
    if !(amplifier.gain >= 1.0) {
        return Err(invalid("amplifier gain", "must be >= 1"));
    }
    if !(amplifier.n_sp >= 1.0) {
        return Err(invalid("n_sp", "must be >= 1"));
    }
    let n = amplifier.n_sp
        * (amplifier.gain - 1.0)
        * db(mux.nonadjacent_isolation_db)
        * 0.5
        * link.transmission()
        * eta_d;
    matched_noise_to_excess(n, 1.0)
}

/// Laser side modes of a classical channel at the quantum wavelength.
pub fn sideband_noise(
    channel: &WdmChannel,
    suppression_db: f64,
    mux: &MuxSpec,
    link: &FiberLink,
    quantum: &ItuChannel,
    eta_d: f64,
) -> Result<ShotNoiseUnits> {
    if !(suppression_db < 0.0) {
        return Err(invalid("sideband suppression", "must be negative dB"));
    }
    if channel.direction == Direction::Backward {
        return Ok(ShotNoiseUnits::at_bob(0.0));
    }
    let filter = mux.isolation_db(channel.itu.grid_distance(quantum));
    let p = channel.power_mw()?.watts() * db(suppression_db) * db(filter) * link.transmission();
    let n = photons_per_mode(p, quantum, mux.bandwidth_hz()) * eta_d;
    matched_noise_to_excess(n, 1.0)
}

/// Peak XPM phase difference between signal and LO slots,
/// `4π·n2·L_eff·(P_s - P_lo)/(λ_c·A_eff)`.
pub fn xpm_phase(link: &FiberLink, wavelength_nm: f64, p_signal_mw: f64, p_lo_mw: f64) -> f64 {
    let leff_m = link.effective_length_km() * 1e3;
    4.0 * PI * link.n2_m2_per_mw * leff_m * (p_signal_mw - p_lo_mw)
        / (wavelength_nm * 1e-9 * link.a_eff_um2 * 1e-12)
}

/// Phase noise from cross-phase modulation by an on-off keyed co-propagating channel.
pub fn xpm_noise(
    channel: &WdmChannel,
    link: &FiberLink,
    system: &CvqkdSystem,
    overlap: XpmOverlap,
    kappa_xpm: f64,
) -> Result<ShotNoiseUnits> {
    let keyed = matches!(channel.modulation, Modulation::OnOffKeying { .. });
    if channel.direction == Direction::Backward || !keyed {
        return Ok(ShotNoiseUnits::at_bob(0.0));
    }
    let p = channel.power_mw()?.value();
    let phi = xpm_phase(link, channel.itu.wavelength_nm, p, 0.0);
    Ok(ShotNoiseUnits::at_bob(kappa_xpm * system.v_a * overlap.variance(phi)))
}

/// Everything a source needs to evaluate its contribution.
#[derive(Debug, Clone, Copy)]
pub struct NoiseContext<'a> {
    pub system: &'a CvqkdSystem,
    pub link: &'a FiberLink,
    pub channels: &'a [WdmChannel],
    pub mux: &'a MuxSpec,
    pub profile: &'a RamanProfile,
    pub calibration: &'a NoiseCalibration,
    pub amplifier: Option<&'a Amplifier>,
    /// Transmittance of Bob's drop filter.
    pub eta_d: f64,
}

/// One source's contribution with a note on how it was obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceTerm {
    pub value: ShotNoiseUnits,
    pub note: String,
}

impl SourceTerm {
    fn new(value: ShotNoiseUnits, note: impl Into<String>) -> Self {
        SourceTerm {
            value,
            note: note.into(),
        }
    }
}

pub trait NoiseSource: Send + Sync {
    /// Registry key, also used as the budget row label.
    fn name(&self) -> &'static str;
    fn evaluate(&self, ctx: &NoiseContext<'_>) -> Result<SourceTerm>;
}

struct Sasrs(Direction);

impl NoiseSource for Sasrs {
    fn name(&self) -> &'static str {
        match self.0 {
            Direction::Forward => "sasrs_fwd",
            Direction::Backward => "sasrs_bwd",
        }
    }

    fn evaluate(&self, ctx: &NoiseContext<'_>) -> Result<SourceTerm> {
        let mut n = 0.0;
        for ch in ctx.channels.iter().filter(|c| c.direction == self.0) {
            n += raman_matched_photons(ch, ctx.link, ctx.profile, ctx.eta_d, ctx.system.quantum_channel.wavelength_nm)?;
        }
        Ok(SourceTerm::new(
            matched_noise_to_excess(n, 1.0)?,
            "raman photons per mode from the beta profile",
        ))
    }
}

struct Leakage;

impl NoiseSource for Leakage {
    fn name(&self) -> &'static str {
        "leakage"
    }

    fn evaluate(&self, ctx: &NoiseContext<'_>) -> Result<SourceTerm> {
        let v = leakage_noise(ctx.channels, ctx.mux, ctx.system, ctx.link, ctx.calibration)?;
        Ok(SourceTerm::new(
            v,
            format!(
                "kappa_unmatched={} (anchors 6e-9 non-adjacent, 6e-5 adjacent at 0 dBm)",
                ctx.calibration.kappa_unmatched
            ),
        ))
    }
}

struct Fwm;

impl NoiseSource for Fwm {
    fn name(&self) -> &'static str {
        "fwm"
    }

    fn evaluate(&self, ctx: &NoiseContext<'_>) -> Result<SourceTerm> {
        let v = fwm_noise_all(
            ctx.channels,
            ctx.link,
            &ctx.system.quantum_channel,
            ctx.mux,
            ctx.eta_d,
            ctx.calibration,
        )?;
        Ok(SourceTerm::new(
            v,
            format!(
                "anchor {} dBm product for two 0 dBm pumps at {} GHz, {} km",
                ctx.calibration.fwm_anchor_dbm,
                ctx.calibration.fwm_anchor_spacing_ghz,
                ctx.calibration.fwm_anchor_length_km
            ),
        ))
    }
}

struct Ase;

impl NoiseSource for Ase {
    fn name(&self) -> &'static str {
        "ase"
    }

    fn evaluate(&self, ctx: &NoiseContext<'_>) -> Result<SourceTerm> {
        match ctx.amplifier {
            Some(amp) => Ok(SourceTerm::new(
                ase_noise(amp, ctx.mux, ctx.link, ctx.eta_d)?,
                format!("gain {} n_sp {}, anchor 6e-7 at gain 100", amp.gain, amp.n_sp),
            )),
            None => Ok(SourceTerm::new(ShotNoiseUnits::at_bob(0.0), "no amplifier configured")),
        }
    }
}

struct Sideband;

impl NoiseSource for Sideband {
    fn name(&self) -> &'static str {
        "sideband"
    }

    fn evaluate(&self, ctx: &NoiseContext<'_>) -> Result<SourceTerm> {
        let mut xi = 0.0;
        for ch in ctx.channels {
            xi += sideband_noise(
                ch,
                ctx.calibration.sideband_suppression_db,
                ctx.mux,
                ctx.link,
                &ctx.system.quantum_channel,
                ctx.eta_d,
            )?
            .value;
        }
        Ok(SourceTerm::new(
            ShotNoiseUnits::at_bob(xi),
            format!(
                "side-mode suppression {} dB, anchor 2.4e-4 for an adjacent 0 dBm channel",
                ctx.calibration.sideband_suppression_db
            ),
        ))
    }
}

struct Xpm;

impl NoiseSource for Xpm {
    fn name(&self) -> &'static str {
        "xpm"
    }

    fn evaluate(&self, ctx: &NoiseContext<'_>) -> Result<SourceTerm> {
        let mut xi = 0.0;
        for ch in ctx.channels {
            xi += xpm_noise(ch, ctx.link, ctx.system, ctx.calibration.xpm_overlap, ctx.calibration.kappa_xpm)?.value;
        }
        Ok(SourceTerm::new(
            ShotNoiseUnits::at_bob(xi),
            format!(
                "kappa_xpm={} with {:?} phase statistics, anchor 1.3e-5 at 25 km",
                ctx.calibration.kappa_xpm, ctx.calibration.xpm_overlap
            ),
        ))
    }
}

/// A process that is negligible for this system and contributes exactly zero.
struct Negligible {
    name: &'static str,
    rationale: &'static str,
}

impl NoiseSource for Negligible {
    fn name(&self) -> &'static str {
        self.name
    }

    fn evaluate(&self, _ctx: &NoiseContext<'_>) -> Result<SourceTerm> {
        Ok(SourceTerm::new(ShotNoiseUnits::at_bob(0.0), self.rationale))
    }
}

pub const RAYLEIGH_RATIONALE: &str =
    "elastic: scattered light stays at the classical wavelength and is rejected by the demultiplexer isolation";
pub const SBS_RATIONALE: &str =
    "Brillouin shift of about 8.8 pm keeps scattered light inside the classical channel";
pub const GAWBS_RATIONALE: &str =
    "GAWBS spectrum (~600 MHz) lies outside the ~1 MHz homodyne bandwidth; 200 ns signal/LO separation";

struct System;

impl NoiseSource for System {
    fn name(&self) -> &'static str {
        "system"
    }

    fn evaluate(&self, ctx: &NoiseContext<'_>) -> Result<SourceTerm> {
        Ok(SourceTerm::new(ctx.system.xi_system, "calibrated system excess noise"))
    }
}

/// Built-in sources in budget order.
pub fn noise_source_registry() -> Registry<dyn NoiseSource> {
    let mut reg: Registry<dyn NoiseSource> = Registry::new("noise source");
    reg.register("sasrs_fwd", || Box::new(Sasrs(Direction::Forward)))
        .register("sasrs_bwd", || Box::new(Sasrs(Direction::Backward)))
        .register("leakage", || Box::new(Leakage))
        .register("fwm", || Box::new(Fwm))
        .register("ase", || Box::new(Ase))
        .register("sideband", || Box::new(Sideband))
        .register("xpm", || Box::new(Xpm))
        .register("rayleigh", || {
            Box::new(Negligible {
                name: "rayleigh",
                rationale: RAYLEIGH_RATIONALE,
            })
        })
        .register("sbs", || {
            Box::new(Negligible {
                name: "sbs",
                rationale: SBS_RATIONALE,
            })
        })
        .register("gawbs", || {
            Box::new(Negligible {
                name: "gawbs",
                rationale: GAWBS_RATIONALE,
            })
        })
        .register("system", || Box::new(System));
    reg
}
