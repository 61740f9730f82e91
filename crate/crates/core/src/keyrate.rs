//! Secret key rate of Gaussian-modulated coherent-state CV-QKD with homodyne
//! detection, reverse reconciliation and a trusted (calibrated) receiver,
//! under collective attacks.
//!
//! All variances are in shot-noise units. The channel is described by its
//! power transmission `T` (fiber plus any add/drop insertion loss) and the
//! input-referred excess noise `ξ`.
//!
//! The eavesdropper's information is the Holevo quantity of the standard
//! entangling-cloner purification: `χ_BE = G(λ1) + G(λ2) - G(λ3) - G(λ4)`
//! with `G(x) = (x+1)·log2(x+1) - x·log2(x)` evaluated at `(λ-1)/2`. The
//! first pair of symplectic eigenvalues belongs to the joint state of Alice
//! and Bob, the second pair to Alice conditioned on Bob's homodyne outcome
//! including the trusted detector modes.

use serde::{Deserialize, Serialize};

use crate::error::{finite, invalid, Error, Result};
use crate::solve::bisect;
use crate::units::{itu_channel, ItuChannel, Reference, ShotNoiseUnits};

/// Quantum channel used by the reference setup.
pub const DEFAULT_QUANTUM_INDEX: i32 = 58;

/// Transmitter and receiver parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvqkdSystem {
    /// Modulation variance `V_A`.
    pub v_a: f64,
    pub clock_hz: f64,
    /// Mean photon number of the local oscillator per pulse.
    pub lo_photons: f64,
    /// Local-oscillator pulse duration, i.e. the detection mode length.
    pub pulse_ns: f64,
    /// Bob's detection efficiency.
    pub eta_b: f64,
    /// Electronic noise variance.
    pub v_el: f64,
    /// Reconciliation efficiency.
    pub beta_rec: f64,
    /// System excess noise (input-referred).
    pub xi_system: ShotNoiseUnits,
    pub quantum_channel: ItuChannel,
    /// Fraction of pulses that carry key material. Alternating shot-noise
    /// calibration blocks consume the rest.
    pub key_fraction: f64,
}

impl Default for CvqkdSystem {
    fn default() -> Self {
        CvqkdSystem {
            v_a: 3.5,
            clock_hz: 1e6,
            lo_photons: 1e8,
            pulse_ns: 50.0,
            eta_b: 0.6,
            v_el: 0.01,
            beta_rec: 0.95,
            xi_system: ShotNoiseUnits::at_alice(0.03),
            quantum_channel: itu_channel(DEFAULT_QUANTUM_INDEX).expect("default channel is in band"),
            key_fraction: 0.5,
        }
    }
}

impl CvqkdSystem {
    pub fn validate(&self) -> Result<()> {
        if !(self.v_a > 0.0 && self.v_a.is_finite()) {
            return Err(invalid("v_a", format!("{} must be > 0", self.v_a)));
        }
        if !(self.eta_b > 0.0 && self.eta_b <= 1.0) {
            return Err(invalid("eta_b", format!("{} not in (0, 1]", self.eta_b)));
        }
        if !(self.beta_rec > 0.0 && self.beta_rec <= 1.0) {
            return Err(invalid("beta_rec", format!("{} not in (0, 1]", self.beta_rec)));
        }
        if !(self.v_el >= 0.0 && self.v_el.is_finite()) {
            return Err(invalid("v_el", format!("{} must be >= 0", self.v_el)));
        }
        if !(self.clock_hz > 0.0 && self.lo_photons > 0.0 && self.pulse_ns > 0.0) {
            return Err(invalid("clock/lo/pulse", "must be > 0"));
        }
        if !(self.key_fraction > 0.0 && self.key_fraction <= 1.0) {
            return Err(invalid("key_fraction", format!("{} not in (0, 1]", self.key_fraction)));
        }
        if self.xi_system.reference != Reference::AtAlice || !(self.xi_system.value >= 0.0) {
            return Err(invalid("xi_system", "must be a non-negative input-referred value"));
        }
        Ok(())
    }

    /// Detector-added noise referred to Bob's input, `(1 - η + v_el)/η`.
    pub fn detector_noise(&self) -> f64 {
        (1.0 - self.eta_b + self.v_el) / self.eta_b
    }

    pub fn with_v_a(mut self, v_a: f64) -> Self {
        self.v_a = v_a;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KeyRateResult {
    pub mutual_info_bits: f64,
    pub holevo_bits: f64,
    /// `beta_rec · I_AB - χ_BE`; negative values are kept.
    pub key_bits_per_pulse: f64,
    /// `key_bits_per_pulse · clock_hz · key_fraction`.
    pub key_bits_per_second: f64,
    pub positive: bool,
}

const EIG_TOL: f64 = 1e-10;

/// `G(x) = (x+1)log2(x+1) - x log2 x`; arguments within rounding of zero give 0.
pub fn entropy_g(x: f64) -> f64 {
    if x <= EIG_TOL {
        return 0.0;
    }
    (x + 1.0) * (x + 1.0).log2() - x * x.log2()
}

fn symplectic_pair(sum: f64, product: f64, what: &str) -> Result<(f64, f64)> {
    let disc = sum * sum - 4.0 * product;
    let scale = (sum * sum).max(1.0);
    let disc = if disc < 0.0 && disc > -1e-9 * scale {
        0.0
    } else {
        disc
    };
    if disc < 0.0 || product < 0.0 {
        return Err(Error::NonPhysical(format!(
            "{what}: discriminant {disc:e}, product {product:e}"
        )));
    }
    let root = disc.sqrt();
    let hi = 0.5 * (sum + root);
    let lo = 0.5 * (sum - root);
    if lo < -1e-9 * scale {
        return Err(Error::NonPhysical(format!("{what}: negative squared eigenvalue {lo:e}")));
    }
    let (l1, l2) = (hi.sqrt(), lo.max(0.0).sqrt());
    for l in [l1, l2] {
        if l < 1.0 - 1e-7 {
            return Err(Error::NonPhysical(format!(
                "{what}: symplectic eigenvalue {l} below the vacuum bound"
            )));
        }
    }
    Ok((l1, l2))
}

/// Holevo bound `χ_BE` in bits for the given channel and receiver.
pub fn holevo_bound(system: &CvqkdSystem, t: f64, xi_in: f64) -> Result<f64> {
    let v = system.v_a + 1.0;
    let chi_line = 1.0 / t - 1.0 + xi_in;
    let chi_hom = system.detector_noise();
    let chi_tot = chi_line + chi_hom / t;

    let a = v * v * (1.0 - 2.0 * t) + 2.0 * t + t * t * (v + chi_line).powi(2);
    let b = (t * (v * chi_line + 1.0)).powi(2);
    let (l1, l2) = symplectic_pair(a, b, "joint state")?;

    let sqrt_b = b.sqrt();
    let denom = t * (v + chi_tot);
    let c = (v * sqrt_b + t * (v + chi_line) + a * chi_hom) / denom;
    let d = sqrt_b * (v + sqrt_b * chi_hom) / denom;
    let (l3, l4) = symplectic_pair(c, d, "conditional state")?;

    let g = |l: f64| entropy_g((l - 1.0) / 2.0);
    Ok(g(l1) + g(l2) - g(l3) - g(l4))
}

/// Shannon mutual information between Alice and Bob, bits per pulse.
pub fn mutual_information(system: &CvqkdSystem, t: f64, xi_in: f64) -> f64 {
    let v = system.v_a + 1.0;
    let chi_tot = 1.0 / t - 1.0 + xi_in + system.detector_noise() / t;
    0.5 * ((v + chi_tot) / (1.0 + chi_tot)).log2()
}

fn check_channel(t: f64, xi_in: f64) -> Result<()> {
    finite("transmission", t)?;
    finite("excess noise", xi_in)?;
    if !(t > 0.0 && t <= 1.0) {
        return Err(invalid("transmission", format!("{t} not in (0, 1]")));
    }
    Ok(())
}

pub(crate) fn key_rate_raw(system: &CvqkdSystem, t: f64, xi_in: f64) -> Result<KeyRateResult> {
    check_channel(t, xi_in)?;
    let mutual = mutual_information(system, t, xi_in);
    let holevo = holevo_bound(system, t, xi_in)?;
    let k = system.beta_rec * mutual - holevo;
    Ok(KeyRateResult {
        mutual_info_bits: mutual,
        holevo_bits: holevo,
        key_bits_per_pulse: k,
        key_bits_per_second: k * (system.clock_hz * system.key_fraction),
        positive: k > 0.0,
    })
}

/// Asymptotic key rate for transmission `t` and input-referred excess noise `xi_in`.
pub fn secret_key_rate(system: &CvqkdSystem, t: f64, xi_in: ShotNoiseUnits) -> Result<KeyRateResult> {
    system.validate()?;
    if xi_in.reference != Reference::AtAlice {
        return Err(Error::ReferenceMismatch {
            from: xi_in.reference.label(),
            to: Reference::AtAlice.label(),
        });
    }
    if xi_in.value < 0.0 {
        return Err(invalid("excess noise", format!("{} is negative", xi_in.value)));
    }
    key_rate_raw(system, t, xi_in.value)
}

/// Largest input-referred excess noise with a non-negative key rate at transmission `t`.
pub fn null_key_threshold(system: &CvqkdSystem, t: f64) -> Result<ShotNoiseUnits> {
    system.validate()?;
    check_channel(t, 0.0)?;
    let k = |xi: f64| key_rate_raw(system, t, xi).map(|r| r.key_bits_per_pulse);
    let k0 = k(0.0)?;
    if k0 <= 0.0 {
        return Err(Error::Infeasible(format!(
            "key rate {k0:e} bits/pulse is not positive at zero excess noise (T = {t})"
        )));
    }
    // the usual bracket is [0, 1]; near-lossless channels tolerate more
    let mut hi = 1.0;
    while k(hi)? > 0.0 {
        hi *= 2.0;
        if hi > 64.0 {
            return Err(Error::Infeasible("no upper bracket for the threshold".into()));
        }
    }
    let mut failure = None;
    let root = bisect(
        |xi| match k(xi) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        0.0,
        hi,
        1e-16,
        1e-12,
    );
    if let Some(e) = failure {
        return Err(e);
    }
    root.map(ShotNoiseUnits::at_alice)
        .ok_or_else(|| Error::Infeasible("threshold bisection failed".into()))
}

/// Calibrated quantities needed to propagate estimator variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorAux {
    pub v_a: f64,
    pub t: f64,
    pub eta_b: f64,
    pub v_el: f64,
}

impl EstimatorAux {
    pub fn from_system(system: &CvqkdSystem, t: f64) -> Self {
        EstimatorAux {
            v_a: system.v_a,
            t,
            eta_b: system.eta_b,
            v_el: system.v_el,
        }
    }
}

/// Asymptotic standard deviations of the excess-noise estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExcessNoiseStd {
    pub at_bob: f64,
    pub at_alice: f64,
}

/// Delta-method standard deviation of the excess-noise estimator built from
/// `n_signal` correlated pulses and `n_shot` shot-noise pulses.
///
/// The estimator uses the second moments `c = <x_A x_B>`, `b = <x_B^2>` and
/// `s = <x_0^2>`:
/// `ξ_bob = (b - c²/V_A - s)/(s - v_el)` and `ξ = ξ_bob · V_A² / c²`.
pub fn excess_noise_std(aux: &EstimatorAux, xi_in: f64, n_signal: f64, n_shot: f64) -> ExcessNoiseStd {
    let g2 = aux.eta_b * aux.t;
    let g = g2.sqrt();
    let n0 = 1.0;
    let shot_var = n0 + aux.v_el;
    let noise_var = shot_var + g2 * xi_in;
    let c = g * aux.v_a;
    let vb = g2 * aux.v_a + noise_var;

    // covariance of the sample second moments of a zero-mean bivariate normal
    let var_c = (aux.v_a * vb + c * c) / n_signal;
    let var_b = 2.0 * vb * vb / n_signal;
    let cov_cb = 2.0 * c * vb / n_signal;
    let var_s = 2.0 * shot_var * shot_var / n_shot;

    let xi_bob = g2 * xi_in;
    let n0_hat = shot_var - aux.v_el;
    let d_b = 1.0 / n0_hat;
    let d_c = -2.0 * c / aux.v_a / n0_hat;
    let d_s = -(1.0 + xi_bob) / n0_hat;
    let var_bob = d_b * d_b * var_b + d_c * d_c * var_c + 2.0 * d_b * d_c * cov_cb + d_s * d_s * var_s;

    let scale = aux.v_a * aux.v_a / (c * c);
    let e_b = scale * d_b;
    let e_c = scale * d_c - 2.0 * xi_bob * aux.v_a * aux.v_a / (c * c * c);
    let e_s = scale * d_s;
    let var_alice = e_b * e_b * var_b + e_c * e_c * var_c + 2.0 * e_b * e_c * cov_cb + e_s * e_s * var_s;

    ExcessNoiseStd {
        at_bob: var_bob.sqrt(),
        at_alice: var_alice.sqrt(),
    }
}

/// Worst-case excess noise `ξ̂ + sigmas·σ(ξ̂)`, with `n_samples` pulses used
/// for both the correlated and the shot-noise variance estimates.
pub fn worst_case_xi(xi_hat: f64, n_samples: u64, sigmas: f64, aux: &EstimatorAux) -> Result<f64> {
    if n_samples <= 100 {
        return Err(invalid("n_samples", format!("{n_samples} must exceed 100")));
    }
    finite("xi_hat", xi_hat)?;
    let n = n_samples as f64;
    let std = excess_noise_std(aux, xi_hat.max(0.0), n, n);
    Ok(xi_hat + sigmas * std.at_alice)
}

/// Grid of modulation variances to scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VaGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for VaGrid {
    fn default() -> Self {
        VaGrid {
            start: 0.5,
            stop: 20.0,
            step: 0.05,
        }
    }
}

impl VaGrid {
    pub fn points(&self) -> Result<Vec<f64>> {
        if !(self.step > 0.0 && self.start > 0.0 && self.stop >= self.start) {
            return Err(invalid("V_A grid", "needs start > 0, stop >= start and step > 0"));
        }
        let n = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        Ok((0..n).map(|i| self.start + self.step * i as f64).collect())
    }
}

/// Modulation variance maximising the key rate over `grid`; ties go to the smaller value.
pub fn optimize_va(system: &CvqkdSystem, t: f64, xi_in: f64, grid: &VaGrid) -> Result<(f64, KeyRateResult)> {
    let mut best: Option<(f64, KeyRateResult)> = None;
    for va in grid.points()? {
        let r = key_rate_raw(&system.with_v_a(va), t, xi_in)?;
        if best.map_or(true, |(_, b)| r.key_bits_per_pulse > b.key_bits_per_pulse) {
            best = Some((va, r));
        }
    }
    match best {
        Some((va, r)) if r.positive => Ok((va, r)),
        _ => Err(Error::Infeasible(format!(
            "no modulation variance on the grid gives a positive key rate (T = {t}, xi = {xi_in})"
        ))),
    }
}
