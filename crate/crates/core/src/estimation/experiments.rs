//! Seed-ensemble experiments: schedule comparison, drift curves and estimator spread.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{AcquisitionConfig, DriftModel, Schedule};
use super::drift::consecutive_window_variance;
use super::session::{derive_seed, estimate_t_xi, simulate_homodyne_session, EstimationResult};
use crate::error::{invalid, Result};
use crate::keyrate::CvqkdSystem;

/// Smallest ensemble accepted for bias estimates.
pub const MIN_SEEDS: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleOutcome {
    pub schedule: Schedule,
    pub seeds: usize,
    pub mean_xi_hat: f64,
    pub mean_xi_hat_at_bob: f64,
    /// Mean `|ξ̂_bob(drift) - ξ̂_bob(no drift)|` over the ensemble, same sample streams.
    pub drift_bias: f64,
    /// The same quantity referred to Alice.
    pub drift_bias_at_alice: f64,
    /// Mean `|ξ̂ - ξ_true|` at Alice, drift and sampling noise together.
    pub mean_abs_error: f64,
}

/// Runs the configured schedule over `n_seeds` seeds derived from `cfg.seed`.
///
/// Each seed is simulated twice with identical sample streams, once with the
/// configured drift and once without, so the difference isolates the drift.
pub fn run_schedule_experiment(
    system: &CvqkdSystem,
    t: f64,
    xi_true: f64,
    cfg: &AcquisitionConfig,
    n_seeds: usize,
) -> Result<ScheduleOutcome> {
    if n_seeds < MIN_SEEDS {
        return Err(invalid("seeds", format!("need at least {MIN_SEEDS}, got {n_seeds}")));
    }
    let cal = system.into();
    let runs: Vec<(EstimationResult, EstimationResult)> = (0..n_seeds as u64)
        .into_par_iter()
        .map(|k| {
            let c = cfg.with_seed(derive_seed(cfg.seed, k));
            let drifted = simulate_homodyne_session(system, t, xi_true, &c)?;
            let steady = simulate_homodyne_session(system, t, xi_true, &c.with_drift(DriftModel::None))?;
            Ok((estimate_t_xi(&drifted.blocks, &cal)?, estimate_t_xi(&steady.blocks, &cal)?))
        })
        .collect::<Result<Vec<_>>>()?;
    let n = n_seeds as f64;
    let mean = |f: &dyn Fn(&(EstimationResult, EstimationResult)) -> f64| runs.iter().map(f).sum::<f64>() / n;
    Ok(ScheduleOutcome {
        schedule: cfg.schedule,
        seeds: n_seeds,
        mean_xi_hat: mean(&|r| r.0.xi_hat),
        mean_xi_hat_at_bob: mean(&|r| r.0.xi_hat_at_bob),
        drift_bias: mean(&|r| (r.0.xi_hat_at_bob - r.1.xi_hat_at_bob).abs()),
        drift_bias_at_alice: mean(&|r| (r.0.xi_hat - r.1.xi_hat).abs()),
        mean_abs_error: mean(&|r| (r.0.xi_hat - xi_true).abs()),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftPoint {
    pub window: u64,
    /// Mean absolute relative change of the true shot-noise level between consecutive windows.
    pub latent: f64,
    /// The same for variance estimates, including their sampling spread.
    pub measured: f64,
    /// Expected `measured` without drift, `sqrt(2/π)·sqrt(4/window)`.
    pub chi2_floor: f64,
}

/// Relative drift between shot-noise measurements of consecutive windows.
///
/// Each seed uses one normal draw for the latent walk across all window
/// sizes, so the ensemble `latent` column is exactly monotone in the window.
pub fn drift_curve(cfg: &AcquisitionConfig, windows: &[u64], n_seeds: usize) -> Result<Vec<DriftPoint>> {
    if n_seeds == 0 {
        return Err(invalid("seeds", "need at least one"));
    }
    if windows.iter().any(|&w| w < 2) {
        return Err(invalid("window", "must hold at least 2 pulses"));
    }
    let s = cfg.drift.step();
    let mut out = Vec::with_capacity(windows.len());
    for &w in windows {
        let sd = consecutive_window_variance(w as f64, s).sqrt();
        let chi = ChiSquared::new(w as f64).map_err(|e| invalid("window", e.to_string()))?;
        let (lat, meas) = (0..n_seeds as u64)
            .map(|k| {
                let mut walk = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, k));
                let z: f64 = walk.sample(StandardNormal);
                let d = sd * z;
                let mut noise = ChaCha8Rng::seed_from_u64(derive_seed(derive_seed(cfg.seed, k), w));
                let first = chi.sample(&mut noise) / w as f64;
                let second = (1.0 + d) * chi.sample(&mut noise) / w as f64;
                (d.abs(), ((second - first) / first).abs())
            })
            .fold((0.0, 0.0), |acc, x| (acc.0 + x.0, acc.1 + x.1));
        out.push(DriftPoint {
            window: w,
            latent: lat / n_seeds as f64,
            measured: meas / n_seeds as f64,
            chi2_floor: (2.0 / std::f64::consts::PI).sqrt() * (4.0 / w as f64).sqrt(),
        });
    }
    Ok(out)
}

/// Mean and standard deviation of an ensemble of estimates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSpread {
    pub n_signal: u64,
    pub seeds: usize,
    pub mean_xi: f64,
    pub std_xi: f64,
    pub mean_xi_at_bob: f64,
    pub std_xi_at_bob: f64,
    /// Delta-method prediction at the true parameters.
    pub predicted_std_at_bob: f64,
    pub predicted_std: f64,
}

/// Empirical spread of `ξ̂` with `n_signal` signal and as many shot-noise pulses, no drift.
pub fn estimator_spread(
    system: &CvqkdSystem,
    t: f64,
    xi_true: f64,
    n_signal: u64,
    n_seeds: usize,
    sampler: &str,
    seed: u64,
) -> Result<EstimatorSpread> {
    if n_seeds < 2 {
        return Err(invalid("seeds", "need at least two"));
    }
    let cfg = AcquisitionConfig {
        n_total_pulses: 2 * n_signal,
        block_pulses: n_signal,
        schedule: Schedule::Alternating,
        drift: DriftModel::None,
        seed,
        sampler: sampler.to_string(),
    };
    let cal = system.into();
    let est: Vec<EstimationResult> = (0..n_seeds as u64)
        .into_par_iter()
        .map(|k| {
            let s = simulate_homodyne_session(system, t, xi_true, &cfg.with_seed(derive_seed(seed, k)))?;
            estimate_t_xi(&s.blocks, &cal)
        })
        .collect::<Result<Vec<_>>>()?;
    let stats = |f: &dyn Fn(&EstimationResult) -> f64| {
        let n = est.len() as f64;
        let m = est.iter().map(f).sum::<f64>() / n;
        let v = est.iter().map(|r| (f(r) - m).powi(2)).sum::<f64>() / (n - 1.0);
        (m, v.sqrt())
    };
    let (mean_xi, std_xi) = stats(&|r| r.xi_hat);
    let (mean_b, std_b) = stats(&|r| r.xi_hat_at_bob);
    let aux = crate::keyrate::EstimatorAux::from_system(system, t);
    let pred = crate::keyrate::excess_noise_std(&aux, xi_true, n_signal as f64, n_signal as f64);
    Ok(EstimatorSpread {
        n_signal,
        seeds: n_seeds,
        mean_xi,
        std_xi,
        mean_xi_at_bob: mean_b,
        std_xi_at_bob: std_b,
        predicted_std_at_bob: pred.at_bob,
        predicted_std: pred.at_alice,
    })
}

/// Least-squares slope and intercept of `log10 y` against `log10 x`.
pub fn power_law_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let n = points.len() as f64;
    let (sx, sy, sxx, sxy) = points.iter().fold((0.0, 0.0, 0.0, 0.0), |a, &(x, y)| {
        let (lx, ly) = (x.log10(), y.log10());
        (a.0 + lx, a.1 + ly, a.2 + lx * lx, a.3 + lx * ly)
    });
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    (slope, (sy - slope * sx) / n)
}
