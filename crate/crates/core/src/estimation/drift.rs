//! Block-level simulation of a random walk on the shot-noise level.
//!
//! Within a block of `m` pulses the walk is represented by its end increment
//! `E` and the mean position `M` (both relative to the block start), which are
//! jointly Gaussian: `Var E = m s²`, `Var M = s²(m+1)(2m+1)/(6m)`,
//! `Cov(E, M) = s²(m+1)/2`.

use rand::Rng;
use rand_distr::StandardNormal;

/// Covariance of `(E, M)` for an `m`-step block with step deviation `s`.
pub fn block_moments(m: f64, s: f64) -> (f64, f64, f64) {
    let s2 = s * s;
    (m * s2, s2 * (m + 1.0) * (2.0 * m + 1.0) / (6.0 * m), s2 * (m + 1.0) / 2.0)
}

/// Draws `(E, M)` from two standard normals.
pub fn block_step(m: f64, s: f64, z1: f64, z2: f64) -> (f64, f64) {
    if s == 0.0 {
        return (0.0, 0.0);
    }
    let (var_e, var_m, cov) = block_moments(m, s);
    let e = var_e.sqrt() * z1;
    let resid = (var_m - cov * cov / var_e).max(0.0);
    (e, cov / var_e * e + resid.sqrt() * z2)
}

/// Mean `N_0` of each of `n_blocks` consecutive blocks, starting from the nominal level 1.
pub fn block_levels<R: Rng>(rng: &mut R, n_blocks: usize, m: u64, s: f64) -> Vec<f64> {
    let mut level = 1.0;
    let mut out = Vec::with_capacity(n_blocks);
    for _ in 0..n_blocks {
        let z1: f64 = rng.sample(StandardNormal);
        let z2: f64 = rng.sample(StandardNormal);
        let (e, mean) = block_step(m as f64, s, z1, z2);
        out.push(level + mean);
        level += e;
    }
    out
}

/// Variance of the difference between the mean levels of two consecutive `m`-pulse windows.
pub fn consecutive_window_variance(m: f64, s: f64) -> f64 {
    s * s * (m - (m + 1.0) + 2.0 * (m + 1.0) * (2.0 * m + 1.0) / (6.0 * m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn moments_match_explicit_walk() {
        // brute force: positions S_1..S_m of a unit-step walk
        let m = 7usize;
        let mut var_m = 0.0;
        let mut cov = 0.0;
        for i in 1..=m {
            for j in 1..=m {
                var_m += i.min(j) as f64;
            }
            cov += i as f64;
        }
        var_m /= (m * m) as f64;
        cov /= m as f64;
        let (ve, vm, c) = block_moments(m as f64, 1.0);
        assert_eq!(ve, m as f64);
        assert!((vm - var_m).abs() < 1e-12);
        assert!((c - cov).abs() < 1e-12);
    }

    #[test]
    fn window_difference_variance_matches_sampling() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let (m, s) = (1000u64, 1e-3);
        let n = 20_000;
        let mut acc = 0.0;
        for _ in 0..n {
            let l = block_levels(&mut rng, 2, m, s);
            acc += (l[1] - l[0]).powi(2);
        }
        let v = consecutive_window_variance(m as f64, s);
        assert!((acc / n as f64 / v - 1.0).abs() < 0.05);
        assert!((v / (2.0 / 3.0 * m as f64 * s * s) - 1.0).abs() < 1e-2);
    }

    #[test]
    fn calibrated_step_hits_both_reference_points() {
        let s = crate::estimation::DEFAULT_DRIFT_STEP;
        let mean_abs = |w: f64| (2.0 / std::f64::consts::PI).sqrt() * consecutive_window_variance(w, s).sqrt();
        assert!((mean_abs(2e8) / 1.5e-3 - 1.0).abs() < 0.01);
        let short = mean_abs(1e5);
        assert!(short > 1e-5 && short < 1e-4, "{short}");
    }
}
