//! Monte-Carlo self-energy of a uniform unit mass on a unit-diameter ball.
//!
//! For `X` uniform in the cell, `u` a uniform direction and `r` drawn with a
//! density matched to the radial singularity, the integrand collapses to a
//! constant times `1[X + r u ∈ cell]` (Riesz) or `−log r · 1[…]`
//! (logarithmic), which has finite variance for every integrable exponent.

use alloc::format;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::kernels::Kernel;

pub const DEFAULT_CALIBRATION_SAMPLES: usize = 1 << 20;
pub const DEFAULT_CALIBRATION_SEED: u64 = 0x5EED;
pub const MIN_CALIBRATION_SAMPLES: usize = 100_000;

/// Cell diameter used for calibration.
const DIAMETER: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfEnergyEstimate {
    pub value: f64,
    pub stderr: f64,
    pub samples: usize,
}

fn uniform_direction(rng: &mut ChaCha8Rng, u: &mut [f64]) {
    loop {
        let mut s = 0.0;
        for v in u.iter_mut() {
            *v = rng.sample(StandardNormal);
            s += *v * *v;
        }
        if s > 1e-300 {
            let inv = 1.0 / libm::sqrt(s);
            u.iter_mut().for_each(|v| *v *= inv);
            return;
        }
    }
}

/// Estimates `∬ κ(x, y) dλ(x) dλ(y)` for `λ` uniform on a ball of diameter
/// one in ℝ^`cell_dim`.
///
/// `cell_dim` is the intrinsic dimension of the cells (`dim − 1` for nodes
/// spread over a hypersurface); the kernel's radial profile is used as is.
pub fn self_energy_constant(kernel: &Kernel, cell_dim: usize, samples: usize, seed: u64) -> Result<SelfEnergyEstimate> {
    if samples < MIN_CALIBRATION_SAMPLES {
        return Err(Error::InvalidInput(format!("at least {MIN_CALIBRATION_SAMPLES} samples required, got {samples}")));
    }
    if let Kernel::Riesz { alpha, dim } = kernel {
        if *alpha >= *dim as f64 {
            return Err(Error::NonIntegrable(format!("alpha = {alpha} >= dim = {dim}")));
        }
    }
    kernel.validate()?;
    if matches!(kernel, Kernel::Matrix(_)) {
        return Err(Error::InvalidKernel("matrix kernels carry their own diagonal".into()));
    }
    if cell_dim == 0 || kernel.dim().is_some_and(|d| cell_dim > d) {
        return Err(Error::InvalidInput(format!("cell dimension {cell_dim} out of range")));
    }
    let k = cell_dim as f64;
    let rho = 0.5 * DIAMETER;
    let volume_factor = k / libm::pow(rho, k);
    // Radial sampling exponent `p`: density ∝ r^p on (0, DIAMETER).
    let (p, weight) = match kernel.exponent() {
        Some(e) => {
            let p = k - 1.0 + e;
            if p + 1.0 <= 0.0 {
                return Err(Error::NonIntegrable(format!("exponent {e} not integrable over a {cell_dim}-dimensional cell")));
            }
            (p, volume_factor * libm::pow(DIAMETER, p + 1.0) / (p + 1.0))
        }
        None => (k - 1.0, volume_factor * libm::pow(DIAMETER, k) / k),
    };
    let logarithmic = kernel.exponent().is_none();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = alloc::vec![0.0; cell_dim];
    let mut u = alloc::vec![0.0; cell_dim];
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for _ in 0..samples {
        uniform_direction(&mut rng, &mut x);
        let radius = rho * libm::pow(rng.gen::<f64>(), 1.0 / k);
        x.iter_mut().for_each(|v| *v *= radius);
        uniform_direction(&mut rng, &mut u);
        let r = DIAMETER * libm::pow(1.0 - rng.gen::<f64>(), 1.0 / (p + 1.0));
        let inside = x.iter().zip(&u).map(|(a, b)| (a + r * b) * (a + r * b)).sum::<f64>() < rho * rho;
        let z = if !inside {
            0.0
        } else if logarithmic {
            -weight * libm::log(r)
        } else {
            weight
        };
        sum += z;
        sum_sq += z * z;
    }
    let n = samples as f64;
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    Ok(SelfEnergyEstimate { value: mean, stderr: libm::sqrt(var / n), samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use core::f64::consts::PI;

    const N: usize = 400_000;

    fn within(est: SelfEnergyEstimate, exact: f64) {
        assert!((est.value - exact).abs() < 5.0 * est.stderr, "{est:?} vs {exact}");
    }

    #[test]
    fn newtonian_ball_matches_closed_form() {
        // uniform ball of radius R in ℝ³: 6 / (5R)
        let est = self_energy_constant(&Kernel::newtonian(3).unwrap(), 3, N, 1).unwrap();
        within(est, 6.0 / (5.0 * 0.5));
        assert!(est.stderr > 0.0);
    }

    #[test]
    fn inverse_distance_on_disk_matches_closed_form() {
        // uniform disk of radius R with kernel 1/r: 16 / (3πR)
        let est = self_energy_constant(&Kernel::newtonian(3).unwrap(), 2, N, 2).unwrap();
        within(est, 16.0 / (3.0 * PI * 0.5));
    }

    #[test]
    fn logarithmic_segment_matches_closed_form() {
        // uniform on [0, 1]: ∫∫ −log|x − y| = 3/2
        let est = self_energy_constant(&Kernel::Logarithmic, 1, N, 3).unwrap();
        within(est, 1.5);
    }

    #[test]
    fn doubling_samples_shrinks_stderr() {
        let k = Kernel::newtonian(3).unwrap();
        let a = self_energy_constant(&k, 3, N, 4).unwrap();
        let b = self_energy_constant(&k, 3, 2 * N, 4).unwrap();
        let ratio = b.stderr / a.stderr;
        assert!((ratio - core::f64::consts::FRAC_1_SQRT_2).abs() < 0.05, "{ratio}");
    }

    #[test]
    fn riesz_three_halves_is_finite() {
        let est = self_energy_constant(&Kernel::riesz(1.5, 3).unwrap(), 3, N, 5).unwrap();
        assert!(est.value.is_finite() && est.value > 0.0);
    }

    #[test]
    fn preconditions() {
        let bad = Kernel::Riesz { alpha: 3.0, dim: 3 };
        assert!(matches!(self_energy_constant(&bad, 3, N, 0), Err(Error::NonIntegrable(_))));
        let k = Kernel::newtonian(3).unwrap();
        assert!(matches!(self_energy_constant(&k, 3, 10, 0), Err(Error::InvalidInput(_))));
        // 1/r² on a segment is not integrable
        let k4 = Kernel::newtonian(4).unwrap();
        assert!(matches!(self_energy_constant(&k4, 1, N, 0), Err(Error::NonIntegrable(_))));
    }
}
