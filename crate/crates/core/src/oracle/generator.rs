//! Random matrix kernels satisfying both maximum principles.
//!
//! `K = M⁻¹` where `M` is a symmetric M-matrix with nonnegative row sums
//! (off-diagonal entries `<= 0`, diagonally dominant). Such inverses obey the
//! Frostman and domination principles; every output is nevertheless
//! re-certified by sampling before it is returned.

use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::SubsetMask;
use crate::kernels::{certify, Certificate, GramForm};
use crate::linalg::{Cholesky, Matrix};

pub const CERTIFICATION_TRIALS: usize = 1000;
pub const CERTIFICATION_TOL: f64 = 1e-9;
pub const MAX_ATTEMPTS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct CertifiedKernel {
    /// `K = M⁻¹`, exactly symmetric.
    pub k: Matrix,
    pub m: Matrix,
    pub certificate: Certificate,
    pub seed: u64,
    pub attempts: usize,
}

impl CertifiedKernel {
    pub fn gram(&self) -> GramForm {
        GramForm::from_matrix(self.k.clone()).expect("certified kernels are positive definite")
    }

    pub fn len(&self) -> usize {
        self.k.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.k.rows() == 0
    }

    /// Row sums of `M`; the total mass of `ν` equals `Σ r_i (Kν)_i`.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.m.rows()).map(|i| self.m.row(i).iter().sum()).collect()
    }
}

fn symmetric_inverse(m: &Matrix) -> Option<Matrix> {
    let inv = Cholesky::new(m)?.inverse();
    let n = m.rows();
    Some(Matrix::from_fn(n, n, |i, j| 0.5 * (inv[(i, j)] + inv[(j, i)])))
}

/// Inverts and certifies a given `M`; `seed` drives the certification sampler.
pub fn certified_kernel_from_m(m: Matrix, seed: u64) -> Result<CertifiedKernel> {
    let n = m.rows();
    if !m.is_square() {
        return Err(Error::DimensionMismatch { expected: n, found: m.cols() });
    }
    if !m.is_symmetric(0.0) {
        return Err(Error::InvalidKernel("M must be symmetric".into()));
    }
    for i in 0..n {
        let row = m.row(i);
        if (0..n).any(|j| j != i && row[j] > 0.0) {
            return Err(Error::InvalidKernel("M must have nonpositive off-diagonal entries".into()));
        }
        if row.iter().sum::<f64>() < -1e-12 * row[i].abs() {
            return Err(Error::InvalidKernel("M must have nonnegative row sums".into()));
        }
    }
    let k = symmetric_inverse(&m).ok_or(Error::NotPositiveDefinite)?;
    let gram = GramForm::from_matrix(k.clone())?;
    let certificate = certify(&gram, CERTIFICATION_TRIALS, CERTIFICATION_TOL, seed);
    if !certificate.both() {
        let worst = certificate.frostman.worst_violation.max(certificate.domination.worst_violation);
        return Err(Error::CertificationFailed { attempts: 1, worst });
    }
    Ok(CertifiedKernel { k, m, certificate, seed, attempts: 1 })
}

fn random_m(rng: &mut ChaCha8Rng, n: usize, loaded: &[bool]) -> Matrix {
    let mut m = Matrix::zeros(n, n);
    // A random spanning chain keeps M irreducible, then extra random edges.
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }
    for w in order.windows(2) {
        let v = -rng.gen_range(0.05..1.0);
        m[(w[0], w[1])] = v;
        m[(w[1], w[0])] = v;
    }
    for i in 0..n {
        for j in (i + 1)..n {
            if m[(i, j)] == 0.0 && rng.gen_bool(0.6) {
                let v = -rng.gen_range(0.05..1.0);
                m[(i, j)] = v;
                m[(j, i)] = v;
            }
        }
    }
    for i in 0..n {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| -m[(i, j)]).sum();
        let slack = if loaded[i] { rng.gen_range(0.1..1.0) } else { 0.0 };
        m[(i, i)] = off + slack;
    }
    m
}

fn generate(n: usize, seed: u64, loaded: impl Fn(&mut ChaCha8Rng) -> Vec<bool>) -> Result<(CertifiedKernel, Vec<bool>)> {
    if !(2..=12).contains(&n) {
        return Err(Error::InvalidInput("certified kernels are generated for 2 <= n <= 12".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for attempt in 1..=MAX_ATTEMPTS {
        let mask = loaded(&mut rng);
        let m = random_m(&mut rng, n, &mask);
        let cert_seed = rng.gen();
        match certified_kernel_from_m(m, cert_seed) {
            Ok(mut ck) => {
                ck.seed = seed;
                ck.attempts = attempt;
                return Ok((ck, mask));
            }
            Err(Error::CertificationFailed { worst: w, .. }) => worst = worst.max(w),
            Err(Error::NotPositiveDefinite) => {}
            Err(e) => return Err(e),
        }
    }
    Err(Error::CertificationFailed { attempts: MAX_ATTEMPTS, worst })
}

/// Random certified kernel on `n` nodes, reproducible from `(n, seed)`.
/// Every row of `M` has a strictly positive sum.
pub fn generate_certified_kernel(n: usize, seed: u64) -> Result<CertifiedKernel> {
    generate(n, seed, |_| vec![true; n]).map(|(k, _)| k)
}

/// Certified kernel whose `M` has zero row sums off a random nonempty strict
/// subset `A`. Sweeping any measure onto `A` then preserves total mass, so
/// minimum-mass measures in the balayage class are not unique.
pub fn generate_mass_preserving_kernel(n: usize, seed: u64) -> Result<(CertifiedKernel, SubsetMask)> {
    let (k, mask) = generate(n, seed, |rng| {
        let size = rng.gen_range(1..n);
        let mut idx: Vec<usize> = (0..n).collect();
        for i in 0..size {
            let j = rng.gen_range(i..n);
            idx.swap(i, j);
        }
        let mut mask = vec![false; n];
        idx[..size].iter().for_each(|&i| mask[i] = true);
        mask
    })?;
    let a = SubsetMask::new((0..n).filter(|&i| mask[i]), n)?;
    Ok((k, a))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::check_frostman;

    #[test]
    fn two_by_two_inverse() {
        let m = Matrix::from_rows(&[[3.0, -1.0], [-1.0, 3.0]]).unwrap();
        let ck = certified_kernel_from_m(m, 0).unwrap();
        let expect = [[3.0 / 8.0, 1.0 / 8.0], [1.0 / 8.0, 3.0 / 8.0]];
        for i in 0..2 {
            for j in 0..2 {
                assert!((ck.k[(i, j)] - expect[i][j]).abs() < 1e-15);
            }
        }
        assert!(ck.k.is_symmetric(0.0));
    }

    #[test]
    fn outputs_are_pd_certified_and_reproducible() {
        for seed in 0..20 {
            let n = 2 + (seed as usize % 11);
            let ck = generate_certified_kernel(n, seed).unwrap();
            assert!(Cholesky::new(&ck.k).is_some());
            assert!(ck.certificate.both());
            assert!(check_frostman(&ck.gram(), 1000, 1e-9, seed + 99).holds());
            assert!(ck.row_sums().iter().all(|&r| r > 0.0));
            assert_eq!(generate_certified_kernel(n, seed).unwrap(), ck);
        }
    }

    #[test]
    fn mass_preserving_rows() {
        let (ck, a) = generate_mass_preserving_kernel(6, 3).unwrap();
        assert!(!a.is_empty() && a.len() < 6);
        for (i, r) in ck.row_sums().iter().enumerate() {
            if a.contains(i) {
                assert!(*r > 0.0);
            } else {
                assert!(r.abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(generate_certified_kernel(1, 0).is_err());
        assert!(generate_certified_kernel(13, 0).is_err());
        let m = Matrix::from_rows(&[[1.0, 0.5], [0.5, 1.0]]).unwrap();
        assert!(matches!(certified_kernel_from_m(m, 0), Err(Error::InvalidKernel(_))));
    }
}
