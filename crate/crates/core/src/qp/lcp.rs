//! Linear complementarity: `x >= 0`, `Mx − q >= 0`, `xᵀ(Mx − q) = 0`.
//!
//! Murty's least-index principal pivoting, which terminates for every
//! P-matrix and in particular for symmetric positive definite `M`.

use alloc::vec;
use alloc::vec::Vec;

use super::{SolveReport, SolveStatus, SolverOptions};
use crate::error::{Error, Result};
use crate::linalg::{dot, lu_solve, Cholesky, Matrix};

fn residual(m: &Matrix, q: &[f64], x: &[f64]) -> (Vec<f64>, f64) {
    let w: Vec<f64> = m.mul_vec(x).iter().zip(q).map(|(a, b)| a - b).collect();
    let worst = x
        .iter()
        .zip(&w)
        .fold(0.0f64, |acc, (&xi, &wi)| acc.max(-xi).max(-wi).max((xi * wi).abs()));
    (w, worst)
}

pub fn solve_lcp(m: &Matrix, q: &[f64], opts: &SolverOptions) -> Result<SolveReport> {
    let n = m.rows();
    if !m.is_square() {
        return Err(Error::DimensionMismatch { expected: n, found: m.cols() });
    }
    if q.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: q.len() });
    }
    if !m.is_symmetric(1e-12 * (1.0 + m.max_abs())) {
        return Err(Error::NotPositiveDefinite);
    }
    Cholesky::new(m).ok_or(Error::NotPositiveDefinite)?;
    let scale = 1.0 + q.iter().fold(0.0f64, |s, v| s.max(v.abs()));
    let eps = 1e-13 * scale;

    let mut free: Vec<bool> = q.iter().map(|&v| v > 0.0).collect();
    let mut x = vec![0.0; n];
    let mut iterations = 0;
    let mut status = SolveStatus::MaxIter;
    while iterations < opts.max_iter {
        iterations += 1;
        let idx: Vec<usize> = (0..n).filter(|&i| free[i]).collect();
        x.iter_mut().for_each(|v| *v = 0.0);
        if !idx.is_empty() {
            let rhs: Vec<f64> = idx.iter().map(|&i| q[i]).collect();
            let sol = lu_solve(&m.principal(&idx), &rhs).ok_or(Error::NotPositiveDefinite)?;
            for (k, &i) in idx.iter().enumerate() {
                x[i] = sol[k];
            }
        }
        let w = m.mul_vec(&x);
        let flip = (0..n).find(|&i| if free[i] { x[i] < -eps } else { w[i] - q[i] < -eps });
        match flip {
            Some(i) => free[i] = !free[i],
            None => {
                status = SolveStatus::Converged;
                break;
            }
        }
    }
    for v in x.iter_mut() {
        *v = v.max(0.0);
    }
    let (_, kkt) = residual(m, q, &x);
    let active_set = (0..n).filter(|&i| x[i] == 0.0).collect();
    Ok(SolveReport {
        objective: 0.5 * m.bilinear(&x, &x) - dot(q, &x),
        kkt_residual: kkt,
        iterations,
        status,
        active_set,
        multipliers: Vec::new(),
        tikhonov_shift: 0.0,
        x,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lcp(m: &[&[f64]], q: &[f64]) -> SolveReport {
        solve_lcp(&Matrix::from_rows(m).unwrap(), q, &SolverOptions::default()).unwrap()
    }

    #[test]
    fn scalar_interior() {
        let r = lcp(&[&[2.0]], &[1.0]);
        assert!(r.converged());
        assert_eq!(r.x, vec![0.5]);
        assert_eq!(r.kkt_residual, 0.0);
    }

    #[test]
    fn scalar_at_zero() {
        let r = lcp(&[&[2.0]], &[-1.0]);
        assert_eq!(r.x, vec![0.0]);
        let m = Matrix::from_rows(&[[2.0]]).unwrap();
        let (w, _) = residual(&m, &[-1.0], &r.x);
        assert_eq!(w, vec![1.0]);
    }

    #[test]
    fn two_by_two_interior() {
        let r = lcp(&[&[2.0, 1.0], &[1.0, 2.0]], &[1.0, 1.0]);
        assert!((r.x[0] - 1.0 / 3.0).abs() < 1e-15 && (r.x[1] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn mixed_pattern_needs_pivot() {
        // q > 0 everywhere but the solution drops node 1
        let r = lcp(&[&[2.0, 1.9], &[1.9, 2.0]], &[1.0, 0.1]);
        assert!(r.converged());
        assert!((r.x[0] - 0.5).abs() < 1e-15);
        assert_eq!(r.x[1], 0.0);
    }

    #[test]
    fn rejects_indefinite() {
        let m = Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert_eq!(solve_lcp(&m, &[1.0, 1.0], &SolverOptions::default()), Err(Error::NotPositiveDefinite));
    }
}
