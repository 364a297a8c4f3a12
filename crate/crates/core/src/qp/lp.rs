//! Dense two-phase simplex for `min cᵀx` s.t. `A x >= b`, `x >= 0`.
//!
//! Bland's lowest-index rule for both entering and leaving variables, so the
//! method terminates and optimal vertices are chosen deterministically.

use alloc::vec;
use alloc::vec::Vec;

use super::{SolveReport, SolveStatus, SolverOptions};
use crate::error::{Error, Result};
use crate::linalg::{dot, Matrix};

/// Largest `rows + cols` accepted.
pub const LP_SIZE_LIMIT: usize = 400;

const PIVOT_EPS: f64 = 1e-12;

struct Tableau {
    /// `rows × (cols + 1)`; the last column is the right-hand side.
    t: Vec<Vec<f64>>,
    /// Objective row: reduced costs, then `-objective`.
    obj: Vec<f64>,
    basis: Vec<usize>,
    cols: usize,
}

enum Outcome {
    Optimal,
    Unbounded,
    IterationLimit,
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[row][col];
        self.t[row].iter_mut().for_each(|v| *v /= p);
        let pivot_row = self.t[row].clone();
        for (r, line) in self.t.iter_mut().enumerate() {
            if r != row {
                let f = line[col];
                if f != 0.0 {
                    for (v, pr) in line.iter_mut().zip(&pivot_row) {
                        *v -= f * pr;
                    }
                    line[col] = 0.0;
                }
            }
        }
        let f = self.obj[col];
        if f != 0.0 {
            for (v, pr) in self.obj.iter_mut().zip(&pivot_row) {
                *v -= f * pr;
            }
            self.obj[col] = 0.0;
        }
        self.basis[row] = col;
    }

    /// Rewrites `obj` as reduced costs of `cost` for the current basis.
    fn price(&mut self, cost: &[f64]) {
        let mut obj = cost.to_vec();
        obj.push(0.0);
        for (r, &bv) in self.basis.iter().enumerate() {
            let cb = obj[bv];
            if cb != 0.0 {
                for (v, tv) in obj.iter_mut().zip(&self.t[r]) {
                    *v -= cb * tv;
                }
            }
        }
        self.obj = obj;
    }

    fn run(&mut self, allowed: usize, iters: &mut usize, max_iter: usize) -> Outcome {
        loop {
            let Some(col) = (0..allowed).find(|&j| self.obj[j] < -PIVOT_EPS) else {
                return Outcome::Optimal;
            };
            if *iters >= max_iter {
                return Outcome::IterationLimit;
            }
            *iters += 1;
            let rhs = self.cols;
            let mut best: Option<(usize, f64)> = None;
            for r in 0..self.t.len() {
                let a = self.t[r][col];
                if a > PIVOT_EPS {
                    let ratio = self.t[r][rhs] / a;
                    best = match best {
                        None => Some((r, ratio)),
                        Some((br, bratio)) => {
                            if ratio < bratio || (ratio == bratio && self.basis[r] < self.basis[br]) {
                                Some((r, ratio))
                            } else {
                                Some((br, bratio))
                            }
                        }
                    };
                }
            }
            match best {
                Some((r, _)) => self.pivot(r, col),
                None => return Outcome::Unbounded,
            }
        }
    }
}

fn report(x: Vec<f64>, objective: f64, status: SolveStatus, iterations: usize) -> SolveReport {
    SolveReport {
        x,
        objective,
        kkt_residual: f64::NAN,
        iterations,
        status,
        active_set: Vec::new(),
        multipliers: Vec::new(),
        tikhonov_shift: 0.0,
    }
}

/// Solves `min cᵀx` s.t. `a x >= b`, `x >= 0`.
///
/// On success `multipliers` holds the row duals `y >= 0` and `active_set` the
/// rows with `(a x)_i = b_i` to tolerance. `kkt_residual` combines primal
/// infeasibility, dual infeasibility and the duality gap.
pub fn solve_lp(c: &[f64], a: &Matrix, b: &[f64], opts: &SolverOptions) -> Result<SolveReport> {
    let (m, n) = (a.rows(), a.cols());
    if c.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: c.len() });
    }
    if b.len() != m {
        return Err(Error::DimensionMismatch { expected: m, found: b.len() });
    }
    if m + n > LP_SIZE_LIMIT {
        return Err(Error::TooLarge { dim: m + n, max: LP_SIZE_LIMIT });
    }
    if c.iter().chain(b).chain(a.as_slice()).any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite LP data".into()));
    }

    // Columns: x (n), surplus s (m), artificials (one per row with b_i > 0).
    let needs_art: Vec<usize> = (0..m).filter(|&i| b[i] > 0.0).collect();
    let cols = n + m + needs_art.len();
    let mut t = vec![vec![0.0; cols + 1]; m];
    let mut basis = vec![0; m];
    let mut art_of_row = vec![None; m];
    for (k, &i) in needs_art.iter().enumerate() {
        art_of_row[i] = Some(n + m + k);
    }
    for i in 0..m {
        let sign = if art_of_row[i].is_some() { 1.0 } else { -1.0 };
        for j in 0..n {
            t[i][j] = sign * a[(i, j)];
        }
        t[i][n + i] = -sign;
        t[i][cols] = sign * b[i];
        match art_of_row[i] {
            Some(col) => {
                t[i][col] = 1.0;
                basis[i] = col;
            }
            None => basis[i] = n + i,
        }
    }
    let mut tab = Tableau { t, obj: Vec::new(), basis, cols };
    let mut iters = 0;
    let scale = 1.0 + b.iter().fold(0.0f64, |s, v| s.max(v.abs()));

    if !needs_art.is_empty() {
        let mut phase1 = vec![0.0; cols];
        phase1[n + m..].iter_mut().for_each(|v| *v = 1.0);
        tab.price(&phase1);
        match tab.run(cols, &mut iters, opts.max_iter) {
            Outcome::IterationLimit => return Ok(report(vec![0.0; n], f64::NAN, SolveStatus::MaxIter, iters)),
            Outcome::Unbounded | Outcome::Optimal => {}
        }
        if -tab.obj[cols] > 1e-9 * scale {
            return Ok(report(vec![0.0; n], f64::NAN, SolveStatus::Infeasible, iters));
        }
        // Drive zero-level artificials out of the basis; drop redundant rows.
        let mut r = 0;
        while r < tab.t.len() {
            if tab.basis[r] >= n + m {
                match (0..n + m).find(|&j| tab.t[r][j].abs() > 1e-9) {
                    Some(j) => {
                        tab.pivot(r, j);
                        r += 1;
                    }
                    None => {
                        tab.t.remove(r);
                        tab.basis.remove(r);
                    }
                }
            } else {
                r += 1;
            }
        }
    }

    let mut phase2 = vec![0.0; cols];
    phase2[..n].copy_from_slice(c);
    tab.price(&phase2);
    let status = match tab.run(n + m, &mut iters, opts.max_iter) {
        Outcome::Optimal => SolveStatus::Converged,
        Outcome::Unbounded => SolveStatus::Unbounded,
        Outcome::IterationLimit => SolveStatus::MaxIter,
    };

    let mut x = vec![0.0; n];
    for (r, &bv) in tab.basis.iter().enumerate() {
        if bv < n {
            x[bv] = tab.t[r][cols].max(0.0);
        }
    }
    let objective = dot(c, &x);
    if status != SolveStatus::Converged {
        let mut rep = report(x, if status == SolveStatus::Unbounded { f64::NEG_INFINITY } else { objective }, status, iters);
        rep.kkt_residual = f64::INFINITY;
        return Ok(rep);
    }

    // Reduced cost of surplus column i equals the dual y_i of row i.
    let y: Vec<f64> = (0..m).map(|i| tab.obj[n + i]).collect();
    let ax = a.mul_vec(&x);
    let mut residual = 0.0f64;
    let mut active_set = Vec::new();
    for i in 0..m {
        let slack = ax[i] - b[i];
        residual = residual.max(-slack).max(-y[i]);
        if slack.abs() <= 1e-9 * scale {
            active_set.push(i);
        }
    }
    let aty = a.tr_mul_vec(&y);
    for j in 0..n {
        residual = residual.max(aty[j] - c[j]);
    }
    residual = residual.max((objective - dot(b, &y)).abs());
    Ok(SolveReport {
        x,
        objective,
        kkt_residual: residual,
        iterations: iters,
        status,
        active_set,
        multipliers: y,
        tikhonov_shift: 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(c: &[f64], a: &[&[f64]], b: &[f64]) -> SolveReport {
        let a = Matrix::from_rows(a).unwrap();
        solve_lp(c, &a, b, &SolverOptions::default()).unwrap()
    }

    #[test]
    fn two_variable_vertex() {
        let r = run(&[1.0, 1.0], &[&[2.0, 1.0], &[1.0, 2.0]], &[1.0, 1.0]);
        assert!(r.converged());
        assert!((r.x[0] - 1.0 / 3.0).abs() < 1e-12 && (r.x[1] - 1.0 / 3.0).abs() < 1e-12);
        assert!((r.objective - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(r.active_set, vec![0, 1]);
        assert!(r.kkt_residual < 1e-12);
    }

    #[test]
    fn single_constraint() {
        let r = run(&[1.0], &[&[2.0]], &[1.0]);
        assert!((r.x[0] - 0.5).abs() < 1e-15);
        assert!((r.objective - 0.5).abs() < 1e-15);
    }

    #[test]
    fn origin_feasible() {
        let r = run(&[1.0, 1.0], &[&[2.0, 1.0], &[1.0, 2.0]], &[0.0, 0.0]);
        assert!(r.converged());
        assert_eq!(r.x, vec![0.0, 0.0]);
        assert_eq!(r.objective, 0.0);
    }

    #[test]
    fn unbounded_and_infeasible() {
        let r = run(&[-1.0], &[&[1.0]], &[1.0]);
        assert_eq!(r.status, SolveStatus::Unbounded);
        let r = run(&[1.0], &[&[-1.0]], &[1.0]);
        assert_eq!(r.status, SolveStatus::Infeasible);
    }

    #[test]
    fn maximization_via_negated_rows() {
        // max x0 + x1 s.t. 2x0 + x1 <= 1, x0 + 2x1 <= 1
        let r = run(&[-1.0, -1.0], &[&[-2.0, -1.0], &[-1.0, -2.0]], &[-1.0, -1.0]);
        assert!(r.converged());
        assert!((r.objective + 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn redundant_equal_rows() {
        let r = run(&[1.0, 2.0], &[&[1.0, 1.0], &[1.0, 1.0]], &[1.0, 1.0]);
        assert!(r.converged());
        assert_eq!(r.x, vec![1.0, 0.0]);
    }
}
