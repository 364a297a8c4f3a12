//! Exhaustive active-set enumeration for small QPs, LPs and LCPs.
//!
//! Each candidate active set yields a square linear system that is solved
//! directly; candidates are kept only if primal and dual feasible. Among
//! valid candidates the smallest objective wins, ties going to the
//! lexicographically smallest active set.

use alloc::vec;
use alloc::vec::Vec;

use itertools::Itertools;

use crate::error::{Error, Result};
use crate::linalg::{dot, lu_solve, Matrix};
use crate::qp::{Constraint, QpProblem, SolveReport, SolveStatus};

/// Largest dimension accepted by the enumerators.
pub const ORACLE_MAX_DIM: usize = 12;

/// Largest number of inequality rows (including bounds) accepted.
pub const ORACLE_MAX_ROWS: usize = 24;

struct Candidate {
    x: Vec<f64>,
    objective: f64,
    active: Vec<usize>,
    multipliers: Vec<f64>,
}

fn better(new: &Candidate, old: &Option<Candidate>) -> bool {
    match old {
        None => true,
        Some(o) => {
            let tie = 1e-12 * (1.0 + o.objective.abs());
            new.objective < o.objective - tie || (new.objective <= o.objective + tie && new.active < o.active)
        }
    }
}

fn feas_tol(scale: f64) -> f64 {
    1e-9 * (1.0 + scale)
}

fn finish(best: Option<Candidate>, n: usize, enumerated: usize, residual: impl Fn(&Candidate) -> f64) -> SolveReport {
    match best {
        Some(c) => SolveReport {
            kkt_residual: residual(&c),
            objective: c.objective,
            iterations: enumerated,
            status: SolveStatus::Converged,
            active_set: c.active,
            multipliers: c.multipliers,
            tikhonov_shift: 0.0,
            x: c.x,
        },
        None => SolveReport {
            x: vec![0.0; n],
            objective: f64::NAN,
            kkt_residual: f64::INFINITY,
            iterations: enumerated,
            status: SolveStatus::Infeasible,
            active_set: Vec::new(),
            multipliers: Vec::new(),
            tikhonov_shift: 0.0,
        },
    }
}

fn check_dim(n: usize) -> Result<()> {
    if n > ORACLE_MAX_DIM {
        return Err(Error::TooLarge { dim: n, max: ORACLE_MAX_DIM });
    }
    Ok(())
}

fn free_sets(n: usize) -> impl Iterator<Item = Vec<usize>> {
    (0u32..(1u32 << n)).map(move |mask| (0..n).filter(|&i| mask & (1 << i) != 0).collect())
}

fn complement(free: &[usize], n: usize) -> Vec<usize> {
    (0..n).filter(|i| !free.contains(i)).collect()
}

/// Exact minimizer of a QP by enumerating active sets.
pub fn brute_force_qp(problem: &QpProblem) -> Result<SolveReport> {
    let n = problem.dim();
    check_dim(n)?;
    problem.validate()?;
    match &problem.constraint {
        Constraint::NonNeg => Ok(enumerate_nonneg(problem)),
        Constraint::Simplex => {
            if n == 0 {
                return Err(Error::InvalidInput("simplex over zero variables".into()));
            }
            Ok(enumerate_simplex(problem))
        }
        Constraint::LinearIneq { a, .. } => {
            if a.rows() + n > ORACLE_MAX_ROWS {
                return Err(Error::TooLarge { dim: a.rows() + n, max: ORACLE_MAX_ROWS });
            }
            Ok(enumerate_linear(problem))
        }
    }
}

fn enumerate_nonneg(p: &QpProblem) -> SolveReport {
    let n = p.dim();
    let tol = feas_tol(p.b.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    let mut best = None;
    let mut count = 0;
    for free in free_sets(n) {
        count += 1;
        let mut x = vec![0.0; n];
        if !free.is_empty() {
            let rhs: Vec<f64> = free.iter().map(|&i| p.b[i]).collect();
            let Some(sol) = lu_solve(&p.q.principal(&free), &rhs) else { continue };
            if sol.iter().any(|&v| v < -tol) {
                continue;
            }
            for (k, &i) in free.iter().enumerate() {
                x[i] = sol[k].max(0.0);
            }
        }
        let g: Vec<f64> = p.q.mul_vec(&x).iter().zip(&p.b).map(|(a, b)| a - b).collect();
        let active = complement(&free, n);
        if active.iter().any(|&j| g[j] < -tol) {
            continue;
        }
        let cand = Candidate { objective: p.objective(&x), x, active, multipliers: Vec::new() };
        if better(&cand, &best) {
            best = Some(cand);
        }
    }
    finish(best, n, count, |c| p.kkt_residual(&c.x, &[]))
}

fn enumerate_simplex(p: &QpProblem) -> SolveReport {
    let n = p.dim();
    let tol = feas_tol(p.b.iter().fold(0.0f64, |m, v| m.max(v.abs())));
    let mut best = None;
    let mut count = 0;
    for free in free_sets(n).filter(|f| !f.is_empty()) {
        count += 1;
        let k = free.len();
        // [Q_FF −1; 1ᵀ 0] [x_F; τ] = [b_F; 1]
        let kkt = Matrix::from_fn(k + 1, k + 1, |i, j| match (i < k, j < k) {
            (true, true) => p.q[(free[i], free[j])],
            (true, false) => -1.0,
            (false, true) => 1.0,
            (false, false) => 0.0,
        });
        let mut rhs: Vec<f64> = free.iter().map(|&i| p.b[i]).collect();
        rhs.push(1.0);
        let Some(sol) = lu_solve(&kkt, &rhs) else { continue };
        if sol[..k].iter().any(|&v| v < -tol) {
            continue;
        }
        let tau = sol[k];
        let mut x = vec![0.0; n];
        for (m, &i) in free.iter().enumerate() {
            x[i] = sol[m].max(0.0);
        }
        let g: Vec<f64> = p.q.mul_vec(&x).iter().zip(&p.b).map(|(a, b)| a - b).collect();
        let active = complement(&free, n);
        if active.iter().any(|&j| g[j] - tau < -tol) {
            continue;
        }
        let cand = Candidate { objective: p.objective(&x), x, active, multipliers: Vec::new() };
        if better(&cand, &best) {
            best = Some(cand);
        }
    }
    finish(best, n, count, |c| p.kkt_residual(&c.x, &[]))
}

fn enumerate_linear(p: &QpProblem) -> SolveReport {
    let n = p.dim();
    let (rows, rhs) = p.inequality_rows();
    let m = rows.len();
    let scale = p.b.iter().chain(&rhs).fold(0.0f64, |s, v| s.max(v.abs()));
    let tol = feas_tol(scale);
    let mut count = 0;
    // Every valid KKT point is the unique minimizer; stop at the first size
    // level that produces one.
    for level in 0..=n.min(m) {
        let mut best = None;
        for active in (0..m).combinations(level) {
            count += 1;
            let dim = n + level;
            // [Q −G_Sᵀ; G_S 0] [x; u] = [b; h_S]
            let kkt = Matrix::from_fn(dim, dim, |i, j| match (i < n, j < n) {
                (true, true) => p.q[(i, j)],
                (true, false) => -rows[active[j - n]][i],
                (false, true) => rows[active[i - n]][j],
                (false, false) => 0.0,
            });
            let mut r = p.b.clone();
            r.extend(active.iter().map(|&s| rhs[s]));
            let Some(sol) = lu_solve(&kkt, &r) else { continue };
            let x = sol[..n].to_vec();
            let u = &sol[n..];
            if u.iter().any(|&v| v < -tol) {
                continue;
            }
            if rows.iter().zip(&rhs).any(|(row, h)| dot(row, &x) < h - tol) {
                continue;
            }
            let mut multipliers = vec![0.0; m];
            for (k, &s) in active.iter().enumerate() {
                multipliers[s] = u[k].max(0.0);
            }
            let cand = Candidate { objective: p.objective(&x), x, active, multipliers };
            if better(&cand, &best) {
                best = Some(cand);
            }
        }
        if best.is_some() {
            return finish(best, n, count, |c| p.kkt_residual(&c.x, &c.multipliers));
        }
    }
    finish(None, n, count, |_| f64::INFINITY)
}

/// Vertices of `{G x >= h}` selected by `n` tight rows, with an optional
/// extra equality row `eq·x = 1`.
fn vertices<'a>(
    rows: &'a [Vec<f64>],
    rhs: &'a [f64],
    n: usize,
    eq: Option<&'a [f64]>,
    tol: f64,
) -> impl Iterator<Item = (Vec<usize>, Vec<f64>)> + 'a {
    let need = n - usize::from(eq.is_some());
    (0..rows.len()).combinations(need).filter_map(move |tight| {
        let mut mat = Matrix::zeros(n, n);
        let mut r = vec![0.0; n];
        for (k, &s) in tight.iter().enumerate() {
            for j in 0..n {
                mat[(k, j)] = rows[s][j];
            }
            r[k] = rhs[s];
        }
        if let Some(e) = eq {
            for j in 0..n {
                mat[(n - 1, j)] = e[j];
            }
            r[n - 1] = 1.0;
        }
        let x = lu_solve(&mat, &r)?;
        if rows.iter().zip(rhs).all(|(row, h)| dot(row, &x) >= h - tol) {
            Some((tight, x))
        } else {
            None
        }
    })
}

/// Exact optimum of `min cᵀx` s.t. `a x >= b`, `x >= 0` by vertex enumeration.
///
/// Unboundedness is decided exactly by enumerating the vertices of the
/// normalized recession cone `{a d >= 0, d >= 0, Σd = 1}`.
pub fn brute_force_lp(c: &[f64], a: &Matrix, b: &[f64]) -> Result<SolveReport> {
    let (m, n) = (a.rows(), a.cols());
    check_dim(n)?;
    if m + n > ORACLE_MAX_ROWS {
        return Err(Error::TooLarge { dim: m + n, max: ORACLE_MAX_ROWS });
    }
    if c.len() != n || b.len() != m {
        return Err(Error::DimensionMismatch { expected: n, found: c.len() });
    }
    let mut rows: Vec<Vec<f64>> = (0..m).map(|i| a.row(i).to_vec()).collect();
    let mut rhs = b.to_vec();
    for i in 0..n {
        let mut e = vec![0.0; n];
        e[i] = 1.0;
        rows.push(e);
        rhs.push(0.0);
    }
    let tol = feas_tol(b.iter().fold(0.0f64, |s, v| s.max(v.abs())));
    let mut best: Option<Candidate> = None;
    let mut count = 0;
    for (tight, x) in vertices(&rows, &rhs, n, None, tol) {
        count += 1;
        let x: Vec<f64> = x.iter().map(|v| v.max(0.0)).collect();
        let cand = Candidate { objective: dot(c, &x), x, active: tight, multipliers: Vec::new() };
        if better(&cand, &best) {
            best = Some(cand);
        }
    }
    if best.is_none() {
        return Ok(finish(None, n, count, |_| 0.0));
    }
    let zeros = vec![0.0; rows.len()];
    let ones = vec![1.0; n];
    let ray_tol = 1e-12 * (1.0 + c.iter().fold(0.0f64, |s, v| s.max(v.abs())));
    let descent = vertices(&rows, &zeros, n, Some(&ones), tol).any(|(_, d)| dot(c, &d) < -ray_tol);
    let mut rep = finish(best, n, count, |_| 0.0);
    if descent {
        rep.status = SolveStatus::Unbounded;
        rep.objective = f64::NEG_INFINITY;
    } else {
        // tight rows of `a` only, matching the simplex solver's convention
        let ax = a.mul_vec(&rep.x);
        rep.active_set = (0..m).filter(|&i| (ax[i] - b[i]).abs() <= tol).collect();
    }
    Ok(rep)
}

/// Exact LCP solution by enumerating complementary bases.
pub fn brute_force_lcp(m: &Matrix, q: &[f64]) -> Result<SolveReport> {
    let n = m.rows();
    check_dim(n)?;
    if !m.is_square() || q.len() != n {
        return Err(Error::DimensionMismatch { expected: n, found: q.len() });
    }
    let tol = feas_tol(q.iter().fold(0.0f64, |s, v| s.max(v.abs())));
    let mut best = None;
    let mut count = 0;
    let residual = |x: &[f64]| {
        let w = m.mul_vec(x);
        x.iter().zip(w.iter().zip(q)).fold(0.0f64, |acc, (&xi, (&mx, &qi))| {
            let wi = mx - qi;
            acc.max(-xi).max(-wi).max((xi * wi).abs())
        })
    };
    for free in free_sets(n) {
        count += 1;
        let mut x = vec![0.0; n];
        if !free.is_empty() {
            let rhs: Vec<f64> = free.iter().map(|&i| q[i]).collect();
            let Some(sol) = lu_solve(&m.principal(&free), &rhs) else { continue };
            if sol.iter().any(|&v| v < -tol) {
                continue;
            }
            for (k, &i) in free.iter().enumerate() {
                x[i] = sol[k].max(0.0);
            }
        }
        let mx = m.mul_vec(&x);
        let active = complement(&free, n);
        if active.iter().any(|&j| mx[j] - q[j] < -tol) {
            continue;
        }
        let objective = 0.5 * m.bilinear(&x, &x) - dot(q, &x);
        let cand = Candidate { objective, x, active, multipliers: Vec::new() };
        if better(&cand, &best) {
            best = Some(cand);
        }
    }
    Ok(finish(best, n, count, |c| residual(&c.x)))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k2() -> Matrix {
        Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap()
    }

    #[test]
    fn nonneg_interior() {
        let r = brute_force_qp(&QpProblem::nonneg(k2(), vec![1.0, 1.0]).unwrap()).unwrap();
        assert!((r.x[0] - 1.0 / 3.0).abs() < 1e-15 && (r.x[1] - 1.0 / 3.0).abs() < 1e-15);
        assert!(r.active_set.is_empty());
    }

    #[test]
    fn simplex_midpoint() {
        let r = brute_force_qp(&QpProblem::simplex(k2(), vec![0.0, 0.0]).unwrap()).unwrap();
        assert_eq!(r.x, vec![0.5, 0.5]);
        assert_eq!(r.objective, 0.75);
    }

    #[test]
    fn linear_ineq_minimum_norm() {
        let a = Matrix::from_rows(&[[2.0, 1.0]]).unwrap();
        let p = QpProblem::linear_ineq(Matrix::identity(2), vec![0.0, 0.0], a, vec![1.0]).unwrap();
        let r = brute_force_qp(&p).unwrap();
        assert!((r.x[0] - 0.4).abs() < 1e-15 && (r.x[1] - 0.2).abs() < 1e-15);
        assert_eq!(r.active_set, vec![0]);
        assert!(r.kkt_residual < 1e-15);
    }

    #[test]
    fn linear_ineq_infeasible() {
        let a = Matrix::from_rows(&[[-1.0, -1.0]]).unwrap();
        let p = QpProblem::linear_ineq(Matrix::identity(2), vec![0.0, 0.0], a, vec![1.0]).unwrap();
        assert_eq!(brute_force_qp(&p).unwrap().status, SolveStatus::Infeasible);
    }

    #[test]
    fn lp_examples() {
        let r = brute_force_lp(&[1.0, 1.0], &k2(), &[1.0, 1.0]).unwrap();
        assert!((r.objective - 2.0 / 3.0).abs() < 1e-15);
        let r = brute_force_lp(&[1.0], &Matrix::from_rows(&[[2.0]]).unwrap(), &[1.0]).unwrap();
        assert_eq!(r.x, vec![0.5]);
        let r = brute_force_lp(&[1.0, 1.0], &k2(), &[0.0, 0.0]).unwrap();
        assert_eq!(r.objective, 0.0);
        let r = brute_force_lp(&[-1.0], &Matrix::from_rows(&[[1.0]]).unwrap(), &[1.0]).unwrap();
        assert_eq!(r.status, SolveStatus::Unbounded);
        let r = brute_force_lp(&[1.0], &Matrix::from_rows(&[[-1.0]]).unwrap(), &[1.0]).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
    }

    #[test]
    fn lcp_examples() {
        let r = brute_force_lcp(&Matrix::from_rows(&[[2.0]]).unwrap(), &[1.0]).unwrap();
        assert_eq!(r.x, vec![0.5]);
        let r = brute_force_lcp(&Matrix::from_rows(&[[2.0]]).unwrap(), &[-1.0]).unwrap();
        assert_eq!(r.x, vec![0.0]);
        let r = brute_force_lcp(&k2(), &[1.0, 1.0]).unwrap();
        assert!((r.x[0] - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn size_limit() {
        let p = QpProblem::nonneg(Matrix::identity(13), vec![1.0; 13]).unwrap();
        assert_eq!(brute_force_qp(&p), Err(Error::TooLarge { dim: 13, max: 12 }));
    }
}
