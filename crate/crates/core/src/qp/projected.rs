use alloc::vec;
use alloc::vec::Vec;

use super::{QpProblem, SolveReport, SolveStatus, SolverOptions};
use crate::linalg::{dot, power_max_eigenvalue, Cholesky, Matrix};

/// Iterations the active pattern must stay unchanged before handing over to
/// the active-set finish.
const STABLE_PATTERN: usize = 30;
const PG_CAP: usize = 5000;

#[derive(Clone, Copy)]
enum Feasible {
    NonNeg,
    Simplex,
}

fn project(x: &mut [f64], set: Feasible) {
    match set {
        Feasible::NonNeg => x.iter_mut().for_each(|v| *v = v.max(0.0)),
        Feasible::Simplex => project_simplex(x),
    }
}

/// Euclidean projection onto `{x >= 0, Σx = 1}` by sorting.
pub(crate) fn project_simplex(x: &mut [f64]) {
    let mut u = x.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap_or(core::cmp::Ordering::Equal));
    let mut cum = 0.0;
    let mut theta = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            theta = t;
        }
    }
    x.iter_mut().for_each(|v| *v = (*v - theta).max(0.0));
}

fn gradient(q: &Matrix, b: &[f64], x: &[f64]) -> Vec<f64> {
    q.mul_vec(x).iter().zip(b).map(|(a, c)| a - c).collect()
}

/// FISTA with gradient-based restart. Stops once the zero pattern is stable.
fn accelerated_pg(q: &Matrix, b: &[f64], mut x: Vec<f64>, set: Feasible, cap: usize) -> (Vec<f64>, usize) {
    let lip = 1.05 * power_max_eigenvalue(q, 60) + f64::MIN_POSITIVE;
    let step = 1.0 / lip;
    let mut y = x.clone();
    let mut t = 1.0f64;
    let mut stable = 0;
    let mut pattern: Vec<bool> = x.iter().map(|&v| v > 0.0).collect();
    let mut iters = 0;
    while iters < cap {
        iters += 1;
        let g = gradient(q, b, &y);
        let mut next: Vec<f64> = y.iter().zip(&g).map(|(yi, gi)| yi - step * gi).collect();
        project(&mut next, set);
        let diff: Vec<f64> = next.iter().zip(&x).map(|(a, c)| a - c).collect();
        let moved = dot(&diff, &diff);
        if dot(&g, &diff) > 0.0 {
            t = 1.0;
            y = next.clone();
        } else {
            let t_next = 0.5 * (1.0 + libm::sqrt(1.0 + 4.0 * t * t));
            let beta = (t - 1.0) / t_next;
            y = next.iter().zip(&diff).map(|(a, d)| a + beta * d).collect();
            t = t_next;
        }
        let new_pattern: Vec<bool> = next.iter().map(|&v| v > 0.0).collect();
        stable = if new_pattern == pattern { stable + 1 } else { 0 };
        pattern = new_pattern;
        x = next;
        if moved == 0.0 || stable >= STABLE_PATTERN {
            break;
        }
    }
    (x, iters)
}

/// Solves `Q_FF u = rhs` with one step of iterative refinement.
fn principal_solve(q: &Matrix, full: &Cholesky, free: &[usize], rhs: &[f64]) -> Option<Vec<f64>> {
    let sub;
    let (qf, chol) = if free.len() == q.rows() {
        (q, full)
    } else {
        sub = (q.principal(free), Cholesky::new(&q.principal(free))?);
        (&sub.0, &sub.1)
    };
    let mut u = chol.solve(rhs);
    let r: Vec<f64> = qf.mul_vec(&u).iter().zip(rhs).map(|(a, b)| b - a).collect();
    for (ui, di) in u.iter_mut().zip(chol.solve(&r)) {
        *ui += di;
    }
    Some(u)
}

/// Primal active-set finish for `x >= 0` (and the simplex when `simplex`).
/// `x` must be feasible on entry.
fn active_set_finish(
    problem: &QpProblem,
    chol: &Cholesky,
    mut x: Vec<f64>,
    simplex: bool,
    opts: &SolverOptions,
) -> (Vec<f64>, usize, bool) {
    let n = problem.dim();
    let q = &problem.q;
    let b = &problem.b;
    let mult_tol = 0.25 * opts.tol;
    let mut free: Vec<bool> = x.iter().map(|&v| v > 0.0).collect();
    if simplex && !free.iter().any(|&f| f) {
        free[0] = true;
        x = vec![0.0; n];
        x[0] = 1.0;
    }
    let mut iters = 0;
    while iters < opts.max_iter {
        iters += 1;
        let idx: Vec<usize> = (0..n).filter(|&i| free[i]).collect();
        let mut z = vec![0.0; n];
        let mut tau = 0.0;
        if !idx.is_empty() {
            let b_f: Vec<f64> = idx.iter().map(|&i| b[i]).collect();
            let Some(u) = principal_solve(q, chol, &idx, &b_f) else { return (x, iters, false) };
            let z_f = if simplex {
                let ones = vec![1.0; idx.len()];
                let Some(v) = principal_solve(q, chol, &idx, &ones) else { return (x, iters, false) };
                tau = (1.0 - u.iter().sum::<f64>()) / v.iter().sum::<f64>();
                u.iter().zip(&v).map(|(a, c)| a + tau * c).collect::<Vec<_>>()
            } else {
                u
            };
            for (k, &i) in idx.iter().enumerate() {
                z[i] = z_f[k];
            }
        }
        let blocking: Vec<usize> = idx.iter().copied().filter(|&i| z[i] <= 0.0).collect();
        if blocking.is_empty() {
            x = z;
            let g = gradient(q, b, &x);
            let worst = (0..n)
                .filter(|&j| !free[j])
                .map(|j| (j, g[j] - tau))
                .filter(|&(_, m)| m < -mult_tol)
                .min_by(|a, c| a.1.partial_cmp(&c.1).unwrap_or(core::cmp::Ordering::Equal));
            match worst {
                Some((j, _)) => free[j] = true,
                None => return (x, iters, true),
            }
        } else {
            let mut alpha = f64::INFINITY;
            let mut hit = blocking[0];
            for &i in &blocking {
                let denom = x[i] - z[i];
                let ratio = if denom > 0.0 { x[i] / denom } else { 0.0 };
                if ratio < alpha {
                    alpha = ratio;
                    hit = i;
                }
            }
            for i in 0..n {
                x[i] += alpha * (z[i] - x[i]);
            }
            x[hit] = 0.0;
            free[hit] = false;
            for &i in &blocking {
                if x[i] <= 0.0 {
                    x[i] = 0.0;
                    free[i] = false;
                }
            }
            if simplex {
                let s: f64 = x.iter().sum();
                x.iter_mut().for_each(|v| *v /= s);
            }
        }
    }
    (x, iters, false)
}

fn finish(problem: &QpProblem, x: Vec<f64>, iterations: usize, converged: bool) -> SolveReport {
    let active_set = (0..x.len()).filter(|&i| x[i] == 0.0).collect();
    SolveReport {
        objective: problem.objective(&x),
        kkt_residual: problem.kkt_residual(&x, &[]),
        iterations,
        status: if converged { SolveStatus::Converged } else { SolveStatus::MaxIter },
        active_set,
        multipliers: Vec::new(),
        tikhonov_shift: 0.0,
        x,
    }
}

pub(super) fn solve_nonneg(problem: &QpProblem, chol: &Cholesky, opts: &SolverOptions) -> SolveReport {
    let n = problem.dim();
    let cap = opts.max_iter.min(PG_CAP);
    let (x, pg_iters) = accelerated_pg(&problem.q, &problem.b, vec![0.0; n], Feasible::NonNeg, cap);
    let budget = SolverOptions { max_iter: opts.max_iter.saturating_sub(pg_iters).max(1), ..*opts };
    let (x, it, ok) = active_set_finish(problem, chol, x, false, &budget);
    finish(problem, x, pg_iters + it, ok)
}

pub(super) fn solve_simplex(problem: &QpProblem, chol: &Cholesky, opts: &SolverOptions) -> SolveReport {
    let n = problem.dim();
    let cap = opts.max_iter.min(PG_CAP);
    let (x, pg_iters) = accelerated_pg(&problem.q, &problem.b, vec![1.0 / n as f64; n], Feasible::Simplex, cap);
    let budget = SolverOptions { max_iter: opts.max_iter.saturating_sub(pg_iters).max(1), ..*opts };
    let (x, it, ok) = active_set_finish(problem, chol, x, true, &budget);
    finish(problem, x, pg_iters + it, ok)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simplex_projection() {
        let mut x = vec![0.5, 0.5, 0.5];
        project_simplex(&mut x);
        for v in &x {
            assert!((v - 1.0 / 3.0).abs() < 1e-15);
        }
        let mut y = vec![2.0, 0.0, -1.0];
        project_simplex(&mut y);
        assert_eq!(y, vec![1.0, 0.0, 0.0]);
    }
}
