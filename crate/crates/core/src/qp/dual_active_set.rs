//! Goldfarb–Idnani dual active-set method for `min ½xᵀQx − bᵀx` s.t. `Gx >= h`.
//!
//! Starts from the unconstrained minimizer and adds violated constraints one
//! at a time, keeping `JᵀN = [R; 0]` with `J Jᵀ = Q⁻¹` for the active normals `N`.

use alloc::vec;
use alloc::vec::Vec;

use super::{QpProblem, SolveReport, SolveStatus, SolverOptions};
use crate::linalg::{dot, norm2, Cholesky};

struct Factor {
    /// Columns of `J`.
    j: Vec<Vec<f64>>,
    /// Columns of the upper-triangular `R` (column `k` uses entries `0..=k`).
    r: Vec<Vec<f64>>,
}

fn rotate(a: &mut [f64], b: &mut [f64], c: f64, s: f64) {
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let (xa, yb) = (*x, *y);
        *x = c * xa + s * yb;
        *y = -s * xa + c * yb;
    }
}

fn pair_mut<T>(v: &mut [T], i: usize, k: usize) -> (&mut T, &mut T) {
    debug_assert!(i < k);
    let (lo, hi) = v.split_at_mut(k);
    (&mut lo[i], &mut hi[0])
}

impl Factor {
    fn new(chol: &Cholesky) -> Self {
        let n = chol.dim();
        let mut j = Vec::with_capacity(n);
        let mut e = vec![0.0; n];
        for k in 0..n {
            e.iter_mut().for_each(|v| *v = 0.0);
            e[k] = 1.0;
            j.push(chol.backward(&e));
        }
        Factor { j, r: Vec::new() }
    }

    fn project(&self, normal: &[f64]) -> Vec<f64> {
        self.j.iter().map(|col| dot(col, normal)).collect()
    }

    /// Appends a constraint whose projection is `d = Jᵀ n`.
    fn add(&mut self, mut d: Vec<f64>) {
        let n = self.j.len();
        let q = self.r.len();
        for k in ((q + 1)..n).rev() {
            if d[k] == 0.0 {
                continue;
            }
            let h = libm::hypot(d[k - 1], d[k]);
            let (c, s) = (d[k - 1] / h, d[k] / h);
            d[k - 1] = h;
            d[k] = 0.0;
            let (a, b) = pair_mut(&mut self.j, k - 1, k);
            rotate(a, b, c, s);
        }
        d.truncate(q + 1);
        self.r.push(d);
    }

    /// Removes active constraint `k` and restores triangularity of `R`.
    fn drop(&mut self, k: usize) {
        self.r.remove(k);
        let q = self.r.len();
        for col in k..q {
            let (top, bottom) = (self.r[col][col], self.r[col][col + 1]);
            if bottom == 0.0 {
                self.r[col].truncate(col + 1);
                continue;
            }
            let h = libm::hypot(top, bottom);
            let (c, s) = (top / h, bottom / h);
            for later in col..q {
                let x = self.r[later][col];
                let y = self.r[later][col + 1];
                self.r[later][col] = c * x + s * y;
                self.r[later][col + 1] = -s * x + c * y;
            }
            self.r[col].truncate(col + 1);
            let (a, b) = pair_mut(&mut self.j, col, col + 1);
            rotate(a, b, c, s);
        }
    }

    /// Solves `R r = d[..q]`.
    fn back_substitute(&self, d: &[f64]) -> Vec<f64> {
        let q = self.r.len();
        let mut r = d[..q].to_vec();
        for i in (0..q).rev() {
            for k in (i + 1)..q {
                r[i] -= self.r[k][i] * r[k];
            }
            r[i] /= self.r[i][i];
        }
        r
    }
}

pub(super) fn solve(problem: &QpProblem, chol: &Cholesky, opts: &SolverOptions) -> SolveReport {
    let n = problem.dim();
    let (rows, rhs) = problem.inequality_rows();
    let m = rows.len();
    let bounds_start = m - n;
    let row_norms: Vec<f64> = rows.iter().map(|r| norm2(r)).collect();

    let mut x = chol.solve(&problem.b);
    let mut factor = Factor::new(chol);
    let mut active: Vec<usize> = Vec::new();
    let mut u: Vec<f64> = Vec::new();
    let mut iterations = 0;
    let mut status = SolveStatus::Converged;

    'outer: loop {
        let xnorm = norm2(&x);
        let mut pick: Option<(usize, f64)> = None;
        for i in 0..m {
            if active.contains(&i) {
                continue;
            }
            let s = dot(&rows[i], &x) - rhs[i];
            let scale = row_norms[i] * xnorm + rhs[i].abs();
            if s < -1e-13 * scale.max(f64::MIN_POSITIVE) {
                let score = s / row_norms[i];
                if pick.map_or(true, |(_, best)| score < best) {
                    pick = Some((i, score));
                }
            }
        }
        let Some((p, _)) = pick else { break };
        let normal = &rows[p];
        let mut u_plus = u.clone();
        u_plus.push(0.0);
        loop {
            iterations += 1;
            if iterations > opts.max_iter {
                status = SolveStatus::MaxIter;
                break 'outer;
            }
            let q = active.len();
            let d = factor.project(normal);
            let mut z = vec![0.0; n];
            for k in q..n {
                if d[k] != 0.0 {
                    for (zi, ji) in z.iter_mut().zip(&factor.j[k]) {
                        *zi += d[k] * ji;
                    }
                }
            }
            let r = factor.back_substitute(&d);
            let mut t1 = f64::INFINITY;
            let mut drop_at = None;
            for (k, &rk) in r.iter().enumerate() {
                if rk > 0.0 {
                    let ratio = u_plus[k] / rk;
                    if ratio < t1 {
                        t1 = ratio;
                        drop_at = Some(k);
                    }
                }
            }
            let dd = dot(&d, &d);
            let zn = dot(&d[q..], &d[q..]);
            let slack = dot(normal, &x) - rhs[p];
            let t2 = if zn > 1e-13 * dd { -slack / zn } else { f64::INFINITY };
            let t = t1.min(t2);
            if !t.is_finite() {
                status = SolveStatus::Infeasible;
                break 'outer;
            }
            for k in 0..q {
                u_plus[k] -= t * r[k];
            }
            u_plus[q] += t;
            if t2.is_finite() {
                for (xi, zi) in x.iter_mut().zip(&z) {
                    *xi += t * zi;
                }
            }
            if t2 <= t1 {
                factor.add(d);
                active.push(p);
                u = u_plus;
                continue 'outer;
            }
            let k = drop_at.expect("partial step has a blocking multiplier");
            factor.drop(k);
            active.remove(k);
            u_plus.remove(k);
        }
    }

    let mut multipliers = vec![0.0; m];
    for (&i, &ui) in active.iter().zip(&u) {
        multipliers[i] = ui.max(0.0);
        if i >= bounds_start {
            x[i - bounds_start] = 0.0;
        }
    }
    // round-off left on inactive bounds would otherwise count as support
    let floor = 1e-13 * x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for v in x.iter_mut() {
        if v.abs() <= floor {
            *v = 0.0;
        }
    }
    let mut active_set = active.clone();
    active_set.sort_unstable();
    SolveReport {
        objective: problem.objective(&x),
        kkt_residual: problem.kkt_residual(&x, &multipliers),
        iterations,
        status,
        active_set,
        multipliers,
        tikhonov_shift: 0.0,
        x,
    }
}
