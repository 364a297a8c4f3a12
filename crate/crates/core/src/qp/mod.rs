//! Dense convex quadratic programs, linear programs and LCPs.
//!
//! All quadratic problems have the form `min ½ xᵀQx − bᵀx` with `Q` symmetric
//! positive definite, over one of three feasible sets:
//!
//! * `x >= 0`,
//! * the probability simplex `x >= 0, Σx = 1`,
//! * `A x >= c, x >= 0`.
//!
//! The first two are handled by accelerated projected gradient followed by a
//! primal active-set finish; the third by the Goldfarb–Idnani dual active-set
//! method. Strict convexity makes every minimizer unique.

mod dual_active_set;
mod lcp;
mod lp;
mod projected;

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm_inf, Cholesky, Matrix};

pub use lcp::solve_lcp;
pub use lp::solve_lp;

/// Above this estimated condition number the Hessian is shifted by `εI`.
pub const CONDITION_LIMIT: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    NonNeg,
    Simplex,
    /// `a x >= c` together with `x >= 0`.
    LinearIneq { a: Matrix, c: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    pub q: Matrix,
    pub b: Vec<f64>,
    pub constraint: Constraint,
}

impl QpProblem {
    pub fn new(q: Matrix, b: Vec<f64>, constraint: Constraint) -> Result<Self> {
        let p = QpProblem { q, b, constraint };
        p.validate()?;
        Ok(p)
    }

    pub fn nonneg(q: Matrix, b: Vec<f64>) -> Result<Self> {
        Self::new(q, b, Constraint::NonNeg)
    }

    pub fn simplex(q: Matrix, b: Vec<f64>) -> Result<Self> {
        Self::new(q, b, Constraint::Simplex)
    }

    pub fn linear_ineq(q: Matrix, b: Vec<f64>, a: Matrix, c: Vec<f64>) -> Result<Self> {
        Self::new(q, b, Constraint::LinearIneq { a, c })
    }

    pub fn dim(&self) -> usize {
        self.q.rows()
    }

    pub(crate) fn validate(&self) -> Result<()> {
        let n = self.q.rows();
        if !self.q.is_square() {
            return Err(Error::DimensionMismatch { expected: n, found: self.q.cols() });
        }
        if self.b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: self.b.len() });
        }
        if !self.q.is_symmetric(1e-12 * (1.0 + self.q.max_abs())) {
            return Err(Error::NotPositiveDefinite);
        }
        if let Constraint::LinearIneq { a, c } = &self.constraint {
            if a.cols() != n {
                return Err(Error::DimensionMismatch { expected: n, found: a.cols() });
            }
            if c.len() != a.rows() {
                return Err(Error::DimensionMismatch { expected: a.rows(), found: c.len() });
            }
        }
        Ok(())
    }

    pub fn objective(&self, x: &[f64]) -> f64 {
        0.5 * self.q.bilinear(x, x) - dot(&self.b, x)
    }

    /// Constraint rows `G x >= h`: the rows of `a` followed by the bounds.
    pub(crate) fn inequality_rows(&self) -> (Vec<Vec<f64>>, Vec<f64>) {
        let n = self.dim();
        let mut rows = Vec::new();
        let mut rhs = Vec::new();
        if let Constraint::LinearIneq { a, c } = &self.constraint {
            for i in 0..a.rows() {
                rows.push(a.row(i).to_vec());
                rhs.push(c[i]);
            }
        }
        for i in 0..n {
            let mut e = vec![0.0; n];
            e[i] = 1.0;
            rows.push(e);
            rhs.push(0.0);
        }
        (rows, rhs)
    }

    /// KKT residual of `x` with inequality multipliers `multipliers` (rows of
    /// `a` first, then bounds; ignored for `NonNeg`/`Simplex`).
    pub fn kkt_residual(&self, x: &[f64], multipliers: &[f64]) -> f64 {
        let g: Vec<f64> = self.q.mul_vec(x).iter().zip(&self.b).map(|(qx, b)| qx - b).collect();
        let infeas = x.iter().fold(0.0f64, |m, &v| m.max(-v));
        match &self.constraint {
            Constraint::NonNeg => x.iter().zip(&g).fold(infeas, |m, (&xi, &gi)| m.max(xi.min(gi).abs())),
            Constraint::Simplex => {
                let total: f64 = x.iter().sum();
                let tau = dot(x, &g) / total;
                x.iter()
                    .zip(&g)
                    .fold(infeas.max((total - 1.0).abs()), |m, (&xi, &gi)| m.max(xi.min(gi - tau).abs()))
            }
            Constraint::LinearIneq { .. } => {
                let (rows, rhs) = self.inequality_rows();
                let mut stat = g.clone();
                let mut worst = 0.0f64;
                for ((row, h), &u) in rows.iter().zip(&rhs).zip(multipliers) {
                    let slack = dot(row, x) - h;
                    worst = worst.max(-slack).max(-u).max((u * slack).abs());
                    if u != 0.0 {
                        for (s, r) in stat.iter_mut().zip(row) {
                            *s -= u * r;
                        }
                    }
                }
                worst.max(norm_inf(&stat))
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    Converged,
    MaxIter,
    Infeasible,
    Unbounded,
    /// Preconditions (e.g. maximum principles) not certified; nothing solved.
    Skipped,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub x: Vec<f64>,
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
    pub status: SolveStatus,
    /// Bound-active indices (`NonNeg`, `Simplex`), active constraint rows
    /// (`LinearIneq`: rows of `a` then `a.rows() + i` for bound `i`), or
    /// tight rows (LP).
    pub active_set: Vec<usize>,
    /// Inequality multipliers where the method produces them.
    pub multipliers: Vec<f64>,
    /// Diagonal shift applied by the ill-conditioning guard (0 if none).
    pub tikhonov_shift: f64,
}

impl SolveReport {
    pub fn converged(&self) -> bool {
        self.status == SolveStatus::Converged
    }

    pub fn skipped(n: usize) -> Self {
        SolveReport {
            x: vec![0.0; n],
            objective: f64::NAN,
            kkt_residual: f64::NAN,
            iterations: 0,
            status: SolveStatus::Skipped,
            active_set: Vec::new(),
            multipliers: Vec::new(),
            tikhonov_shift: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions { tol: 1e-9, max_iter: 100_000 }
    }
}

/// Solves a convex QP to KKT residual `opts.tol`.
pub fn solve_qp(problem: &QpProblem, opts: &SolverOptions) -> Result<SolveReport> {
    problem.validate()?;
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    let n = problem.dim();
    if n == 0 {
        return match problem.constraint {
            Constraint::Simplex => Err(Error::InvalidInput("simplex over zero variables".into())),
            _ => Ok(SolveReport {
                x: Vec::new(),
                objective: 0.0,
                kkt_residual: 0.0,
                iterations: 0,
                status: SolveStatus::Converged,
                active_set: Vec::new(),
                multipliers: Vec::new(),
                tikhonov_shift: 0.0,
            }),
        };
    }
    let chol = Cholesky::new(&problem.q).ok_or(Error::NotPositiveDefinite)?;
    let mut shifted = problem.clone();
    let mut shift = 0.0;
    if chol.condition_estimate() > CONDITION_LIMIT {
        shift = 1e-12 * problem.q.trace() / n as f64;
        shifted.q.add_diagonal(shift);
    }
    let chol = if shift > 0.0 { Cholesky::new(&shifted.q).ok_or(Error::NotPositiveDefinite)? } else { chol };

    let mut report = match &shifted.constraint {
        Constraint::NonNeg => projected::solve_nonneg(&shifted, &chol, opts),
        Constraint::Simplex => projected::solve_simplex(&shifted, &chol, opts),
        Constraint::LinearIneq { .. } => dual_active_set::solve(&shifted, &chol, opts),
    };
    report.tikhonov_shift = shift;
    if report.status == SolveStatus::Converged && !(report.kkt_residual <= opts.tol) {
        report.status = SolveStatus::MaxIter;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn k2() -> Matrix {
        Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap()
    }

    #[test]
    fn simplex_example() {
        let r = solve_qp(&QpProblem::simplex(k2(), vec![0.0, 0.0]).unwrap(), &SolverOptions::default()).unwrap();
        assert!(r.converged());
        assert!((r.x[0] - 0.5).abs() < 1e-12 && (r.x[1] - 0.5).abs() < 1e-12);
        assert!((r.objective - 0.75).abs() < 1e-12);
    }

    #[test]
    fn nonneg_interior_example() {
        let r = solve_qp(&QpProblem::nonneg(k2(), vec![1.0, 1.0]).unwrap(), &SolverOptions::default()).unwrap();
        assert!(r.converged());
        assert!((r.x[0] - 1.0 / 3.0).abs() < 1e-12 && (r.x[1] - 1.0 / 3.0).abs() < 1e-12);
        assert!(r.active_set.is_empty());
    }

    #[test]
    fn nonneg_active_bound() {
        let q = Matrix::from_rows(&[[1.0]]).unwrap();
        let r = solve_qp(&QpProblem::nonneg(q, vec![-1.0]).unwrap(), &SolverOptions::default()).unwrap();
        assert_eq!(r.x, vec![0.0]);
        assert_eq!(r.active_set, vec![0]);
    }

    #[test]
    fn linear_ineq_example() {
        // min ‖ν‖² with 2ν₀ + ν₁ >= 1 has its minimizer at (2/5, 1/5)
        let a = Matrix::from_rows(&[[2.0, 1.0]]).unwrap();
        let p = QpProblem::linear_ineq(Matrix::identity(2), vec![0.0, 0.0], a, vec![1.0]).unwrap();
        let r = solve_qp(&p, &SolverOptions::default()).unwrap();
        assert!(r.converged());
        assert!((r.x[0] - 0.4).abs() < 1e-12 && (r.x[1] - 0.2).abs() < 1e-12);
        assert_eq!(r.active_set, vec![0]);
    }

    #[test]
    fn infeasible_linear_ineq() {
        // x >= 0 and -x₀ - x₁ >= 1 cannot both hold
        let a = Matrix::from_rows(&[[-1.0, -1.0]]).unwrap();
        let p = QpProblem::linear_ineq(Matrix::identity(2), vec![0.0, 0.0], a, vec![1.0]).unwrap();
        let r = solve_qp(&p, &SolverOptions::default()).unwrap();
        assert_eq!(r.status, SolveStatus::Infeasible);
    }

    #[test]
    fn non_pd_rejected() {
        let q = Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        let p = QpProblem::nonneg(q, vec![1.0, 1.0]).unwrap();
        assert_eq!(solve_qp(&p, &SolverOptions::default()), Err(Error::NotPositiveDefinite));
    }

    #[test]
    fn ill_conditioned_shift_is_reported() {
        let q = Matrix::from_rows(&[[1.0, 0.0], [0.0, 1e-14]]).unwrap();
        let p = QpProblem::nonneg(q, vec![1.0, 0.0]).unwrap();
        let r = solve_qp(&p, &SolverOptions::default()).unwrap();
        assert!(r.tikhonov_shift > 0.0);
        assert!((r.x[0] - 1.0).abs() < 1e-9);
    }
}
