//! Kernels, Gram assembly and empirical certification of the maximum principles.

use alloc::format;
use alloc::string::ToString;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geometry::{distance, NodeSet, NodeSetId};
use crate::linalg::{symmetric_min_eigenvalue, Cholesky, Matrix};
use crate::qp::{solve_qp, QpProblem, SolverOptions};
use crate::oracle::self_energy::{self_energy_constant, DEFAULT_CALIBRATION_SAMPLES, DEFAULT_CALIBRATION_SEED};

/// Symmetric pairwise interaction.
#[derive(Debug, Clone, PartialEq)]
pub enum Kernel {
    /// `|x - y|^(alpha - dim)` on ℝ^dim, `0 < alpha <= 2`, `alpha < dim`.
    Riesz { alpha: f64, dim: usize },
    /// `|x - y|^(2 - dim)`, `dim >= 3`.
    Newtonian { dim: usize },
    /// `-log |x - y|`, admitted only on sets of diameter below one.
    Logarithmic,
    /// Explicit symmetric matrix on node indices.
    Matrix(Matrix),
}

impl Kernel {
    pub fn riesz(alpha: f64, dim: usize) -> Result<Self> {
        let k = Kernel::Riesz { alpha, dim };
        k.validate()?;
        Ok(k)
    }

    pub fn newtonian(dim: usize) -> Result<Self> {
        let k = Kernel::Newtonian { dim };
        k.validate()?;
        Ok(k)
    }

    pub fn matrix(entries: Matrix) -> Result<Self> {
        let k = Kernel::Matrix(entries);
        k.validate()?;
        Ok(k)
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Kernel::Riesz { alpha, dim } => {
                if !(*alpha > 0.0 && *alpha <= 2.0) {
                    return Err(Error::InvalidKernel(format!("Riesz order {alpha} outside (0, 2]")));
                }
                if !(*alpha < *dim as f64) {
                    return Err(Error::InvalidKernel(format!("Riesz order {alpha} must be below dimension {dim}")));
                }
                Ok(())
            }
            Kernel::Newtonian { dim } if *dim < 3 => {
                Err(Error::InvalidKernel(format!("Newtonian kernel needs dimension >= 3, got {dim}")))
            }
            Kernel::Newtonian { .. } | Kernel::Logarithmic => Ok(()),
            Kernel::Matrix(m) => {
                if !m.is_square() {
                    return Err(Error::InvalidKernel("matrix kernel must be square".to_string()));
                }
                let n = m.rows();
                for i in 0..n {
                    for j in 0..n {
                        if i != j && !m[(i, j)].is_finite() {
                            return Err(Error::InvalidKernel(format!("off-diagonal entry ({i},{j}) is not finite")));
                        }
                        if m[(i, j)] != m[(j, i)] {
                            return Err(Error::InvalidKernel(format!("entries ({i},{j}) and ({j},{i}) differ")));
                        }
                    }
                    if m[(i, i)].is_nan() {
                        return Err(Error::InvalidKernel(format!("diagonal entry {i} is NaN")));
                    }
                }
                Ok(())
            }
        }
    }

    /// Declared ambient dimension, if the kernel has one.
    pub fn dim(&self) -> Option<usize> {
        match self {
            Kernel::Riesz { dim, .. } | Kernel::Newtonian { dim } => Some(*dim),
            _ => None,
        }
    }

    /// Riesz order `alpha` (2 for Newtonian).
    pub fn order(&self) -> Option<f64> {
        match self {
            Kernel::Riesz { alpha, .. } => Some(*alpha),
            Kernel::Newtonian { .. } => Some(2.0),
            _ => None,
        }
    }

    /// Homogeneity exponent `alpha - dim` of Riesz-type kernels.
    pub fn exponent(&self) -> Option<f64> {
        Some(self.order()? - self.dim()? as f64)
    }

    /// Kernel as a function of the distance `r > 0`.
    pub fn radial(&self, r: f64) -> Result<f64> {
        if r == 0.0 {
            return Ok(f64::INFINITY);
        }
        match self {
            Kernel::Riesz { .. } | Kernel::Newtonian { .. } => Ok(libm::pow(r, self.exponent().unwrap_or(0.0))),
            Kernel::Logarithmic => {
                if r >= 1.0 {
                    Err(Error::LogDomain { distance: r })
                } else {
                    Ok(-libm::log(r))
                }
            }
            Kernel::Matrix(_) => Err(Error::MatrixKernelNeedsIndices),
        }
    }

    /// `κ(x, y)`; `+∞` on the diagonal.
    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        if let Kernel::Matrix(_) = self {
            return Err(Error::MatrixKernelNeedsIndices);
        }
        if x.len() != y.len() {
            return Err(Error::DimensionMismatch { expected: x.len(), found: y.len() });
        }
        if let Some(d) = self.dim() {
            if x.len() != d {
                return Err(Error::DimensionMismatch { expected: d, found: x.len() });
            }
        }
        self.radial(distance(x, y))
    }

    pub fn eval_indices(&self, i: usize, j: usize) -> Result<f64> {
        match self {
            Kernel::Matrix(m) => {
                let n = m.rows();
                for k in [i, j] {
                    if k >= n {
                        return Err(Error::IndexOutOfRange { index: k, len: n });
                    }
                }
                Ok(m[(i, j)])
            }
            _ => Err(Error::InvalidKernel("analytic kernels are evaluated on points".to_string())),
        }
    }
}

/// How the Gram diagonal was obtained.
#[derive(Debug, Clone, PartialEq)]
pub enum DiagPolicy {
    /// Diagonal taken from a matrix kernel.
    Explicit,
    /// Self-energy of a uniform unit mass on each node's cell: `C·h^(α-n)`
    /// (Riesz) or `C - log h` (logarithmic), with `C` calibrated on a
    /// unit-diameter cell of dimension `cell_dim`.
    CellSelfEnergy { constant: f64, cell_dim: usize, diagonal: Vec<f64> },
}

/// Assembled, strictly positive definite Gram matrix of a kernel on a node set.
#[derive(Debug, Clone, PartialEq)]
pub struct GramForm {
    matrix: Matrix,
    node_set_id: NodeSetId,
    diag_policy: DiagPolicy,
}

impl GramForm {
    /// Wraps an explicit symmetric positive definite matrix on abstract nodes.
    pub fn from_matrix(matrix: Matrix) -> Result<Self> {
        let nodes = NodeSet::abstract_nodes(matrix.rows());
        assemble_gram(&Kernel::matrix(matrix)?, &nodes)
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }

    pub fn len(&self) -> usize {
        self.matrix.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn node_set_id(&self) -> NodeSetId {
        self.node_set_id
    }

    pub fn diag_policy(&self) -> &DiagPolicy {
        &self.diag_policy
    }

    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[(i, j)]
    }

    /// `K w` for a raw weight vector.
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(w)
    }

    /// `K w` where `w` is given only on `cols` (zero elsewhere).
    pub fn apply_restricted(&self, cols: &[usize], w: &[f64]) -> Vec<f64> {
        let n = self.len();
        (0..n)
            .map(|i| {
                let row = self.matrix.row(i);
                cols.iter().zip(w).map(|(&j, &wj)| row[j] * wj).sum()
            })
            .collect()
    }
}

/// Assembles the Gram matrix, calibrating the cell self-energy constant with
/// the default Monte-Carlo budget.
pub fn assemble_gram(kernel: &Kernel, nodes: &NodeSet) -> Result<GramForm> {
    match kernel {
        Kernel::Matrix(_) => assemble_gram_with_constant(kernel, nodes, 0.0),
        _ => {
            if nodes.is_abstract() {
                return Err(Error::DimensionMismatch { expected: kernel.dim().unwrap_or(2), found: 0 });
            }
            let c = self_energy_constant(kernel, nodes.cell_dim(), DEFAULT_CALIBRATION_SAMPLES, DEFAULT_CALIBRATION_SEED)?;
            assemble_gram_with_constant(kernel, nodes, c.value)
        }
    }
}

/// Assembles the Gram matrix with a known self-energy constant (ignored for matrix kernels).
pub fn assemble_gram_with_constant(kernel: &Kernel, nodes: &NodeSet, constant: f64) -> Result<GramForm> {
    kernel.validate()?;
    let n = nodes.len();
    let (matrix, diag_policy) = match kernel {
        Kernel::Matrix(m) => {
            if m.rows() != n {
                return Err(Error::DimensionMismatch { expected: m.rows(), found: n });
            }
            (m.clone(), DiagPolicy::Explicit)
        }
        _ => {
            if let Some(d) = kernel.dim() {
                if nodes.dim() != d {
                    return Err(Error::DimensionMismatch { expected: d, found: nodes.dim() });
                }
            }
            if matches!(kernel, Kernel::Logarithmic) {
                let diam = nodes.diameter();
                if diam >= 1.0 {
                    return Err(Error::LogDomain { distance: diam });
                }
            }
            let diagonal: Vec<f64> = nodes
                .cell_sizes()
                .iter()
                .map(|&h| match kernel.exponent() {
                    Some(e) => constant * libm::pow(h, e),
                    None => constant - libm::log(h),
                })
                .collect();
            let mut m = Matrix::zeros(n, n);
            for i in 0..n {
                m[(i, i)] = diagonal[i];
                for j in (i + 1)..n {
                    let v = kernel.eval(nodes.point(i), nodes.point(j))?;
                    m[(i, j)] = v;
                    m[(j, i)] = v;
                }
            }
            (m, DiagPolicy::CellSelfEnergy { constant, cell_dim: nodes.cell_dim(), diagonal })
        }
    };
    if Cholesky::new(&matrix).is_none() {
        return Err(Error::IllConditioned { min_eigenvalue: symmetric_min_eigenvalue(&matrix) });
    }
    Ok(GramForm { matrix, node_set_id: nodes.id(), diag_policy })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Principle {
    Frostman,
    Domination,
}

/// Outcome of sampled principle checks.
#[derive(Debug, Clone, PartialEq)]
pub struct PrincipleReport {
    pub principle: Principle,
    pub trials: usize,
    pub passed: usize,
    pub failed: usize,
    pub vacuous: usize,
    /// Largest amount by which a conclusion was violated (0 if none).
    pub worst_violation: f64,
}

impl PrincipleReport {
    pub fn holds(&self) -> bool {
        self.failed == 0
    }

    fn new(principle: Principle) -> Self {
        PrincipleReport { principle, trials: 0, passed: 0, failed: 0, vacuous: 0, worst_violation: 0.0 }
    }

    fn record(&mut self, outcome: CaseOutcome) {
        self.trials += 1;
        match outcome {
            CaseOutcome::Vacuous => self.vacuous += 1,
            CaseOutcome::Pass => self.passed += 1,
            CaseOutcome::Fail { violation } => {
                self.failed += 1;
                self.worst_violation = self.worst_violation.max(violation);
            }
        }
    }
}

/// Result of testing a principle on one explicit instance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CaseOutcome {
    /// The premise did not hold.
    Vacuous,
    Pass,
    Fail { violation: f64 },
}

/// Frostman on one measure: `Kw <= 1` on the support of `w` must give `Kw <= 1` everywhere.
pub fn frostman_case(gram: &GramForm, w: &[f64], tol: f64) -> CaseOutcome {
    let p = gram.apply(w);
    let on_support = w
        .iter()
        .zip(&p)
        .filter(|(wi, _)| **wi > 0.0)
        .map(|(_, pi)| *pi)
        .fold(f64::NEG_INFINITY, f64::max);
    if on_support > 1.0 + tol {
        return CaseOutcome::Vacuous;
    }
    let bound = on_support.max(1.0);
    let global = p.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if global <= bound + tol {
        CaseOutcome::Pass
    } else {
        CaseOutcome::Fail { violation: global - bound }
    }
}

/// Domination on one pair: `Kμ <= Kν` on the support of `μ` must give `Kμ <= Kν` everywhere.
pub fn domination_case(gram: &GramForm, mu: &[f64], nu: &[f64], tol: f64) -> CaseOutcome {
    let pm = gram.apply(mu);
    let pn = gram.apply(nu);
    let premise = mu.iter().enumerate().filter(|(_, &m)| m > 0.0).all(|(i, _)| pm[i] <= pn[i] + tol);
    if !premise {
        return CaseOutcome::Vacuous;
    }
    let violation = pm.iter().zip(&pn).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max);
    if violation <= tol {
        CaseOutcome::Pass
    } else {
        CaseOutcome::Fail { violation }
    }
}

fn random_measure(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    let k = rng.gen_range(1..=n);
    let mut idx: Vec<usize> = (0..n).collect();
    for i in 0..k {
        let j = rng.gen_range(i..n);
        idx.swap(i, j);
    }
    let mut w = vec![0.0; n];
    for &i in &idx[..k] {
        let u: f64 = rng.gen_range(0.0..1.0);
        // cubing spreads magnitudes so near-sparse measures are also tried
        w[i] = 1e-3 + u * u * u;
    }
    w
}

fn record_normalized(report: &mut PrincipleReport, gram: &GramForm, mut w: Vec<f64>, tol: f64) {
    let p = gram.apply(&w);
    let s = w.iter().zip(&p).filter(|(wi, _)| **wi > 0.0).map(|(_, pi)| *pi).fold(f64::NEG_INFINITY, f64::max);
    if !(s > 0.0) {
        report.record(CaseOutcome::Vacuous);
        return;
    }
    w.iter_mut().for_each(|v| *v /= s);
    report.record(frostman_case(gram, &w, tol));
}

/// Samples random measures normalized so their potential peaks at 1 on their
/// own support, and checks the potential stays below `1 + tol` everywhere.
///
/// Besides `trials` random measures, up to 20 equilibrium measures (of the
/// whole node set and of random subsets) are probed: their potential is flat
/// on the support, which is where violations show up first.
pub fn check_frostman(gram: &GramForm, trials: usize, tol: f64, seed: u64) -> PrincipleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = PrincipleReport::new(Principle::Frostman);
    let n = gram.len();
    if n == 0 {
        return report;
    }
    for _ in 0..trials.max(1) {
        let w = random_measure(&mut rng, n);
        record_normalized(&mut report, gram, w, tol);
    }
    for k in 0..(trials / 50).clamp(1, 20) {
        let s: Vec<usize> = if k == 0 {
            (0..n).collect()
        } else {
            random_measure(&mut rng, n).iter().enumerate().filter(|(_, &v)| v > 0.0).map(|(i, _)| i).collect()
        };
        let Ok(problem) = QpProblem::nonneg(gram.matrix().principal(&s), vec![1.0; s.len()]) else { continue };
        let Ok(sol) = solve_qp(&problem, &SolverOptions::default()) else { continue };
        let mut w = vec![0.0; n];
        for (&i, &v) in s.iter().zip(&sol.x) {
            w[i] = v;
        }
        record_normalized(&mut report, gram, w, tol);
    }
    report
}

/// Samples pairs `(μ, ν)`, scales `μ` so that `Kμ <= Kν` holds on the
/// support of `μ` with equality somewhere, and checks domination everywhere.
pub fn check_domination(gram: &GramForm, trials: usize, tol: f64, seed: u64) -> PrincipleReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = PrincipleReport::new(Principle::Domination);
    let n = gram.len();
    if n == 0 {
        return report;
    }
    for _ in 0..trials.max(1) {
        let mut mu = random_measure(&mut rng, n);
        let nu = random_measure(&mut rng, n);
        let pm = gram.apply(&mu);
        let pn = gram.apply(&nu);
        let mut scale = f64::INFINITY;
        let mut vacuous = false;
        for i in (0..n).filter(|&i| mu[i] > 0.0) {
            if pm[i] > 0.0 {
                if pn[i] <= 0.0 {
                    vacuous = true;
                    break;
                }
                scale = scale.min(pn[i] / pm[i]);
            }
        }
        if vacuous || !scale.is_finite() {
            report.record(CaseOutcome::Vacuous);
            continue;
        }
        mu.iter_mut().for_each(|v| *v *= scale);
        report.record(domination_case(gram, &mu, &nu, tol));
    }
    report
}

/// Sampled evidence for both maximum principles on one Gram form.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    pub frostman: PrincipleReport,
    pub domination: PrincipleReport,
}

impl Certificate {
    pub fn frostman_ok(&self) -> bool {
        self.frostman.holds()
    }

    pub fn domination_ok(&self) -> bool {
        self.domination.holds()
    }

    pub fn both(&self) -> bool {
        self.frostman_ok() && self.domination_ok()
    }
}

pub fn certify(gram: &GramForm, trials: usize, tol: f64, seed: u64) -> Certificate {
    Certificate {
        frostman: check_frostman(gram, trials, tol, seed),
        domination: check_domination(gram, trials, tol, seed.wrapping_add(1)),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{discretize, ShapeSpec};

    fn m(rows: &[[f64; 2]]) -> Matrix {
        Matrix::from_rows(rows).unwrap()
    }

    #[test]
    fn eval_examples() {
        let newton = Kernel::newtonian(3).unwrap();
        assert_eq!(newton.eval(&[0.0, 0.0, 0.0], &[1.0, 0.0, 0.0]).unwrap(), 1.0);
        let riesz = Kernel::riesz(1.0, 3).unwrap();
        assert_eq!(riesz.eval(&[0.0, 0.0, 0.0], &[0.0, 2.0, 0.0]).unwrap(), 0.25);
        let mk = Kernel::matrix(m(&[[2.0, 1.0], [1.0, 2.0]])).unwrap();
        assert_eq!(mk.eval_indices(0, 1).unwrap(), 1.0);
        assert_eq!(newton.eval(&[0.5; 3], &[0.5; 3]).unwrap(), f64::INFINITY);
    }

    #[test]
    fn eval_errors() {
        let newton = Kernel::newtonian(3).unwrap();
        assert!(matches!(newton.eval(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::DimensionMismatch { .. })));
        assert!(matches!(Kernel::Logarithmic.eval(&[0.0, 0.0], &[1.0, 0.0]), Err(Error::LogDomain { .. })));
        assert!(Kernel::riesz(2.5, 3).is_err());
        assert!(Kernel::riesz(2.0, 2).is_err());
        assert!(Kernel::newtonian(2).is_err());
        assert!(Kernel::matrix(m(&[[2.0, 1.0], [0.5, 2.0]])).is_err());
    }

    #[test]
    fn matrix_gram_passthrough() {
        let g = GramForm::from_matrix(m(&[[2.0, 1.0], [1.0, 2.0]])).unwrap();
        assert_eq!(g.matrix(), &m(&[[2.0, 1.0], [1.0, 2.0]]));
        assert_eq!(g.diag_policy(), &DiagPolicy::Explicit);
    }

    #[test]
    fn indefinite_matrix_reports_eigenvalue() {
        match GramForm::from_matrix(m(&[[1.0, 2.0], [2.0, 1.0]])) {
            Err(Error::IllConditioned { min_eigenvalue }) => assert!((min_eigenvalue + 1.0).abs() < 1e-10),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn newtonian_two_nodes() {
        let nodes = NodeSet::new(&[vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0]], Some(vec![0.1, 0.1]), 3).unwrap();
        let k = Kernel::newtonian(3).unwrap();
        let g = assemble_gram(&k, &nodes).unwrap();
        assert_eq!(g.entry(0, 1), 1.0);
        let c = match g.diag_policy() {
            DiagPolicy::CellSelfEnergy { constant, .. } => *constant,
            _ => unreachable!(),
        };
        assert!((g.entry(0, 0) - c / 0.1).abs() < 1e-12);
        // uniform ball of diameter 1: exact self-energy 12/5
        assert!((c - 2.4).abs() < 0.02, "calibrated constant {c}");
    }

    #[test]
    fn log_kernel_requires_small_diameter() {
        let nodes = NodeSet::new(&[vec![0.0, 0.0], vec![1.5, 0.0]], None, 2).unwrap();
        assert!(matches!(assemble_gram(&Kernel::Logarithmic, &nodes), Err(Error::LogDomain { .. })));
        let small = discretize(&ShapeSpec::Box { lo: vec![0.0, 0.0], hi: vec![0.5, 0.5] }, 4).unwrap();
        let g = assemble_gram(&Kernel::Logarithmic, &small).unwrap();
        for i in 0..g.len() {
            let off = (0..g.len()).filter(|&j| j != i).map(|j| g.entry(i, j)).fold(f64::MIN, f64::max);
            assert!(g.entry(i, i) >= off);
        }
    }

    #[test]
    fn frostman_examples() {
        let g = GramForm::from_matrix(m(&[[2.0, 1.0], [1.0, 2.0]])).unwrap();
        assert_eq!(frostman_case(&g, &[1.0 / 3.0, 1.0 / 3.0], 1e-12), CaseOutcome::Pass);
        assert_eq!(frostman_case(&g, &[0.5, 0.0], 1e-12), CaseOutcome::Pass);
        let id = GramForm::from_matrix(Matrix::identity(2)).unwrap();
        assert_eq!(frostman_case(&id, &[1.0, 0.0], 1e-12), CaseOutcome::Pass);
        assert!(check_frostman(&id, 200, 1e-9, 3).holds());
    }

    #[test]
    fn domination_examples() {
        let g = GramForm::from_matrix(m(&[[2.0, 1.0], [1.0, 2.0]])).unwrap();
        assert_eq!(domination_case(&g, &[0.5, 0.0], &[1.0 / 3.0, 1.0 / 3.0], 1e-12), CaseOutcome::Pass);
        assert_eq!(domination_case(&g, &[0.3, 0.2], &[0.3, 0.2], 0.0), CaseOutcome::Pass);
        let id = GramForm::from_matrix(Matrix::identity(2)).unwrap();
        assert_eq!(domination_case(&id, &[1.0, 0.0], &[0.0, 2.0], 1e-12), CaseOutcome::Vacuous);
    }

    #[test]
    fn violating_matrix_fails_frostman() {
        // off-diagonal coupling larger than the self-energy of the charged node
        let bad = GramForm::from_matrix(Matrix::from_rows(&[[1.0, 1.5], [1.5, 4.0]]).unwrap()).unwrap();
        assert_eq!(frostman_case(&bad, &[1.0, 0.0], 1e-12), CaseOutcome::Fail { violation: 0.5 });
        assert!(!check_frostman(&bad, 500, 1e-9, 1).holds());
    }

    #[test]
    fn halving_cells_raises_diagonal_only() {
        let pts = vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 1.0, 0.0]];
        let a = NodeSet::new(&pts, Some(vec![0.2; 3]), 3).unwrap();
        let b = NodeSet::new(&pts, Some(vec![0.1; 3]), 3).unwrap();
        let k = Kernel::riesz(1.5, 3).unwrap();
        let ga = assemble_gram_with_constant(&k, &a, 2.0).unwrap();
        let gb = assemble_gram_with_constant(&k, &b, 2.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                if i == j {
                    assert!(gb.entry(i, i) > ga.entry(i, i));
                } else {
                    assert_eq!(ga.entry(i, j), gb.entry(i, j));
                }
            }
        }
    }
}
