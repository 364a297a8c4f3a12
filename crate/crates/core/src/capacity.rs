//! Capacity, capacitary distribution and equilibrium measure of a node subset,
//! each obtained from several independent extremal problems.
//!
//! * primal: minimum energy over unit-mass measures on `A`;
//! * dual: maximum of `G(ν) = 2ν(X) − ‖ν‖²` over measures on `A`;
//! * obstacle: minimum energy subject to `κν >= 1` on `A`;
//! * min-mass: least total mass subject to `κν >= 1` on `A` (linear program);
//! * max-mass: greatest mass on `A` subject to `κν <= 1` (linear program).

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::geometry::SubsetMask;
use crate::kernels::{Certificate, GramForm};
use crate::linalg::Matrix;
use crate::measures::{distance_squared, energy, potential, DiscreteMeasure, PotentialVector};
use crate::qp::{solve_lp, solve_qp, QpProblem, SolveReport, SolveStatus, SolverOptions};
use crate::report::{close, Report};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Formulation {
    Primal,
    Dual,
    Obstacle,
    MinMass,
    MaxMass,
    /// Brute-force enumeration (oracle).
    Exact,
}

impl Formulation {
    pub const ALL: [Formulation; 5] =
        [Formulation::Primal, Formulation::Dual, Formulation::Obstacle, Formulation::MinMass, Formulation::MaxMass];

    pub fn name(self) -> &'static str {
        match self {
            Formulation::Primal => "primal",
            Formulation::Dual => "dual",
            Formulation::Obstacle => "obstacle",
            Formulation::MinMass => "minmass",
            Formulation::MaxMass => "maxmass",
            Formulation::Exact => "exact",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().chain([Formulation::Exact]).find(|f| f.name() == s)
    }
}

/// Tolerances for equilibrium identities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Potential conditions and cross-formulation agreement.
    pub potential: f64,
    /// `γ(X) = ‖γ‖² = c`.
    pub identity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { potential: 1e-7, identity: 1e-8 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumResult {
    /// `c(A)`.
    pub capacity: f64,
    /// `w(A) = 1/c(A)`.
    pub robin: f64,
    /// Capacitary distribution (unit mass).
    pub lambda: DiscreteMeasure,
    /// Equilibrium measure `γ_A`.
    pub gamma: DiscreteMeasure,
    /// Extremal measure `γ_A / c(A)`.
    pub xi: DiscreteMeasure,
    pub formulation: Formulation,
    pub report: SolveReport,
    /// Potential conditions verified on `gamma` (obstacle formulation only).
    pub checks: Report,
}

/// Scalar digest of an [`EquilibriumResult`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumSummary {
    pub capacity: f64,
    pub robin: f64,
    pub mass: f64,
    pub energy: f64,
    pub potential_min_on_a: f64,
    pub potential_max_on_support: f64,
    pub kkt_residual: f64,
    pub formulation: Formulation,
}

impl EquilibriumResult {
    pub fn converged(&self) -> bool {
        self.report.converged()
    }

    pub fn skipped(&self) -> bool {
        self.report.status == SolveStatus::Skipped
    }

    pub fn potential(&self, gram: &GramForm) -> Result<PotentialVector> {
        potential(gram, &self.gamma)
    }

    pub fn summary(&self, gram: &GramForm, a: &SubsetMask) -> Result<EquilibriumSummary> {
        let pot = self.potential(gram)?;
        Ok(EquilibriumSummary {
            capacity: self.capacity,
            robin: self.robin,
            mass: self.gamma.mass(),
            energy: energy(gram, &self.gamma)?,
            potential_min_on_a: pot.min_on(a),
            potential_max_on_support: pot.max_on(&self.gamma.support()),
            kkt_residual: self.report.kkt_residual,
            formulation: self.formulation,
        })
    }

    fn build(gram: &GramForm, gamma: DiscreteMeasure, capacity: f64, formulation: Formulation, report: SolveReport) -> Result<Self> {
        let mass = gamma.mass();
        let lambda = if mass > 0.0 { gamma.scaled(1.0 / mass)? } else { DiscreteMeasure::zero(gram.node_set_id(), gram.len()) };
        let xi = if capacity > 0.0 { gamma.scaled(1.0 / capacity)? } else { lambda.clone() };
        Ok(EquilibriumResult { capacity, robin: 1.0 / capacity, lambda, gamma, xi, formulation, report, checks: Report::default() })
    }

    /// `A = ∅`: capacity 0, Robin constant `+∞`, all measures zero.
    fn empty(gram: &GramForm, formulation: Formulation) -> Self {
        let zero = DiscreteMeasure::zero(gram.node_set_id(), gram.len());
        EquilibriumResult {
            capacity: 0.0,
            robin: f64::INFINITY,
            lambda: zero.clone(),
            gamma: zero.clone(),
            xi: zero,
            formulation,
            report: SolveReport {
                x: Vec::new(),
                objective: 0.0,
                kkt_residual: 0.0,
                iterations: 0,
                status: SolveStatus::Converged,
                active_set: Vec::new(),
                multipliers: Vec::new(),
                tikhonov_shift: 0.0,
            },
            checks: Report::default(),
        }
    }

    fn skipped_result(gram: &GramForm, formulation: Formulation, reason: &str) -> Self {
        let mut r = Self::empty(gram, formulation);
        r.capacity = f64::NAN;
        r.robin = f64::NAN;
        r.report = SolveReport::skipped(0);
        r.checks.skip(formulation.name(), reason);
        r
    }
}

fn check_mask(gram: &GramForm, a: &SubsetMask) -> Result<()> {
    match a.max_index() {
        Some(i) if i >= gram.len() => Err(Error::IndexOutOfRange { index: i, len: gram.len() }),
        _ => Ok(()),
    }
}

/// Minimum energy over the probability simplex on `A`.
pub fn capacity_primal(gram: &GramForm, a: &SubsetMask, opts: &SolverOptions) -> Result<EquilibriumResult> {
    check_mask(gram, a)?;
    if a.is_empty() {
        return Ok(EquilibriumResult::empty(gram, Formulation::Primal));
    }
    let idx = a.indices();
    let q = gram.matrix().principal(idx);
    let report = solve_qp(&QpProblem::simplex(q.clone(), vec![0.0; idx.len()])?, opts)?;
    let w = q.bilinear(&report.x, &report.x);
    let c = 1.0 / w;
    let lambda = DiscreteMeasure::embed(gram.node_set_id(), gram.len(), idx, &report.x)?;
    let gamma = lambda.scaled(c)?;
    let mut r = EquilibriumResult::build(gram, gamma, c, Formulation::Primal, report)?;
    r.lambda = lambda;
    Ok(r)
}

/// Maximum of `G(ν)` over `ν >= 0` on `A`; the optimal value is `c(A)`.
pub fn capacity_dual(gram: &GramForm, a: &SubsetMask, opts: &SolverOptions) -> Result<EquilibriumResult> {
    check_mask(gram, a)?;
    if a.is_empty() {
        return Ok(EquilibriumResult::empty(gram, Formulation::Dual));
    }
    let idx = a.indices();
    let q = gram.matrix().principal(idx);
    let report = solve_qp(&QpProblem::nonneg(q.clone(), vec![1.0; idx.len()])?, opts)?;
    let g = 2.0 * report.x.iter().sum::<f64>() - q.bilinear(&report.x, &report.x);
    let gamma = DiscreteMeasure::embed(gram.node_set_id(), gram.len(), idx, &report.x)?;
    EquilibriumResult::build(gram, gamma, g, Formulation::Dual, report)
}

/// Minimum energy over `ν >= 0` on `support` with `κν >= 1` on `A`.
pub fn capacity_obstacle(
    gram: &GramForm,
    a: &SubsetMask,
    support: &SubsetMask,
    opts: &SolverOptions,
) -> Result<EquilibriumResult> {
    check_mask(gram, a)?;
    check_mask(gram, support)?;
    if !a.is_subset_of(support) {
        return Err(Error::InvalidInput("obstacle support must contain A".into()));
    }
    if a.is_empty() {
        return Ok(EquilibriumResult::empty(gram, Formulation::Obstacle));
    }
    let s = support.indices();
    let k = gram.matrix();
    let q = k.principal(s);
    let rows = k.submatrix(a.indices(), s);
    let problem = QpProblem::linear_ineq(q.clone(), vec![0.0; s.len()], rows, vec![1.0; a.len()])?;
    let report = solve_qp(&problem, opts)?;
    let gamma = DiscreteMeasure::embed(gram.node_set_id(), gram.len(), s, &report.x)?;
    let c = q.bilinear(&report.x, &report.x);
    let mut r = EquilibriumResult::build(gram, gamma, c, Formulation::Obstacle, report)?;
    r.checks = equilibrium_checks(gram, a, &r.gamma, None, &Tolerances::default())?;
    Ok(r)
}

/// Least total mass over `ν >= 0` on `X` with `κν >= 1` on `A`.
///
/// Requires both maximum principles; otherwise returns a skipped result.
pub fn capacity_min_mass(
    gram: &GramForm,
    a: &SubsetMask,
    certificate: &Certificate,
    opts: &SolverOptions,
) -> Result<EquilibriumResult> {
    check_mask(gram, a)?;
    if !certificate.both() {
        return Ok(EquilibriumResult::skipped_result(gram, Formulation::MinMass, "maximum principles not certified"));
    }
    if a.is_empty() {
        return Ok(EquilibriumResult::empty(gram, Formulation::MinMass));
    }
    let n = gram.len();
    let all: Vec<usize> = (0..n).collect();
    let rows = gram.matrix().submatrix(a.indices(), &all);
    let report = solve_lp(&vec![1.0; n], &rows, &vec![1.0; a.len()], opts)?;
    let gamma = DiscreteMeasure::embed(gram.node_set_id(), n, &all, &report.x)?;
    let value = report.objective;
    EquilibriumResult::build(gram, gamma, value, Formulation::MinMass, report)
}

/// Greatest mass over `ν >= 0` on `A` with `κν <= 1` at every node.
///
/// Requires both maximum principles; otherwise returns a skipped result.
pub fn capacity_max_mass(
    gram: &GramForm,
    a: &SubsetMask,
    certificate: &Certificate,
    opts: &SolverOptions,
) -> Result<EquilibriumResult> {
    check_mask(gram, a)?;
    if !certificate.both() {
        return Ok(EquilibriumResult::skipped_result(gram, Formulation::MaxMass, "maximum principles not certified"));
    }
    if a.is_empty() {
        return Ok(EquilibriumResult::empty(gram, Formulation::MaxMass));
    }
    let n = gram.len();
    let all: Vec<usize> = (0..n).collect();
    let k = gram.matrix().submatrix(&all, a.indices());
    let neg = Matrix::from_fn(n, a.len(), |i, j| -k[(i, j)]);
    let report = solve_lp(&vec![-1.0; a.len()], &neg, &vec![-1.0; n], opts)?;
    let gamma = DiscreteMeasure::embed(gram.node_set_id(), n, a.indices(), &report.x)?;
    let value = -report.objective;
    EquilibriumResult::build(gram, gamma, value, Formulation::MaxMass, report)
}

/// Dispatches on `formulation`; the obstacle support is the full node set.
pub fn capacity(
    gram: &GramForm,
    a: &SubsetMask,
    formulation: Formulation,
    certificate: &Certificate,
    opts: &SolverOptions,
) -> Result<EquilibriumResult> {
    match formulation {
        Formulation::Primal => capacity_primal(gram, a, opts),
        Formulation::Dual => capacity_dual(gram, a, opts),
        Formulation::Obstacle => capacity_obstacle(gram, a, &SubsetMask::all(gram.len()), opts),
        Formulation::MinMass => capacity_min_mass(gram, a, certificate, opts),
        Formulation::MaxMass => capacity_max_mass(gram, a, certificate, opts),
        Formulation::Exact => crate::oracle::exact_equilibrium(gram, a, &SubsetMask::all(gram.len())),
    }
}

/// Potential conditions of an equilibrium measure:
///
/// * `pr0`: `κγ >= 1` on `A`;
/// * `pr1`: `γ(X) = ‖γ‖²`;
/// * `pr2`: `κγ <= 1` on the support of `γ`;
/// * `pr3`: `κγ = 1` on the support of `γ`;
/// * `F`: `κγ <= 1` everywhere and `= 1` on `A` (only with a Frostman certificate).
pub fn equilibrium_checks(
    gram: &GramForm,
    a: &SubsetMask,
    gamma: &DiscreteMeasure,
    certificate: Option<&Certificate>,
    tol: &Tolerances,
) -> Result<Report> {
    let mut rep = Report::new("equilibrium");
    let pot = potential(gram, gamma)?;
    let supp = gamma.support();
    let t = tol.potential;
    let min_a = pot.min_on(a);
    rep.record("pr0", a.is_empty() || min_a >= 1.0 - t, format!("min potential on A = {min_a:.17e}"));
    let mass = gamma.mass();
    let en = energy(gram, gamma)?;
    rep.record("pr1", close(mass, en, tol.identity), format!("mass = {mass:.17e}, energy = {en:.17e}"));
    let max_s = pot.max_on(&supp);
    rep.record("pr2", supp.is_empty() || max_s <= 1.0 + t, format!("max potential on support = {max_s:.17e}"));
    let dev_s = supp.iter().map(|i| (pot.value(i) - 1.0).abs()).fold(0.0, f64::max);
    rep.record("pr3", dev_s <= t, format!("max |potential − 1| on support = {dev_s:.3e}"));
    match certificate {
        Some(c) if c.frostman_ok() => {
            let max_x = pot.values().iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let dev_a = a.iter().map(|i| (pot.value(i) - 1.0).abs()).fold(0.0, f64::max);
            rep.record(
                "F",
                max_x <= 1.0 + t && dev_a <= t,
                format!("max potential = {max_x:.17e}, max |potential − 1| on A = {dev_a:.3e}"),
            );
        }
        _ => rep.skip("F", "Frostman principle not certified"),
    }
    Ok(rep)
}

/// Runs all five formulations and checks that they agree, together with
/// `γ(X) >= ‖γ‖² >= c` and `κγ = 1` on `A`.
pub fn verify_theorem_1_1(
    gram: &GramForm,
    a: &SubsetMask,
    certificate: &Certificate,
    opts: &SolverOptions,
    tol: &Tolerances,
) -> Result<Report> {
    let mut rep = Report::new("theorem11");
    if a.is_empty() {
        rep.skip("agreement", "empty set: capacity 0 by convention");
        return Ok(rep);
    }
    let t = tol.potential;
    let reference = capacity_primal(gram, a, opts)?;
    rep.record("primal converged", reference.converged(), format!("kkt residual {:.3e}", reference.report.kkt_residual));
    let c = reference.capacity;
    for f in Formulation::ALL.into_iter().skip(1) {
        let r = capacity(gram, a, f, certificate, opts)?;
        if r.skipped() {
            rep.skip(f.name(), "maximum principles not certified");
            continue;
        }
        rep.record(
            &format!("{} converged", f.name()),
            r.converged(),
            format!("status {:?}, kkt residual {:.3e}", r.report.status, r.report.kkt_residual),
        );
        rep.record(&format!("{} capacity", f.name()), close(r.capacity, c, t), format!("{:.17e} vs {c:.17e}", r.capacity));
        let d = r.gamma.max_weight_diff(&reference.gamma);
        rep.record(&format!("{} gamma", f.name()), d <= t, format!("max weight difference {d:.3e}"));
    }
    let gamma = &reference.gamma;
    let mass = gamma.mass();
    let en = energy(gram, gamma)?;
    rep.record(
        "(d) mass >= energy >= c",
        mass >= en - t && en >= c - t,
        format!("mass {mass:.17e}, energy {en:.17e}, capacity {c:.17e}"),
    );
    if certificate.frostman_ok() {
        let pot = potential(gram, gamma)?;
        let dev = a.iter().map(|i| (pot.value(i) - 1.0).abs()).fold(0.0, f64::max);
        rep.record("(e) potential = 1 on A", dev <= t, format!("max deviation {dev:.3e}"));
    } else {
        rep.skip("(e) potential = 1 on A", "Frostman principle not certified");
    }
    rep.absorb(equilibrium_checks(gram, a, gamma, Some(certificate), tol)?);
    Ok(rep)
}

/// `κγ_A <= κν` at every node for each candidate `ν` with `κν >= 1` on `A`.
pub fn min_potential_check(
    gram: &GramForm,
    a: &SubsetMask,
    candidates: &[DiscreteMeasure],
    certificate: &Certificate,
    opts: &SolverOptions,
    tol: f64,
) -> Result<Report> {
    let mut rep = Report::new("min_potential");
    let gamma = capacity_dual(gram, a, opts)?.gamma;
    let pg = potential(gram, &gamma)?;
    let mut pots = Vec::with_capacity(candidates.len());
    for (k, nu) in candidates.iter().enumerate() {
        let pn = potential(gram, nu)?;
        if let Some(i) = a.iter().find(|&i| pn.value(i) < 1.0 - tol) {
            return Err(Error::InfeasibleCandidate { candidate: k, node: i });
        }
        pots.push(pn);
    }
    if !certificate.both() {
        rep.skip("minimum potential", "maximum principles not certified");
        return Ok(rep);
    }
    for (k, pn) in pots.iter().enumerate() {
        let excess = (0..gram.len()).map(|i| pg.value(i) - pn.value(i)).fold(f64::NEG_INFINITY, f64::max);
        rep.record(&format!("candidate {k}"), excess <= tol, format!("max (κγ − κν) = {excess:.3e}"));
    }
    Ok(rep)
}

/// Tally of [`mass_positivity_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct PositivityOutcome {
    pub report: Report,
    pub evaluated: usize,
    pub premise_unmet: usize,
    pub worst_excess: f64,
}

/// For pairs with `κμ <= κν` everywhere, checks `μ(X) <= ν(X)`.
pub fn mass_positivity_check(
    gram: &GramForm,
    pairs: &[(DiscreteMeasure, DiscreteMeasure)],
    certificate: &Certificate,
    tol: f64,
) -> Result<PositivityOutcome> {
    let mut rep = Report::new("positivity_of_mass");
    let mut out = PositivityOutcome { report: Report::default(), evaluated: 0, premise_unmet: 0, worst_excess: f64::NEG_INFINITY };
    if !certificate.both() {
        rep.skip("positivity of mass", "maximum principles not certified");
        out.report = rep;
        return Ok(out);
    }
    for (k, (mu, nu)) in pairs.iter().enumerate() {
        let pm = potential(gram, mu)?;
        let pn = potential(gram, nu)?;
        if (0..gram.len()).any(|i| pm.value(i) > pn.value(i) + tol) {
            out.premise_unmet += 1;
            continue;
        }
        out.evaluated += 1;
        let excess = mu.mass() - nu.mass();
        out.worst_excess = out.worst_excess.max(excess);
        if excess > tol {
            rep.record(&format!("pair {k}"), false, format!("mass excess {excess:.3e}"));
        }
    }
    rep.record(
        "positivity of mass",
        out.worst_excess <= tol,
        format!("{} pairs evaluated, {} without premise, worst excess {:.3e}", out.evaluated, out.premise_unmet, out.worst_excess),
    );
    out.report = rep;
    Ok(out)
}

/// `‖γ_1 − γ_2‖` in the energy norm.
pub fn energy_distance(gram: &GramForm, a: &DiscreteMeasure, b: &DiscreteMeasure) -> Result<f64> {
    Ok(libm::sqrt(distance_squared(gram, a, b)?))
}
