//! Balayage (sweeping) of a measure onto a node subset.
//!
//! Three independent routes to `μ^A`:
//!
//! * projection: the energy-norm projection of `μ` onto measures on `A`;
//! * constrained: least energy over `ν >= 0` anywhere with `κν >= κμ` on `A`;
//! * potential equation: the complementarity system on `A` whose solution
//!   has `κν = κμ` wherever it carries mass.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::capacity::capacity_dual;
use crate::error::{Error, Result};
use crate::geometry::SubsetMask;
use crate::kernels::{Certificate, GramForm};
use crate::measures::{potential, DiscreteMeasure};
use crate::qp::{solve_lcp, solve_qp, QpProblem, SolveReport, SolverOptions};
use crate::report::{Report, DEFAULT_CHECK_TOL};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BalayageFormulation {
    Projection,
    ConstrainedMinEnergy,
    PotentialEquation,
}

impl BalayageFormulation {
    pub const ALL: [BalayageFormulation; 3] = [
        BalayageFormulation::Projection,
        BalayageFormulation::ConstrainedMinEnergy,
        BalayageFormulation::PotentialEquation,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BalayageFormulation::Projection => "projection",
            BalayageFormulation::ConstrainedMinEnergy => "constrained_min_energy",
            BalayageFormulation::PotentialEquation => "potential_equation",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.name() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalayageDiagnostics {
    /// Largest `|κμ^A − κμ|` over nodes of `A` carrying swept mass.
    pub potential_match_on_a: f64,
    /// Whether `κμ^A <= κμ` holds at every node (to [`DEFAULT_CHECK_TOL`]).
    pub global_dominated: bool,
    /// `μ^A(X) / μ(X)` (1 when `μ = 0`).
    pub mass_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BalayageResult {
    pub swept: DiscreteMeasure,
    pub formulation: BalayageFormulation,
    pub report: SolveReport,
    pub diagnostics: BalayageDiagnostics,
}

fn prepare(gram: &GramForm, mu: &DiscreteMeasure, a: &SubsetMask) -> Result<Vec<f64>> {
    if a.is_empty() {
        return Err(Error::InvalidInput("cannot sweep onto the empty set".into()));
    }
    if let Some(i) = a.max_index().filter(|&i| i >= gram.len()) {
        return Err(Error::IndexOutOfRange { index: i, len: gram.len() });
    }
    Ok(potential(gram, mu)?.values().to_vec())
}

pub fn diagnostics(gram: &GramForm, mu: &DiscreteMeasure, swept: &DiscreteMeasure, a: &SubsetMask) -> Result<BalayageDiagnostics> {
    let pm = potential(gram, mu)?;
    let ps = potential(gram, swept)?;
    let potential_match_on_a = a
        .iter()
        .filter(|&i| swept.weight(i) > 0.0)
        .map(|i| (ps.value(i) - pm.value(i)).abs())
        .fold(0.0, f64::max);
    let global_dominated =
        (0..gram.len()).all(|i| ps.value(i) <= pm.value(i) + DEFAULT_CHECK_TOL * (1.0 + pm.value(i).abs()));
    let (ms, mm) = (swept.mass(), mu.mass());
    let mass_ratio = if mm > 0.0 { ms / mm } else { 1.0 };
    Ok(BalayageDiagnostics { potential_match_on_a, global_dominated, mass_ratio })
}

fn finish(
    gram: &GramForm,
    mu: &DiscreteMeasure,
    a: &SubsetMask,
    swept: DiscreteMeasure,
    formulation: BalayageFormulation,
    report: SolveReport,
) -> Result<BalayageResult> {
    let diagnostics = diagnostics(gram, mu, &swept, a)?;
    Ok(BalayageResult { swept, formulation, report, diagnostics })
}

/// Projection of `μ` onto the cone of measures on `A`:
/// minimize `νᵀK_AAν − 2νᵀ(Kμ)_A` over `ν >= 0`.
pub fn sweep_projection(gram: &GramForm, mu: &DiscreteMeasure, a: &SubsetMask, opts: &SolverOptions) -> Result<BalayageResult> {
    let kmu = prepare(gram, mu, a)?;
    let idx = a.indices();
    let b: Vec<f64> = idx.iter().map(|&i| kmu[i]).collect();
    let report = solve_qp(&QpProblem::nonneg(gram.matrix().principal(idx), b)?, opts)?;
    let swept = DiscreteMeasure::embed(gram.node_set_id(), gram.len(), idx, &report.x)?;
    finish(gram, mu, a, swept, BalayageFormulation::Projection, report)
}

/// Least energy over `ν >= 0` on all nodes with `κν >= κμ` on `A`.
pub fn sweep_constrained(gram: &GramForm, mu: &DiscreteMeasure, a: &SubsetMask, opts: &SolverOptions) -> Result<BalayageResult> {
    let kmu = prepare(gram, mu, a)?;
    let n = gram.len();
    let all: Vec<usize> = (0..n).collect();
    let rows = gram.matrix().submatrix(a.indices(), &all);
    let c: Vec<f64> = a.iter().map(|i| kmu[i]).collect();
    let report = solve_qp(&QpProblem::linear_ineq(gram.matrix().clone(), vec![0.0; n], rows, c)?, opts)?;
    let swept = DiscreteMeasure::embed(gram.node_set_id(), n, &all, &report.x)?;
    finish(gram, mu, a, swept, BalayageFormulation::ConstrainedMinEnergy, report)
}

/// Complementarity form on `A`: `v >= 0`, `K_AA v − (Kμ)_A >= 0`,
/// `vᵀ(K_AA v − (Kμ)_A) = 0`; weights off `A` are exactly zero.
pub fn sweep_potential_eq(gram: &GramForm, mu: &DiscreteMeasure, a: &SubsetMask, opts: &SolverOptions) -> Result<BalayageResult> {
    let kmu = prepare(gram, mu, a)?;
    let idx = a.indices();
    let q: Vec<f64> = idx.iter().map(|&i| kmu[i]).collect();
    let report = solve_lcp(&gram.matrix().principal(idx), &q, opts)?;
    let swept = DiscreteMeasure::embed(gram.node_set_id(), gram.len(), idx, &report.x)?;
    finish(gram, mu, a, swept, BalayageFormulation::PotentialEquation, report)
}

pub fn sweep(
    gram: &GramForm,
    mu: &DiscreteMeasure,
    a: &SubsetMask,
    formulation: BalayageFormulation,
    opts: &SolverOptions,
) -> Result<BalayageResult> {
    match formulation {
        BalayageFormulation::Projection => sweep_projection(gram, mu, a, opts),
        BalayageFormulation::ConstrainedMinEnergy => sweep_constrained(gram, mu, a, opts),
        BalayageFormulation::PotentialEquation => sweep_potential_eq(gram, mu, a, opts),
    }
}

/// Settings for [`verify_balayage`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BalayageCheckOptions {
    pub tol: f64,
    /// Random perturbations of `μ^A` used as competitors.
    pub samples: usize,
    pub seed: u64,
    pub solver: SolverOptions,
}

impl Default for BalayageCheckOptions {
    fn default() -> Self {
        BalayageCheckOptions { tol: DEFAULT_CHECK_TOL, samples: 20, seed: 0, solver: SolverOptions::default() }
    }
}

pub const NON_UNIQUE_MIN_MASS: &str = "min-mass non-unique";

/// Checks the characterizations of `μ^A`:
///
/// * (i) `κμ^A = κμ` on nodes of `A` carrying swept mass, `κμ^A >= κμ` on `A`;
/// * (ii) `κμ^A <= κμ` everywhere (domination certified);
/// * (iii) `κμ^A <= κν` everywhere for sampled `ν` with `κν >= κμ` on `A` (domination certified);
/// * (iv) `μ^A(X) <= ν(X)` for the same `ν` (both principles certified);
/// * (v) `μ^A(X) <= μ(X)` (both principles certified).
///
/// When `μ^A(X) = μ(X)` with `μ^A ≠ μ`, the measures `aμ + (1 − a)μ^A` all
/// have the least mass; this is flagged, not failed.
pub fn verify_balayage(
    gram: &GramForm,
    mu: &DiscreteMeasure,
    a: &SubsetMask,
    result: &BalayageResult,
    certificate: &Certificate,
    opts: &BalayageCheckOptions,
) -> Result<Report> {
    let kmu = prepare(gram, mu, a)?;
    let swept = &result.swept;
    let ks = potential(gram, swept)?.values().to_vec();
    let n = gram.len();
    let tol = opts.tol;
    let le = |x: f64, y: f64| x <= y + tol * (1.0 + y.abs());
    let mut rep = Report::new("balayage");

    let off_a = (0..n).filter(|&i| !a.contains(i)).map(|i| swept.weight(i)).fold(0.0, f64::max);
    rep.record("support in A", off_a <= tol, format!("largest weight off A {off_a:.3e}"));
    let on_active = a.iter().filter(|&i| swept.weight(i) > 0.0).map(|i| (ks[i] - kmu[i]).abs()).fold(0.0, f64::max);
    rep.record("(i) potential equality on swept support", on_active <= tol, format!("max deviation {on_active:.3e}"));
    let below = a.iter().map(|i| kmu[i] - ks[i]).fold(f64::NEG_INFINITY, f64::max);
    rep.record("(i) potential >= on A", a.iter().all(|i| le(kmu[i], ks[i])), format!("max (κμ − κμ^A) on A {below:.3e}"));

    if certificate.domination_ok() {
        let excess = (0..n).map(|i| ks[i] - kmu[i]).fold(f64::NEG_INFINITY, f64::max);
        rep.record("(ii) dominated everywhere", (0..n).all(|i| le(ks[i], kmu[i])), format!("max (κμ^A − κμ) {excess:.3e}"));
    } else {
        rep.skip("(ii) dominated everywhere", "domination principle not certified");
    }

    let competitors = competitors(gram, mu, swept, a, opts)?;
    let feasible: Vec<&DiscreteMeasure> = competitors
        .iter()
        .filter(|nu| {
            let kn = gram.apply(nu.weights());
            a.iter().all(|i| le(kmu[i], kn[i]))
        })
        .collect();
    if certificate.domination_ok() {
        let mut worst = f64::NEG_INFINITY;
        for nu in &feasible {
            let kn = gram.apply(nu.weights());
            for i in 0..n {
                worst = worst.max(ks[i] - kn[i] - tol * (1.0 + kn[i].abs()));
            }
        }
        rep.record(
            "(iii) minimum potential",
            worst <= 0.0,
            format!("{} competitors, worst excess over tolerance {worst:.3e}", feasible.len()),
        );
    } else {
        rep.skip("(iii) minimum potential", "domination principle not certified");
    }
    let ms = swept.mass();
    if certificate.both() {
        let worst = feasible.iter().map(|nu| ms - nu.mass()).fold(f64::NEG_INFINITY, f64::max);
        rep.record(
            "(iv) minimum mass",
            feasible.iter().all(|nu| le(ms, nu.mass())),
            format!("{} competitors, worst excess {worst:.3e}", feasible.len()),
        );
        let mm = mu.mass();
        rep.record("(v) mass not increased", le(ms, mm), format!("{ms:.17e} vs {mm:.17e}"));
        if (ms - mm).abs() <= tol * (1.0 + mm) && swept.max_weight_diff(mu) > tol {
            rep.flag(NON_UNIQUE_MIN_MASS);
            let mut spread = 0.0f64;
            for k in 0..=4 {
                let t = k as f64 / 4.0;
                let mix = mu.scaled(t)?.plus(&swept.scaled(1.0 - t)?)?;
                let kn = gram.apply(mix.weights());
                if !a.iter().all(|i| le(kmu[i], kn[i])) {
                    spread = f64::INFINITY;
                }
                spread = spread.max((mix.mass() - ms).abs());
            }
            rep.record(
                "minimum-mass family",
                spread <= tol * (1.0 + mm),
                format!("admissible mixtures of μ and μ^A, mass spread {spread:.3e}"),
            );
        }
    } else {
        rep.skip("(iv) minimum mass", "maximum principles not certified");
        rep.skip("(v) mass not increased", "maximum principles not certified");
    }
    Ok(rep)
}

/// `μ`, a rescaled equilibrium measure of `A`, and random nonnegative
/// perturbations of `μ^A`.
fn competitors(
    gram: &GramForm,
    mu: &DiscreteMeasure,
    swept: &DiscreteMeasure,
    a: &SubsetMask,
    opts: &BalayageCheckOptions,
) -> Result<Vec<DiscreteMeasure>> {
    let n = gram.len();
    let mut out = vec![mu.clone()];
    let kmu = gram.apply(mu.weights());
    let level = a.iter().map(|i| kmu[i]).fold(0.0, f64::max);
    let gamma = capacity_dual(gram, a, &opts.solver)?.gamma;
    out.push(gamma.scaled(level)?);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let scale = 1e-3f64.max(mu.mass());
    for _ in 0..opts.samples {
        let mut w = swept.weights().to_vec();
        for v in w.iter_mut() {
            if rng.gen_bool(0.5) {
                *v += scale * rng.gen::<f64>();
            }
        }
        out.push(DiscreteMeasure::new(gram.node_set_id(), w)?);
    }
    debug_assert!(out.iter().all(|m| m.len() == n));
    Ok(out)
}

/// `(γ_Q)^A = γ_A` for `A ⊆ Q`, and `(γ_A)^A = γ_A`.
pub fn equilibrium_balayage_consistency(
    gram: &GramForm,
    a: &SubsetMask,
    q: &SubsetMask,
    certificate: &Certificate,
    opts: &SolverOptions,
    tol: f64,
) -> Result<Report> {
    if !a.is_subset_of(q) {
        return Err(Error::InvalidInput("A must be contained in Q".into()));
    }
    let mut rep = Report::new("equilibrium_balayage");
    if a.is_empty() {
        rep.skip("sweep of γ_Q", "empty A");
        return Ok(rep);
    }
    let gamma_a = capacity_dual(gram, a, opts)?.gamma;
    let fixed = sweep_projection(gram, &gamma_a, a, opts)?.swept;
    let d = fixed.max_weight_diff(&gamma_a);
    rep.record("(γ_A)^A = γ_A", d <= tol, format!("max weight difference {d:.3e}"));
    if certificate.both() {
        let gamma_q = capacity_dual(gram, q, opts)?.gamma;
        let swept = sweep_projection(gram, &gamma_q, a, opts)?.swept;
        let d = swept.max_weight_diff(&gamma_a);
        rep.record("(γ_Q)^A = γ_A", d <= tol, format!("max weight difference {d:.3e}"));
    } else {
        rep.skip("(γ_Q)^A = γ_A", "maximum principles not certified");
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::certify;
    use crate::linalg::Matrix;

    fn k2() -> GramForm {
        GramForm::from_matrix(Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap()).unwrap()
    }

    fn m(g: &GramForm, w: &[f64]) -> DiscreteMeasure {
        DiscreteMeasure::on(g, w.to_vec()).unwrap()
    }

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    fn near(a: &DiscreteMeasure, b: &[f64]) -> bool {
        a.weights().iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12)
    }

    #[test]
    fn dirac_swept_onto_other_node() {
        let g = k2();
        let mu = m(&g, &[1.0, 0.0]);
        let a = SubsetMask::single(1);
        for f in BalayageFormulation::ALL {
            let r = sweep(&g, &mu, &a, f, &opts()).unwrap();
            assert!(near(&r.swept, &[0.0, 0.5]), "{f:?}: {:?}", r.swept);
        }
        let r = sweep_potential_eq(&g, &mu, &a, &opts()).unwrap();
        assert_eq!(r.swept.weights(), &[0.0, 0.5]);
        assert!(r.diagnostics.global_dominated);
        assert_eq!(r.diagnostics.mass_ratio, 0.5);
    }

    #[test]
    fn equilibrium_swept_onto_single_node() {
        let g = k2();
        let mu = m(&g, &[1.0 / 3.0, 1.0 / 3.0]);
        let r = sweep_projection(&g, &mu, &SubsetMask::single(0), &opts()).unwrap();
        assert!(near(&r.swept, &[0.5, 0.0]));
    }

    #[test]
    fn measures_on_a_are_fixed() {
        let g = k2();
        let mu = m(&g, &[0.3, 0.7]);
        for f in BalayageFormulation::ALL {
            let r = sweep(&g, &mu, &SubsetMask::all(2), f, &opts()).unwrap();
            assert!(near(&r.swept, &[0.3, 0.7]));
        }
    }

    #[test]
    fn hand_case_verification() {
        let g = k2();
        let mu = m(&g, &[1.0, 0.0]);
        let a = SubsetMask::single(1);
        let r = sweep_projection(&g, &mu, &a, &opts()).unwrap();
        let cert = certify(&g, 200, 1e-9, 1);
        let rep = verify_balayage(&g, &mu, &a, &r, &cert, &BalayageCheckOptions::default()).unwrap();
        assert!(rep.all_passed(), "{rep:#?}");
        assert_eq!(rep.count(crate::report::Outcome::Skipped), 0);
        assert!(!rep.has_flag(NON_UNIQUE_MIN_MASS));
    }

    #[test]
    fn consistency_hand_case() {
        let g = k2();
        let cert = certify(&g, 200, 1e-9, 1);
        let rep =
            equilibrium_balayage_consistency(&g, &SubsetMask::single(0), &SubsetMask::all(2), &cert, &opts(), 1e-12)
                .unwrap();
        assert!(rep.all_passed(), "{rep:#?}");
        let rep = equilibrium_balayage_consistency(&g, &SubsetMask::all(2), &SubsetMask::all(2), &cert, &opts(), 1e-12)
            .unwrap();
        assert!(rep.all_passed());
    }

    #[test]
    fn empty_target_rejected() {
        let g = k2();
        let mu = m(&g, &[1.0, 0.0]);
        assert!(sweep_projection(&g, &mu, &SubsetMask::empty(), &opts()).is_err());
    }
}
