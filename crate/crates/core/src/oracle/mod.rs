//! Exact small-instance backends: active-set enumeration, the exact
//! equilibrium measure, certified kernel generation and self-energy
//! calibration.

pub mod brute_force;
pub mod generator;
pub mod self_energy;

use alloc::vec;
use alloc::vec::Vec;

pub use brute_force::{brute_force_lcp, brute_force_lp, brute_force_qp, ORACLE_MAX_DIM};
pub use generator::{certified_kernel_from_m, generate_certified_kernel, generate_mass_preserving_kernel, CertifiedKernel};
pub use self_energy::{self_energy_constant, SelfEnergyEstimate};

use crate::capacity::{EquilibriumResult, Formulation};
use crate::error::{Error, Result};
use crate::geometry::SubsetMask;
use crate::kernels::GramForm;
use crate::linalg::lu_solve;
use crate::measures::DiscreteMeasure;
use crate::qp::{QpProblem, SolveReport, SolveStatus};
use crate::report::Report;

/// Equilibrium measure of `A` by enumerating the support `T ⊆ A` of the
/// obstacle minimizer.
///
/// On each candidate `T` the minimizer satisfies `K_TT ν_T = 1`; a candidate
/// is admissible when `ν_T >= 0` and `κν >= 1` on `A`. The admissible one of
/// least energy (`= ν(X)`) is returned, together with the obstacle KKT
/// residual over `support` (multipliers `u = ν` on the rows of `A`).
pub fn exact_equilibrium(gram: &GramForm, a: &SubsetMask, support: &SubsetMask) -> Result<EquilibriumResult> {
    let n = gram.len();
    if let Some(i) = a.max_index().into_iter().chain(support.max_index()).find(|&i| i >= n) {
        return Err(Error::IndexOutOfRange { index: i, len: n });
    }
    if a.len() > ORACLE_MAX_DIM {
        return Err(Error::TooLarge { dim: a.len(), max: ORACLE_MAX_DIM });
    }
    if !a.is_subset_of(support) {
        return Err(Error::InvalidInput("support must contain A".into()));
    }
    let k = gram.matrix();
    let ai = a.indices();
    let zero = DiscreteMeasure::zero(gram.node_set_id(), n);
    if ai.is_empty() {
        return Ok(EquilibriumResult {
            capacity: 0.0,
            robin: f64::INFINITY,
            lambda: zero.clone(),
            gamma: zero.clone(),
            xi: zero,
            formulation: Formulation::Exact,
            report: SolveReport::skipped(0),
            checks: Report::default(),
        });
    }
    let tol = 1e-10;
    let mut best: Option<(f64, Vec<usize>, Vec<f64>)> = None;
    let mut enumerated = 0;
    for mask in 1u32..(1u32 << ai.len()) {
        enumerated += 1;
        let t: Vec<usize> = (0..ai.len()).filter(|&b| mask & (1 << b) != 0).map(|b| ai[b]).collect();
        let Some(sol) = lu_solve(&k.principal(&t), &vec![1.0; t.len()]) else { continue };
        if sol.iter().any(|&v| v < -tol) {
            continue;
        }
        let mut w = vec![0.0; n];
        for (&i, &v) in t.iter().zip(&sol) {
            w[i] = v.max(0.0);
        }
        let pot = k.mul_vec(&w);
        if ai.iter().any(|&i| pot[i] < 1.0 - tol) {
            continue;
        }
        let en: f64 = w.iter().sum();
        let replace = match &best {
            None => true,
            Some((e, bt, _)) => en < e - 1e-12 * e || (en <= e + 1e-12 * e && t < *bt),
        };
        if replace {
            best = Some((en, t, w));
        }
    }
    let (_, _, w) = best.ok_or(Error::InvalidInput("no admissible support: kernel has no finite equilibrium".into()))?;

    let s = support.indices();
    let x: Vec<f64> = s.iter().map(|&i| w[i]).collect();
    let problem = QpProblem::linear_ineq(k.principal(s), vec![0.0; s.len()], k.submatrix(ai, s), vec![1.0; ai.len()])?;
    let mut multipliers: Vec<f64> = ai.iter().map(|&i| w[i]).collect();
    multipliers.extend(core::iter::repeat_n(0.0, s.len()));
    let report = SolveReport {
        objective: problem.objective(&x),
        kkt_residual: problem.kkt_residual(&x, &multipliers),
        iterations: enumerated,
        status: SolveStatus::Converged,
        active_set: Vec::new(),
        multipliers,
        tikhonov_shift: 0.0,
        x,
    };
    let gamma = DiscreteMeasure::new(gram.node_set_id(), w)?;
    let c = gram.matrix().bilinear(gamma.weights(), gamma.weights());
    let mass = gamma.mass();
    Ok(EquilibriumResult {
        capacity: c,
        robin: 1.0 / c,
        lambda: gamma.scaled(1.0 / mass)?,
        xi: gamma.scaled(1.0 / c)?,
        gamma,
        formulation: Formulation::Exact,
        report,
        checks: Report::default(),
    })
}
