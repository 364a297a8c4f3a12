//! Capacities, equilibrium measures and potentials along monotone set
//! families, and the energy-gap identity.

use alloc::format;
use alloc::vec::Vec;

use crate::balayage::sweep_projection;
use crate::capacity::{capacity_dual, capacity_primal, EquilibriumResult};
use crate::error::{Error, Result};
use crate::geometry::{Exhaustion, ExhaustionMode, SubsetMask};
use crate::kernels::{Certificate, GramForm};
use crate::measures::{distance_squared, energy, DiscreteMeasure};
use crate::qp::SolverOptions;
use crate::report::Report;

/// One stage of a monotone run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StageRecord {
    pub stage: usize,
    pub size: usize,
    pub capacity: f64,
    pub mass: f64,
    pub energy: f64,
    /// Largest violation of `κγ >= 1` on the stage or `κγ <= 1` on the support of `γ`.
    pub max_potential_violation: f64,
    /// Energy-norm distance `‖γ_stage − γ_limit‖`.
    pub distance_to_limit: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceReport {
    pub stages: Vec<StageRecord>,
    /// Equilibrium of the limit set solved directly (primal form).
    pub limit: EquilibriumResult,
    pub report: Report,
}

fn stage_record(gram: &GramForm, stage: usize, mask: &SubsetMask, eq: &EquilibriumResult, limit: &DiscreteMeasure) -> Result<StageRecord> {
    let pot = gram.apply(eq.gamma.weights());
    let below = mask.iter().map(|i| 1.0 - pot[i]).fold(0.0, f64::max);
    let above = eq.gamma.support().iter().map(|i| pot[i] - 1.0).fold(0.0, f64::max);
    Ok(StageRecord {
        stage,
        size: mask.len(),
        capacity: eq.capacity,
        mass: eq.gamma.mass(),
        energy: energy(gram, &eq.gamma)?,
        max_potential_violation: below.max(above),
        distance_to_limit: libm::sqrt(distance_squared(gram, &eq.gamma, limit)?.max(0.0)),
    })
}

fn slack(tol: f64, x: f64) -> f64 {
    tol * (1.0 + x.abs())
}

fn run(
    gram: &GramForm,
    exhaustion: &Exhaustion,
    certificate: &Certificate,
    opts: &SolverOptions,
    tol: f64,
    title: &str,
) -> Result<ConvergenceReport> {
    let increasing = exhaustion.mode() == ExhaustionMode::Increasing;
    let limit = capacity_primal(gram, exhaustion.limit(), opts)?;
    let mut solved = Vec::with_capacity(exhaustion.stages().len());
    for mask in exhaustion.stages() {
        solved.push(capacity_dual(gram, mask, opts)?);
    }
    // monotonicity is judged only once every stage is available
    let stages = exhaustion
        .stages()
        .iter()
        .zip(&solved)
        .enumerate()
        .map(|(j, (mask, eq))| stage_record(gram, j, mask, eq, &limit.gamma))
        .collect::<Result<Vec<_>>>()?;

    let mut rep = Report::new(title);
    let mut worst = 0.0f64;
    for w in stages.windows(2) {
        let step = if increasing { w[0].capacity - w[1].capacity } else { w[1].capacity - w[0].capacity };
        worst = worst.max(step - slack(tol, w[1].capacity));
    }
    let what = if increasing { "capacity nondecreasing" } else { "capacity nonincreasing" };
    rep.record(what, worst <= 0.0, format!("worst excess over tolerance {worst:.3e}"));

    let last = stages.last().expect("exhaustions have at least one stage");
    rep.record(
        "limit capacity matches direct solve",
        (last.capacity - limit.capacity).abs() <= slack(tol, limit.capacity),
        format!("{:.17e} vs {:.17e}", last.capacity, limit.capacity),
    );
    rep.record("γ converges to γ of the limit", last.distance_to_limit <= libm::sqrt(tol), format!("final distance {:.3e}", last.distance_to_limit));

    if increasing {
        let worst = stages
            .windows(2)
            .map(|w| w[1].distance_to_limit - w[0].distance_to_limit)
            .fold(f64::NEG_INFINITY, f64::max);
        rep.record(
            "distance to limit nonincreasing",
            stages.len() < 2 || worst <= libm::sqrt(tol),
            format!("largest increase {worst:.3e}"),
        );
    } else {
        // ‖γ_t − γ‖² <= ‖γ_t‖² − ‖γ‖²
        let worst = stages
            .iter()
            .map(|s| s.distance_to_limit * s.distance_to_limit - (s.energy - limit.capacity) - slack(tol, s.energy))
            .fold(f64::NEG_INFINITY, f64::max);
        rep.record("energy gap bounds distance to limit", worst <= 0.0, format!("worst excess {worst:.3e}"));
    }

    if certificate.both() {
        let pots: Vec<Vec<f64>> = solved.iter().map(|eq| gram.apply(eq.gamma.weights())).collect();
        let lim = gram.apply(limit.gamma.weights());
        let mut bad: Option<(usize, usize, f64)> = None;
        let mut note = |j: usize, i: usize, excess: f64| {
            if excess > 0.0 && bad.is_none_or(|b| excess > b.2) {
                bad = Some((j, i, excess));
            }
        };
        for (j, w) in pots.windows(2).enumerate() {
            for i in 0..gram.len() {
                let step = if increasing { w[0][i] - w[1][i] } else { w[1][i] - w[0][i] };
                note(j + 1, i, step - slack(tol, w[1][i]));
            }
        }
        for (j, p) in pots.iter().enumerate() {
            for i in 0..gram.len() {
                let gap = if increasing { p[i] - lim[i] } else { lim[i] - p[i] };
                note(j, i, gap - slack(tol, lim[i]));
            }
        }
        let detail = match bad {
            None => "monotone at every node".into(),
            Some((j, i, e)) => format!("stage {j}, node {i}: excess {e:.3e}"),
        };
        let what = if increasing { "potentials nondecreasing to the limit" } else { "potentials nonincreasing to the limit" };
        rep.record(what, bad.is_none(), detail);
    } else {
        rep.skip("potential monotonicity", "maximum principles not certified");
    }
    Ok(ConvergenceReport { stages, limit, report: rep })
}

/// Increasing family `K₁ ⊂ K₂ ⊂ … ⊂ A`.
pub fn run_increasing(
    gram: &GramForm,
    exhaustion: &Exhaustion,
    certificate: &Certificate,
    opts: &SolverOptions,
    tol: f64,
) -> Result<ConvergenceReport> {
    if exhaustion.mode() != ExhaustionMode::Increasing {
        return Err(Error::InvalidInput("run_increasing needs an increasing exhaustion".into()));
    }
    run(gram, exhaustion, certificate, opts, tol, "increasing")
}

/// Decreasing family `A₁ ⊃ A₂ ⊃ …`; the limit is the last (smallest) stage.
pub fn run_decreasing(
    gram: &GramForm,
    stages: &[SubsetMask],
    certificate: &Certificate,
    opts: &SolverOptions,
    tol: f64,
) -> Result<ConvergenceReport> {
    let ex = Exhaustion::from_stages(stages.to_vec(), ExhaustionMode::Decreasing)?;
    run(gram, &ex, certificate, opts, tol, "decreasing")
}

fn nested(gram: &GramForm, a: &SubsetMask, h: &SubsetMask) -> Result<()> {
    if let Some(i) = a.max_index().filter(|&i| i >= gram.len()) {
        return Err(Error::IndexOutOfRange { index: i, len: gram.len() });
    }
    if !h.is_subset_of(a) {
        return Err(Error::InvalidInput("H must be contained in A".into()));
    }
    Ok(())
}

/// `‖γ_A − γ_H‖² <= ‖γ_A‖² − ‖γ_H‖²` for `H ⊆ A`, with equality under Frostman.
pub fn energy_gap_check(
    gram: &GramForm,
    a: &SubsetMask,
    h: &SubsetMask,
    certificate: &Certificate,
    opts: &SolverOptions,
    tol: f64,
) -> Result<Report> {
    nested(gram, a, h)?;
    let ga = capacity_dual(gram, a, opts)?.gamma;
    let gh = capacity_dual(gram, h, opts)?.gamma;
    let lhs = distance_squared(gram, &ga, &gh)?;
    let rhs = energy(gram, &ga)? - energy(gram, &gh)?;
    let mut rep = Report::new("energy_gap");
    let detail = format!("‖γ_A − γ_H‖² = {lhs:.17e}, ‖γ_A‖² − ‖γ_H‖² = {rhs:.17e}");
    rep.record("energy gap inequality", lhs <= rhs + slack(tol, rhs), detail.clone());
    if certificate.frostman_ok() {
        rep.record("energy gap equality", (lhs - rhs).abs() <= slack(tol, rhs), detail);
    } else {
        rep.skip("energy gap equality", "Frostman principle not certified");
    }
    Ok(rep)
}

/// `κγ_H <= κγ_A` at every node for `H ⊆ A`.
pub fn potential_monotonicity_check(
    gram: &GramForm,
    a: &SubsetMask,
    h: &SubsetMask,
    certificate: &Certificate,
    opts: &SolverOptions,
    tol: f64,
) -> Result<Report> {
    nested(gram, a, h)?;
    let mut rep = Report::new("potential_monotonicity");
    if !certificate.both() {
        rep.skip("κγ_H <= κγ_A", "maximum principles not certified");
        return Ok(rep);
    }
    let pa = gram.apply(capacity_dual(gram, a, opts)?.gamma.weights());
    let ph = gram.apply(capacity_dual(gram, h, opts)?.gamma.weights());
    let worst = (0..gram.len())
        .map(|i| (i, ph[i] - pa[i] - slack(tol, pa[i])))
        .fold((0, f64::NEG_INFINITY), |b, c| if c.1 > b.1 { c } else { b });
    let detail = if worst.1 > 0.0 {
        format!("node {}: κγ_H exceeds κγ_A by {:.3e}", worst.0, ph[worst.0] - pa[worst.0])
    } else {
        "holds at every node".into()
    };
    rep.record("κγ_H <= κγ_A", gram.is_empty() || worst.1 <= 0.0, detail);
    Ok(rep)
}

/// Sweeps of `μ` onto the stages of an increasing family approach `μ^A`
/// in energy norm, monotonically; under domination the potentials rise.
pub fn balayage_exhaustion_check(
    gram: &GramForm,
    mu: &DiscreteMeasure,
    exhaustion: &Exhaustion,
    certificate: &Certificate,
    opts: &SolverOptions,
    tol: f64,
) -> Result<Report> {
    if exhaustion.mode() != ExhaustionMode::Increasing {
        return Err(Error::InvalidInput("balayage exhaustion needs an increasing family".into()));
    }
    let target = sweep_projection(gram, mu, exhaustion.limit(), opts)?.swept;
    let mut dist = Vec::new();
    let mut pots = Vec::new();
    for mask in exhaustion.stages() {
        let s = sweep_projection(gram, mu, mask, opts)?.swept;
        dist.push(libm::sqrt(distance_squared(gram, &s, &target)?.max(0.0)));
        pots.push(gram.apply(s.weights()));
    }
    let mut rep = Report::new("balayage_exhaustion");
    let rise = dist.windows(2).map(|w| w[1] - w[0]).fold(f64::NEG_INFINITY, f64::max);
    rep.record("distance to μ^A nonincreasing", dist.len() < 2 || rise <= libm::sqrt(tol), format!("largest increase {rise:.3e}"));
    let last = *dist.last().expect("exhaustions have at least one stage");
    rep.record("sweeps converge to μ^A", last <= libm::sqrt(tol), format!("final distance {last:.3e}"));
    if certificate.domination_ok() {
        let worst = pots
            .windows(2)
            .flat_map(|w| (0..gram.len()).map(move |i| w[0][i] - w[1][i] - slack(tol, w[1][i])))
            .fold(f64::NEG_INFINITY, f64::max);
        rep.record("potentials nondecreasing", pots.len() < 2 || worst <= 0.0, format!("worst excess {worst:.3e}"));
    } else {
        rep.skip("potentials nondecreasing", "domination principle not certified");
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernels::certify;
    use crate::linalg::Matrix;
    use crate::oracle::generate_certified_kernel;

    fn k2() -> GramForm {
        GramForm::from_matrix(Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap()).unwrap()
    }

    fn cert(g: &GramForm) -> Certificate {
        certify(g, 200, 1e-9, 5)
    }

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    #[test]
    fn increasing_hand_case() {
        let g = k2();
        let ex = Exhaustion::from_stages(vec![SubsetMask::single(0), SubsetMask::all(2)], ExhaustionMode::Increasing).unwrap();
        let r = run_increasing(&g, &ex, &cert(&g), &opts(), 1e-9).unwrap();
        assert!(r.report.all_passed(), "{:#?}", r.report);
        assert!((r.stages[0].capacity - 0.5).abs() < 1e-12);
        assert!((r.stages[1].capacity - 2.0 / 3.0).abs() < 1e-12);
        assert!(r.stages[1].distance_to_limit < 1e-7);
    }

    #[test]
    fn single_stage_is_trivial() {
        let g = k2();
        let ex = Exhaustion::from_stages(vec![SubsetMask::all(2)], ExhaustionMode::Increasing).unwrap();
        assert!(run_increasing(&g, &ex, &cert(&g), &opts(), 1e-9).unwrap().report.all_passed());
    }

    #[test]
    fn decreasing_hand_case() {
        let g = k2();
        let r = run_decreasing(&g, &[SubsetMask::all(2), SubsetMask::single(0)], &cert(&g), &opts(), 1e-9).unwrap();
        assert!(r.report.all_passed(), "{:#?}", r.report);
        assert!((r.stages[0].capacity - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.limit.capacity - 0.5).abs() < 1e-12);
    }

    #[test]
    fn decreasing_random_kernel() {
        let ck = generate_certified_kernel(8, 11).unwrap();
        let g = ck.gram();
        let stages: Vec<SubsetMask> =
            [8usize, 6, 4, 2].iter().map(|&k| SubsetMask::new(0..k, 8).unwrap()).collect();
        let r = run_decreasing(&g, &stages, &ck.certificate, &opts(), 1e-7).unwrap();
        assert!(r.report.all_passed(), "{:#?}", r.report);
    }

    #[test]
    fn wrong_direction_rejected() {
        let g = k2();
        let ex = Exhaustion::from_stages(vec![SubsetMask::all(2), SubsetMask::single(1)], ExhaustionMode::Decreasing).unwrap();
        assert!(run_increasing(&g, &ex, &cert(&g), &opts(), 1e-9).is_err());
    }

    #[test]
    fn energy_gap_hand_case() {
        let g = k2();
        let rep = energy_gap_check(&g, &SubsetMask::all(2), &SubsetMask::single(0), &cert(&g), &opts(), 1e-12).unwrap();
        assert!(rep.all_passed(), "{rep:#?}");
        assert_eq!(rep.count(crate::report::Outcome::Pass), 2);
        let same = energy_gap_check(&g, &SubsetMask::all(2), &SubsetMask::all(2), &cert(&g), &opts(), 1e-12).unwrap();
        assert!(same.all_passed());
        assert!(energy_gap_check(&g, &SubsetMask::single(0), &SubsetMask::all(2), &cert(&g), &opts(), 1e-12).is_err());
    }

    #[test]
    fn potential_monotonicity_hand_case() {
        let g = k2();
        let rep =
            potential_monotonicity_check(&g, &SubsetMask::all(2), &SubsetMask::single(0), &cert(&g), &opts(), 1e-12).unwrap();
        assert!(rep.all_passed());
        assert_eq!(rep.count(crate::report::Outcome::Pass), 1);
    }

    #[test]
    fn balayage_along_exhaustion() {
        let ck = generate_certified_kernel(7, 2).unwrap();
        let g = ck.gram();
        let mu = DiscreteMeasure::dirac(g.node_set_id(), 7, 6).unwrap();
        let stages: Vec<SubsetMask> = (1..=4).map(|k| SubsetMask::new(0..k, 7).unwrap()).collect();
        let ex = Exhaustion::from_stages(stages, ExhaustionMode::Increasing).unwrap();
        let rep = balayage_exhaustion_check(&g, &mu, &ex, &ck.certificate, &opts(), 1e-9).unwrap();
        assert!(rep.all_passed(), "{rep:#?}");
    }
}
