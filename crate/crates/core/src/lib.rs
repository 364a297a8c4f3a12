//! Inner capacities, equilibrium measures and balayage on finite kernel models.
//!
//! A model is a [`GramForm`]: the symmetric positive definite matrix of a
//! kernel on a finite node set, either given directly (matrix kernels) or
//! assembled from a Riesz, Newtonian or logarithmic kernel on a point cloud.
//! Measures are nonnegative weight vectors on the nodes. Every extremal
//! problem is reduced to a small dense QP, LP or LCP and solved by the
//! solvers in [`qp`]; the [`oracle`] module supplies exact enumeration
//! backends used to validate them.
//!
//! ```
//! use capax_core::{capacity_primal, GramForm, Matrix, SolverOptions, SubsetMask};
//!
//! let gram = GramForm::from_matrix(Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap()).unwrap();
//! let eq = capacity_primal(&gram, &SubsetMask::all(2), &SolverOptions::default()).unwrap();
//! assert!((eq.capacity - 2.0 / 3.0).abs() < 1e-12);
//! ```

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod balayage;
pub mod capacity;
pub mod convergence;
pub mod error;
pub mod geometry;
pub mod kernels;
pub mod linalg;
pub mod measures;
pub mod oracle;
pub mod qp;
pub mod report;

pub use balayage::{
    equilibrium_balayage_consistency, sweep, BalayageCheckOptions, sweep_constrained, sweep_potential_eq, sweep_projection, verify_balayage,
    BalayageDiagnostics, BalayageFormulation, BalayageResult,
};
pub use capacity::{
    capacity, capacity_dual, capacity_max_mass, capacity_min_mass, capacity_obstacle, capacity_primal,
    equilibrium_checks, mass_positivity_check, min_potential_check, verify_theorem_1_1, EquilibriumResult,
    EquilibriumSummary, Formulation, Tolerances,
};
pub use convergence::{
    balayage_exhaustion_check, energy_gap_check, potential_monotonicity_check, run_decreasing, run_increasing, ConvergenceReport, StageRecord,
};
pub use error::{Error, Result};
pub use geometry::{
    build_exhaustion, discretize, Exhaustion, ExhaustionMode, NodeSet, NodeSetId, ShapeSpec, StageOrder, SubsetMask,
};
pub use kernels::{assemble_gram, assemble_gram_with_constant, certify, Certificate, DiagPolicy, GramForm, Kernel};
pub use linalg::Matrix;
pub use measures::{energy, g_functional, mutual_energy, potential, DiscreteMeasure, PotentialVector};
pub use qp::{solve_lcp, solve_lp, solve_qp, Constraint, QpProblem, SolveReport, SolveStatus, SolverOptions};
pub use report::{Check, Outcome, Report};
