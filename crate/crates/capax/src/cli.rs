//! `capax` subcommands.
//!
//! Exit codes: 0 on success, 1 on input errors, 2 when a solver did not
//! converge or (for `verify` and `converge`) a check failed.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use capax_core::balayage::BalayageCheckOptions;
use capax_core::kernels::PrincipleReport;
use capax_core::oracle::self_energy::{DEFAULT_CALIBRATION_SAMPLES, DEFAULT_CALIBRATION_SEED};
use capax_core::oracle::ORACLE_MAX_DIM;
use capax_core::{
    assemble_gram_with_constant, build_exhaustion, capacity_dual, capacity_max_mass, capacity_min_mass,
    capacity_obstacle, capacity_primal, certify, discretize, energy_gap_check, equilibrium_balayage_consistency,
    equilibrium_checks, potential, potential_monotonicity_check, run_decreasing, run_increasing, sweep,
    verify_balayage, verify_theorem_1_1, BalayageFormulation, Certificate, ExhaustionMode, Formulation, GramForm,
    Kernel, NodeSet, Report, SolverOptions, StageOrder, SubsetMask, Tolerances,
};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::cache::Cache;
use crate::formats::{self, KernelSpec};
use crate::json::{self, num};

pub const EXIT_OK: u8 = 0;
pub const EXIT_INPUT: u8 = 1;
pub const EXIT_NUMERICAL: u8 = 2;

/// Tolerance of the sampled principle checks.
pub const CERTIFICATION_TOL: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(name = "capax", version, about = "Capacities, equilibrium measures and balayage on discrete kernel models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    /// Kernel description (JSON).
    #[arg(long)]
    pub kernel: Option<PathBuf>,
    /// Shape description (JSON); required for analytic kernels.
    #[arg(long, conflicts_with = "matrix")]
    pub shape: Option<PathBuf>,
    /// Explicit Gram matrix (JSON), in place of --kernel/--shape.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    /// Overrides the shape's resolution.
    #[arg(long)]
    pub resolution: Option<usize>,
    /// Monte-Carlo samples for the cell self-energy constant.
    #[arg(long, default_value_t = DEFAULT_CALIBRATION_SAMPLES)]
    pub calibration_samples: usize,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Tolerance of the reported checks.
    #[arg(long, default_value_t = 1e-7)]
    pub tol: f64,
    /// Seed of every sampler (certification, competitor sampling).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Samples per maximum principle when certifying the kernel.
    #[arg(long, default_value_t = 1000)]
    pub trials: usize,
    /// Output directory.
    #[arg(short = 'o', long = "out", default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    Theorem11,
    Balayage,
    Convergence,
    Principles,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Mode {
    Increasing,
    Decreasing,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Order {
    Index,
    Radial,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Capacity and equilibrium measure of a subset.
    Capacity {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "all")]
        subset: String,
        /// primal, dual, obstacle, minmass, maxmass or exact.
        #[arg(long, default_value = "dual")]
        formulation: String,
        /// Certify the maximum principles and run the checks that need them.
        #[arg(long)]
        certify: bool,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Sweep a measure onto a subset by all three formulations.
    Balayage {
        #[command(flatten)]
        model: ModelArgs,
        /// `dirac:I`, `uniform` or a CSV file of `index,weight` rows.
        #[arg(long)]
        measure: String,
        #[arg(long)]
        subset: String,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Capacities along a monotone family of subsets.
    Converge {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, default_value = "all")]
        subset: String,
        #[arg(long, default_value_t = 3)]
        stages: usize,
        #[arg(long, value_enum, default_value_t = Mode::Increasing)]
        mode: Mode,
        #[arg(long, value_enum, default_value_t = Order::Radial)]
        order: Order,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Itemized verification suites.
    Verify {
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long, default_value = "all")]
        subset: String,
        /// Enclosing set `Q ⊇ A` for the nested checks.
        #[arg(long, default_value = "all")]
        superset: String,
        #[arg(long, default_value = "uniform")]
        measure: String,
        #[arg(long, default_value_t = 3)]
        stages: usize,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Self-energy constant of a unit-diameter cell.
    Calibrate {
        #[arg(long)]
        kernel: PathBuf,
        /// Intrinsic cell dimension (defaults to the kernel's dimension, 2 for log).
        #[arg(long)]
        cell_dim: Option<usize>,
        #[arg(long, default_value_t = DEFAULT_CALIBRATION_SAMPLES)]
        samples: usize,
        #[arg(long, default_value_t = DEFAULT_CALIBRATION_SEED)]
        seed: u64,
        /// Also write the result to this file.
        #[arg(short = 'o', long = "out")]
        out: Option<PathBuf>,
    },
}

pub struct Model {
    pub nodes: NodeSet,
    pub gram: GramForm,
    pub calibration: Value,
}

impl ModelArgs {
    pub fn load(&self, cache: &Cache) -> Result<Model> {
        let spec = self.kernel.as_deref().map(formats::read_kernel).transpose()?;
        let matrix = match (&self.matrix, &spec) {
            (Some(_), Some(s)) if !matches!(s, KernelSpec::Matrix { .. }) => {
                bail!("--matrix cannot be combined with an analytic kernel")
            }
            (Some(path), _) => Some(formats::read_matrix(path)?),
            (None, Some(KernelSpec::Matrix { entries })) => Some(formats::matrix_from_rows(entries)?),
            (None, Some(_)) => None,
            (None, None) => bail!("either --kernel or --matrix is required"),
        };
        if let Some(m) = matrix {
            let nodes = NodeSet::abstract_nodes(m.rows());
            let gram = GramForm::from_matrix(m)?;
            return Ok(Model { nodes, gram, calibration: Value::Null });
        }
        let kernel = spec.expect("checked above").to_kernel()?;
        let Some(shape_path) = &self.shape else { bail!("analytic kernels need --shape") };
        let base = shape_path.parent().unwrap_or(Path::new("."));
        let (shape, resolution) = formats::read_shape(shape_path)?.to_shape(base, self.resolution)?;
        let nodes = discretize(&shape, resolution)?;
        let (est, cached) =
            cache.self_energy(&kernel, nodes.cell_dim(), self.calibration_samples, DEFAULT_CALIBRATION_SEED)?;
        let gram = assemble_gram_with_constant(&kernel, &nodes, est.value)?;
        let calibration = json!({
            "constant": num(est.value),
            "stderr": num(est.stderr),
            "samples": est.samples,
            "cell_dim": nodes.cell_dim(),
            "cached": cached,
        });
        Ok(Model { nodes, gram, calibration })
    }
}

fn principle(r: &PrincipleReport) -> Value {
    json!({
        "holds": r.holds(),
        "trials": r.trials,
        "passed": r.passed,
        "failed": r.failed,
        "vacuous": r.vacuous,
        "worst_violation": num(r.worst_violation),
    })
}

fn certificate(c: &Certificate) -> Value {
    json!({ "frostman": principle(&c.frostman), "domination": principle(&c.domination) })
}

fn out_dir(common: &CommonArgs) -> Result<&Path> {
    fs::create_dir_all(&common.out).with_context(|| format!("creating {}", common.out.display()))?;
    Ok(&common.out)
}

fn tolerances(tol: f64) -> Tolerances {
    Tolerances { potential: tol, identity: tol.min(Tolerances::default().identity) }
}

fn numerical(ok: bool) -> u8 {
    if ok {
        EXIT_OK
    } else {
        EXIT_NUMERICAL
    }
}

fn cmd_capacity(model: &ModelArgs, subset: &str, formulation: &str, want_cert: bool, common: &CommonArgs) -> Result<u8> {
    let Some(f) = Formulation::parse(formulation) else {
        bail!("unknown formulation {formulation:?}; expected primal, dual, obstacle, minmass, maxmass or exact")
    };
    let cache = Cache::from_env();
    let m = model.load(&cache)?;
    let a = formats::parse_subset(subset, &m.nodes)?;
    let g = &m.gram;
    let opts = SolverOptions::default();
    let needs_cert = want_cert || matches!(f, Formulation::MinMass | Formulation::MaxMass);
    let cert = needs_cert.then(|| certify(g, common.trials, CERTIFICATION_TOL, common.seed));
    let eq = match f {
        Formulation::Primal => capacity_primal(g, &a, &opts)?,
        Formulation::Dual => capacity_dual(g, &a, &opts)?,
        Formulation::Obstacle => capacity_obstacle(g, &a, &SubsetMask::all(g.len()), &opts)?,
        Formulation::MinMass => capacity_min_mass(g, &a, cert.as_ref().expect("certified"), &opts)?,
        Formulation::MaxMass => capacity_max_mass(g, &a, cert.as_ref().expect("certified"), &opts)?,
        Formulation::Exact => {
            if a.len() > ORACLE_MAX_DIM {
                bail!("the exact oracle handles at most {ORACLE_MAX_DIM} nodes in the subset");
            }
            capax_core::oracle::exact_equilibrium(g, &a, &SubsetMask::all(g.len()))?
        }
    };
    let dir = out_dir(common)?;
    let mut result = json!({ "formulation": f.name(), "nodes": g.len(), "subset_size": a.len() });
    if eq.skipped() {
        result["status"] = json!("skipped");
        result["reason"] = json!("maximum principles not certified");
    } else {
        let checks = equilibrium_checks(g, &a, &eq.gamma, cert.as_ref(), &tolerances(common.tol))?;
        let obj = result.as_object_mut().expect("object");
        for (k, v) in json::summary(&eq.summary(g, &a)?).as_object().expect("object") {
            obj.insert(k.clone(), v.clone());
        }
        obj.insert("status".into(), json!(json::status(eq.report.status)));
        obj.insert("iterations".into(), json!(eq.report.iterations));
        obj.insert("checks".into(), json::report(&checks));
        formats::write_measure_csv(&dir.join("weights.csv"), &eq.gamma)?;
        formats::write_potential_csv(&dir.join("potential.csv"), &potential(g, &eq.gamma)?)?;
    }
    result["calibration"] = m.calibration;
    if let Some(c) = &cert {
        result["certificate"] = certificate(c);
    }
    json::write(&dir.join("result.json"), &result)?;
    if eq.skipped() {
        eprintln!("capax: {} skipped: maximum principles not certified", f.name());
    } else if !eq.converged() {
        eprintln!("capax: solver stopped with status {}", json::status(eq.report.status));
    }
    Ok(numerical(eq.converged()))
}

fn balayage_runs(
    g: &GramForm,
    mu: &capax_core::DiscreteMeasure,
    a: &SubsetMask,
) -> Result<Vec<capax_core::BalayageResult>> {
    BalayageFormulation::ALL.iter().map(|&f| Ok(sweep(g, mu, a, f, &SolverOptions::default())?)).collect()
}

fn agreement(runs: &[capax_core::BalayageResult], tol: f64, rep: &mut Report) {
    for r in &runs[1..] {
        let d = r.swept.max_weight_diff(&runs[0].swept);
        rep.record(
            &format!("{} matches projection", r.formulation.name()),
            d <= tol,
            format!("max weight difference {d:.3e}"),
        );
    }
}

fn cmd_balayage(model: &ModelArgs, measure: &str, subset: &str, common: &CommonArgs) -> Result<u8> {
    let m = model.load(&Cache::from_env())?;
    let g = &m.gram;
    let a = formats::parse_subset(subset, &m.nodes)?;
    let mu = formats::parse_measure(measure, g)?;
    let runs = balayage_runs(g, &mu, &a)?;
    let cert = certify(g, common.trials, CERTIFICATION_TOL, common.seed);
    let mut rep = Report::new("balayage");
    agreement(&runs, common.tol, &mut rep);
    let check = BalayageCheckOptions { tol: common.tol, seed: common.seed, ..Default::default() };
    rep.absorb(verify_balayage(g, &mu, &a, &runs[0], &cert, &check)?);
    let dir = out_dir(common)?;
    let mut forms = serde_json::Map::new();
    for r in &runs {
        formats::write_measure_csv(&dir.join(format!("swept_{}.csv", r.formulation.name())), &r.swept)?;
        forms.insert(
            r.formulation.name().into(),
            json!({
                "solver": json::solve_report(&r.report),
                "mass": num(r.swept.mass()),
                "weights": json::nums(r.swept.weights()),
                "potential_match_on_A": num(r.diagnostics.potential_match_on_a),
                "global_dominated": r.diagnostics.global_dominated,
                "mass_ratio": num(r.diagnostics.mass_ratio),
            }),
        );
    }
    let out = json!({
        "nodes": g.len(),
        "subset_size": a.len(),
        "measure_mass": num(mu.mass()),
        "formulations": forms,
        "certificate": certificate(&cert),
        "checks": json::report(&rep),
        "calibration": m.calibration,
    });
    json::write(&dir.join("balayage.json"), &out)?;
    Ok(numerical(runs.iter().all(|r| r.report.converged())))
}

fn exhaustion_mode(mode: Mode) -> ExhaustionMode {
    match mode {
        Mode::Increasing => ExhaustionMode::Increasing,
        Mode::Decreasing => ExhaustionMode::Decreasing,
    }
}

fn cmd_converge(model: &ModelArgs, subset: &str, stages: usize, mode: Mode, order: Order, common: &CommonArgs) -> Result<u8> {
    let m = model.load(&Cache::from_env())?;
    let g = &m.gram;
    let a = formats::parse_subset(subset, &m.nodes)?;
    let order = match order {
        Order::Index => StageOrder::Index,
        Order::Radial => StageOrder::Radial,
    };
    let ex = build_exhaustion(&m.nodes, &a, stages, exhaustion_mode(mode), order)?;
    let cert = certify(g, common.trials, CERTIFICATION_TOL, common.seed);
    let opts = SolverOptions::default();
    let run = match mode {
        Mode::Increasing => run_increasing(g, &ex, &cert, &opts, common.tol)?,
        Mode::Decreasing => run_decreasing(g, ex.stages(), &cert, &opts, common.tol)?,
    };
    let dir = out_dir(common)?;
    formats::write_stages_csv(&dir.join("stages.csv"), &run.stages)?;
    let stages: Vec<Value> = run
        .stages
        .iter()
        .map(|s| {
            json!({
                "stage": s.stage,
                "size": s.size,
                "capacity": num(s.capacity),
                "mass": num(s.mass),
                "energy": num(s.energy),
                "max_potential_violation": num(s.max_potential_violation),
                "distance_to_limit": num(s.distance_to_limit),
            })
        })
        .collect();
    let out = json!({
        "mode": format!("{mode:?}").to_lowercase(),
        "stages": stages,
        "limit_capacity": num(run.limit.capacity),
        "certificate": certificate(&cert),
        "checks": json::report(&run.report),
        "calibration": m.calibration,
    });
    json::write(&dir.join("converge.json"), &out)?;
    Ok(numerical(run.report.all_passed()))
}

fn suite_equilibrium(m: &Model, a: &SubsetMask, cert: &Certificate, common: &CommonArgs) -> Result<Report> {
    let g = &m.gram;
    let opts = SolverOptions::default();
    let mut rep = verify_theorem_1_1(g, a, cert, &opts, &tolerances(common.tol))?;
    if a.is_empty() {
        return Ok(rep);
    }
    if a.len() <= ORACLE_MAX_DIM {
        let (c, w, _) = Cache::from_env().exact_equilibrium(g, a)?;
        let primal = capacity_primal(g, a, &opts)?;
        let d = primal.gamma.weights().iter().zip(&w).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        rep.record(
            "exact oracle capacity",
            capax_core::report::close(primal.capacity, c, common.tol),
            format!("{:.17e} vs {c:.17e}", primal.capacity),
        );
        rep.record("exact oracle gamma", d <= common.tol, format!("max weight difference {d:.3e}"));
    } else {
        rep.skip("exact oracle", format!("subset larger than {ORACLE_MAX_DIM} nodes"));
    }
    Ok(rep)
}

fn suite_balayage(m: &Model, a: &SubsetMask, q: &SubsetMask, measure: &str, cert: &Certificate, common: &CommonArgs) -> Result<Report> {
    let g = &m.gram;
    let mu = formats::parse_measure(measure, g)?;
    let runs = balayage_runs(g, &mu, a)?;
    let mut rep = Report::new("balayage");
    agreement(&runs, common.tol, &mut rep);
    let check = BalayageCheckOptions { tol: common.tol, seed: common.seed, ..Default::default() };
    for r in &runs {
        let mut sub = verify_balayage(g, &mu, a, r, cert, &check)?;
        sub.title = r.formulation.name().into();
        rep.absorb(sub);
    }
    rep.absorb(equilibrium_balayage_consistency(g, a, q, cert, &SolverOptions::default(), common.tol)?);
    Ok(rep)
}

fn suite_convergence(m: &Model, a: &SubsetMask, q: &SubsetMask, stages: usize, cert: &Certificate, common: &CommonArgs) -> Result<Report> {
    let g = &m.gram;
    let opts = SolverOptions::default();
    let mut rep = Report::new("convergence");
    for mode in [ExhaustionMode::Increasing, ExhaustionMode::Decreasing] {
        let name = format!("{mode:?}").to_lowercase();
        match build_exhaustion(&m.nodes, a, stages, mode, StageOrder::Radial) {
            Ok(ex) => {
                let run = match mode {
                    ExhaustionMode::Increasing => run_increasing(g, &ex, cert, &opts, common.tol)?,
                    ExhaustionMode::Decreasing => run_decreasing(g, ex.stages(), cert, &opts, common.tol)?,
                };
                rep.absorb(run.report);
            }
            Err(e) => rep.skip(&name, format!("no {stages}-stage family: {e}")),
        }
    }
    rep.absorb(energy_gap_check(g, q, a, cert, &opts, common.tol)?);
    rep.absorb(potential_monotonicity_check(g, q, a, cert, &opts, common.tol)?);
    Ok(rep)
}

fn suite_principles(cert: &Certificate) -> Report {
    let mut rep = Report::new("principles");
    for (name, r) in [("frostman", &cert.frostman), ("domination", &cert.domination)] {
        rep.record(
            name,
            r.holds(),
            format!(
                "{} trials: {} passed, {} vacuous, {} failed, worst violation {:.3e}",
                r.trials, r.passed, r.vacuous, r.failed, r.worst_violation
            ),
        );
    }
    rep
}

#[allow(clippy::too_many_arguments)]
fn cmd_verify(
    model: &ModelArgs,
    suite: Suite,
    subset: &str,
    superset: &str,
    measure: &str,
    stages: usize,
    common: &CommonArgs,
) -> Result<u8> {
    let m = model.load(&Cache::from_env())?;
    let a = formats::parse_subset(subset, &m.nodes)?;
    let q = formats::parse_subset(superset, &m.nodes)?;
    if !a.is_subset_of(&q) {
        bail!("--subset must be contained in --superset");
    }
    let cert = certify(&m.gram, common.trials, CERTIFICATION_TOL, common.seed);
    let rep = match suite {
        Suite::Theorem11 => suite_equilibrium(&m, &a, &cert, common)?,
        Suite::Balayage => suite_balayage(&m, &a, &q, measure, &cert, common)?,
        Suite::Convergence => suite_convergence(&m, &a, &q, stages, &cert, common)?,
        Suite::Principles => suite_principles(&cert),
    };
    let dir = out_dir(common)?;
    let out = json!({
        "suite": format!("{suite:?}").to_lowercase(),
        "nodes": m.gram.len(),
        "subset_size": a.len(),
        "certificate": certificate(&cert),
        "report": json::report(&rep),
        "calibration": m.calibration,
    });
    json::write(&dir.join("report.json"), &out)?;
    for c in rep.failures() {
        eprintln!("capax: FAIL {}: {}", c.name, c.detail);
    }
    Ok(numerical(rep.all_passed()))
}

fn cmd_calibrate(kernel: &Path, cell_dim: Option<usize>, samples: usize, seed: u64, out: Option<&Path>) -> Result<u8> {
    let spec = formats::read_kernel(kernel)?;
    let k = spec.to_kernel()?;
    if matches!(k, Kernel::Matrix(_)) {
        bail!("matrix kernels carry their own diagonal; nothing to calibrate");
    }
    let cell_dim = cell_dim.or(k.dim()).unwrap_or(2);
    let (est, cached) = Cache::from_env().self_energy(&k, cell_dim, samples, seed)?;
    let value = json!({
        "kernel": format!("{spec:?}"),
        "cell_dim": cell_dim,
        "constant": num(est.value),
        "stderr": num(est.stderr),
        "samples": est.samples,
        "seed": seed,
        "cached": cached,
    });
    // a closed pipe on stdout is not an error
    let _ = writeln!(std::io::stdout().lock(), "{}", json::to_string(&value)?);
    if let Some(path) = out {
        json::write(path, &value)?;
    }
    Ok(EXIT_OK)
}

pub fn run(cli: Cli) -> Result<u8> {
    match &cli.command {
        Command::Capacity { model, subset, formulation, certify, common } => {
            cmd_capacity(model, subset, formulation, *certify, common)
        }
        Command::Balayage { model, measure, subset, common } => cmd_balayage(model, measure, subset, common),
        Command::Converge { model, subset, stages, mode, order, common } => {
            cmd_converge(model, subset, *stages, *mode, *order, common)
        }
        Command::Verify { model, suite, subset, superset, measure, stages, common } => {
            cmd_verify(model, *suite, subset, superset, measure, *stages, common)
        }
        Command::Calibrate { kernel, cell_dim, samples, seed, out } => {
            cmd_calibrate(kernel, *cell_dim, *samples, *seed, out.as_deref())
        }
    }
}

/// Parses the command line, runs it and maps errors to exit code 1.
pub fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("capax: error: {e:#}");
            ExitCode::from(EXIT_INPUT)
        }
    }
}
