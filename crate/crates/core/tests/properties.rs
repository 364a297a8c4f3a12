use approx::assert_relative_eq;
use capax_core::oracle::{brute_force_qp, generate_certified_kernel};
use capax_core::{
    capacity_dual, capacity_primal, energy, g_functional, mutual_energy, potential, solve_lcp, solve_qp, sweep_projection,
    DiscreteMeasure, GramForm, Matrix, QpProblem, SolverOptions, SubsetMask,
};
use proptest::prelude::*;

fn gram(n: usize, seed: u64) -> GramForm {
    generate_certified_kernel(n, seed).unwrap().gram()
}

fn measure(g: &GramForm, w: &[f64]) -> DiscreteMeasure {
    DiscreteMeasure::on(g, w[..g.len()].to_vec()).unwrap()
}

fn mask(bits: u16, n: usize) -> SubsetMask {
    let idx: Vec<usize> = (0..n).filter(|i| bits & (1 << i) != 0).collect();
    if idx.is_empty() {
        SubsetMask::single(0)
    } else {
        SubsetMask::new(idx, n).unwrap()
    }
}

fn spd(n: usize, entries: &[f64]) -> Matrix {
    Matrix::from_fn(n, n, |i, j| (0..n).map(|k| entries[k * n + i] * entries[k * n + j]).sum::<f64>() + if i == j { 0.1 } else { 0.0 })
}

fn opts() -> SolverOptions {
    SolverOptions::default()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nonneg_and_simplex_qp_match_oracle(n in 1usize..=7, entries in prop::collection::vec(-1.0f64..1.0, 49), b in prop::collection::vec(-1.0f64..1.0, 7), simplex in any::<bool>()) {
        let q = spd(n, &entries);
        let b = b[..n].to_vec();
        let p = if simplex { QpProblem::simplex(q, b) } else { QpProblem::nonneg(q, b) }.unwrap();
        let it = solve_qp(&p, &opts()).unwrap();
        let bf = brute_force_qp(&p).unwrap();
        prop_assert!((it.objective - bf.objective).abs() <= 1e-9 * bf.objective.abs().max(1.0));
    }

    #[test]
    fn lcp_solves_the_nonneg_qp(n in 1usize..=7, entries in prop::collection::vec(-1.0f64..1.0, 49), q in prop::collection::vec(-1.0f64..1.0, 7)) {
        let m = spd(n, &entries);
        let q = q[..n].to_vec();
        let lcp = solve_lcp(&m, &q, &opts()).unwrap();
        let qp = solve_qp(&QpProblem::nonneg(m, q).unwrap(), &opts()).unwrap();
        for (a, b) in lcp.x.iter().zip(&qp.x) {
            prop_assert!((a - b).abs() <= 1e-8);
        }
    }

    #[test]
    fn energy_is_a_quadratic_form(n in 2usize..=8, seed in 0u64..1000, w in prop::collection::vec(0.0f64..1.0, 8), v in prop::collection::vec(0.0f64..1.0, 8), t in 0.0f64..5.0) {
        let g = gram(n, seed);
        let (mu, nu) = (measure(&g, &w), measure(&g, &v));
        let e = energy(&g, &mu).unwrap();
        assert_relative_eq!(energy(&g, &mu.scaled(t).unwrap()).unwrap(), t * t * e, max_relative = 1e-12, epsilon = 1e-14);
        let (uv, vu) = (mutual_energy(&g, &mu, &nu).unwrap(), mutual_energy(&g, &nu, &mu).unwrap());
        assert_relative_eq!(uv, vu, max_relative = 1e-12, epsilon = 1e-14);
        prop_assert!(uv * uv <= e * energy(&g, &nu).unwrap() * (1.0 + 1e-12) + 1e-14);
        let sum = potential(&g, &mu.plus(&nu).unwrap()).unwrap();
        let (pm, pn) = (potential(&g, &mu).unwrap(), potential(&g, &nu).unwrap());
        for i in 0..n {
            assert_relative_eq!(sum.value(i), pm.value(i) + pn.value(i), max_relative = 1e-12, epsilon = 1e-14);
        }
    }

    #[test]
    fn capacity_is_monotone_and_subadditive(n in 2usize..=8, seed in 0u64..1000, a in any::<u16>(), b in any::<u16>()) {
        let g = gram(n, seed);
        let (a, b) = (mask(a, n), mask(b, n));
        let ab = a.union(&b);
        let ca = capacity_dual(&g, &a, &opts()).unwrap().capacity;
        let cb = capacity_dual(&g, &b, &opts()).unwrap().capacity;
        let cab = capacity_primal(&g, &ab, &opts()).unwrap().capacity;
        prop_assert!(ca <= cab * (1.0 + 1e-9));
        prop_assert!(cb <= cab * (1.0 + 1e-9));
        prop_assert!(cab <= (ca + cb) * (1.0 + 1e-9));
    }

    #[test]
    fn equilibrium_maximizes_g(n in 2usize..=8, seed in 0u64..1000, a in any::<u16>(), w in prop::collection::vec(0.0f64..2.0, 8)) {
        let g = gram(n, seed);
        let a = mask(a, n);
        let eq = capacity_dual(&g, &a, &opts()).unwrap();
        assert_relative_eq!(g_functional(&g, &eq.gamma).unwrap(), eq.capacity, max_relative = 1e-9);
        let nu = measure(&g, &w).restricted(&a);
        prop_assert!(g_functional(&g, &nu).unwrap() <= eq.capacity * (1.0 + 1e-9));
    }

    #[test]
    fn balayage_is_a_cone_projection(n in 2usize..=8, seed in 0u64..1000, a in any::<u16>(), w in prop::collection::vec(0.0f64..1.0, 8), v in prop::collection::vec(0.0f64..1.0, 8)) {
        let g = gram(n, seed);
        let a = mask(a, n);
        let mu = measure(&g, &w);
        let swept = sweep_projection(&g, &mu, &a, &opts()).unwrap().swept;
        let again = sweep_projection(&g, &swept, &a, &opts()).unwrap().swept;
        prop_assert!(again.max_weight_diff(&swept) <= 1e-9);
        prop_assert!(energy(&g, &swept).unwrap() <= energy(&g, &mu).unwrap() * (1.0 + 1e-9) + 1e-12);
        let d = |x: &DiscreteMeasure| capax_core::measures::distance_squared(&g, &mu, x).unwrap();
        let nu = measure(&g, &v).restricted(&a);
        prop_assert!(d(&swept) <= d(&nu) * (1.0 + 1e-9) + 1e-12);
    }
}
