use distres::ClarabelBackend;
use distres_core::chr::hull_line_flow_params;
use distres_core::solver::{
    branch_class, relative_gap, solve_continuous, solve_michp, BnBConfig, ConicProgram, ContinuousStatus,
    LinExpr, MipStatus, QuadraticEquality, Sense,
};
use distres_core::Error;
use proptest::prelude::*;

fn backend() -> ClarabelBackend {
    ClarabelBackend::default()
}

#[test]
fn lower_bound_is_attained() {
    let mut p = ConicProgram::new();
    let x = p.add_continuous("x", f64::NEG_INFINITY, f64::INFINITY);
    p.add_objective(x, 1.0);
    p.add_linear(vec![(x, 1.0)], Sense::Ge, 3.0);
    let s = solve_continuous(&p, None, &backend()).unwrap();
    assert_eq!(s.status, ContinuousStatus::Optimal);
    assert!((s.x[x] - 3.0).abs() < 1e-7);
}

#[test]
fn hull_cone_is_tight_at_the_optimum() {
    let mut prog = ConicProgram::new();
    let p = prog.add_continuous("p", -2.0, 2.0);
    let q = prog.add_continuous("q", 0.0, 0.0);
    let l = prog.add_continuous("l", 0.0, 1.0);
    let v = prog.add_continuous("v", 1.0, 1.0);
    prog.add_objective(p, -1.0);
    hull_line_flow_params(0.95, 1.05, 2.0).apply(&mut prog, [p, q, l, v]);
    let s = solve_continuous(&prog, None, &backend()).unwrap();
    assert_eq!(s.status, ContinuousStatus::Optimal);
    assert!((s.x[p] - 1.0).abs() < 1e-6, "{:?}", s.x);
    assert!((s.x[p] * s.x[p] - s.x[l] * s.x[v]).abs() < 1e-5);
}

#[test]
fn crossing_bounds_are_infeasible() {
    let mut p = ConicProgram::new();
    let x = p.add_continuous("x", 0.0, 10.0);
    p.add_objective(x, 1.0);
    p.add_linear(vec![(x, 1.0)], Sense::Ge, 2.0);
    p.add_linear(vec![(x, 1.0)], Sense::Le, 1.0);
    let s = solve_continuous(&p, None, &backend()).unwrap();
    assert_eq!(s.status, ContinuousStatus::Infeasible);
    let m = solve_michp(&p, &BnBConfig::default(), &backend()).unwrap();
    assert_eq!(m.status, MipStatus::Infeasible);
    assert!(!m.has_incumbent());
}

#[test]
fn integer_infeasible_program() {
    let mut p = ConicProgram::new();
    let x = p.add_integer("x", 0.0, 3.0, branch_class::OTHER);
    p.add_objective(x, 1.0);
    p.add_linear(vec![(x, 2.0)], Sense::Eq, 3.0);
    let m = solve_michp(&p, &BnBConfig::default(), &backend()).unwrap();
    assert_eq!(m.status, MipStatus::Infeasible);
}

#[test]
fn integral_relaxation_solves_at_the_root() {
    let mut p = ConicProgram::new();
    let x = p.add_integer("x", 0.0, 10.0, branch_class::OTHER);
    let y = p.add_integer("y", 0.0, 10.0, branch_class::OTHER);
    p.add_objective(x, 1.0);
    p.add_objective(y, 2.0);
    p.add_linear(vec![(x, 1.0)], Sense::Ge, 1.0);
    p.add_linear(vec![(y, 1.0)], Sense::Ge, 2.0);
    let m = solve_michp(&p, &BnBConfig::default(), &backend()).unwrap();
    assert_eq!(m.status, MipStatus::Optimal);
    assert_eq!(m.node_count, 1);
    assert!((m.objective - 5.0).abs() < 1e-6);
}

#[test]
fn invalid_inputs_are_rejected() {
    let mut p = ConicProgram::new();
    let x = p.add_continuous("x", 0.0, 1.0);
    p.add_objective(x, 1.0);
    let mut cfg = BnBConfig::default();
    cfg.gap = 0.0;
    assert!(matches!(solve_michp(&p, &cfg, &backend()), Err(Error::Model(_))));

    p.nonconvex.push(QuadraticEquality {
        squares: vec![(x, 1.0)],
        product: (x, x),
    });
    assert!(solve_continuous(&p, None, &backend()).is_err());
    assert!(solve_michp(&p, &BnBConfig::default(), &backend()).is_err());
}

/// Maximizes value subject to a linear weight limit and a cone on a second
/// weight vector; `None` if nothing fits.
fn knapsack(values: &[f64], w: &[f64], cap: f64, w2: &[f64], cap2: f64) -> ConicProgram {
    let mut p = ConicProgram::new();
    let x: Vec<usize> = (0..values.len())
        .map(|k| p.add_binary(format!("x{k}"), branch_class::OTHER))
        .collect();
    for (k, &v) in values.iter().enumerate() {
        p.add_objective(x[k], -v);
    }
    p.add_linear(x.iter().zip(w).map(|(&x, &w)| (x, w)).collect(), Sense::Le, cap);
    let rows = x.iter().zip(w2).map(|(&x, &w)| LinExpr::term(x, w)).collect();
    p.add_soc(rows, LinExpr::constant(cap2));
    p
}

fn enumerate(values: &[f64], w: &[f64], cap: f64, w2: &[f64], cap2: f64) -> f64 {
    let n = values.len();
    let mut best = 0.0f64;
    for mask in 0u32..(1 << n) {
        let on = |k: usize| mask >> k & 1 == 1;
        let weight: f64 = (0..n).filter(|&k| on(k)).map(|k| w[k]).sum();
        let norm = (0..n).filter(|&k| on(k)).map(|k| w2[k] * w2[k]).sum::<f64>().sqrt();
        if weight <= cap + 1e-9 && norm <= cap2 + 1e-9 {
            best = best.min(-(0..n).filter(|&k| on(k)).map(|k| values[k]).sum::<f64>());
        }
    }
    best
}

#[test]
fn knapsack_example_matches_enumeration() {
    let values = [10.0, 13.0, 7.0, 8.0, 4.0];
    let w = [5.0, 7.0, 4.0, 4.0, 2.0];
    let w2 = [1.0, 2.0, 1.0, 1.5, 0.5];
    let p = knapsack(&values, &w, 11.0, &w2, 2.2);
    let m = solve_michp(&p, &BnBConfig::with_gap(1e-9), &backend()).unwrap();
    let best = enumerate(&values, &w, 11.0, &w2, 2.2);
    assert_eq!(m.status, MipStatus::Optimal);
    assert!((m.objective - best).abs() < 1e-6, "{} vs {best}", m.objective);
}

#[test]
fn gap_follows_its_definition() {
    let values = [6.0, 5.0, 8.0, 9.0, 6.0];
    let w = [2.0, 3.0, 6.0, 7.0, 5.0];
    let p = knapsack(&values, &w, 9.0, &[0.0; 5], 1.0);
    for gap in [1e-1, 1e-3, 1e-9] {
        let m = solve_michp(&p, &BnBConfig::with_gap(gap), &backend()).unwrap();
        assert_eq!(m.gap, relative_gap(m.objective, m.bound));
        assert_eq!(m.gap, (m.objective - m.bound) / m.objective.abs().max(1.0));
        if m.status == MipStatus::Optimal {
            assert!(m.gap <= gap);
        }
    }
}

#[test]
fn repeated_solves_are_identical() {
    let values = [3.0, 4.0, 5.0, 6.0, 7.0, 2.5];
    let w = [2.0, 3.0, 4.0, 5.0, 6.0, 1.5];
    let w2 = [0.3, 0.8, 0.2, 0.9, 0.4, 0.6];
    let p = knapsack(&values, &w, 10.5, &w2, 1.1);
    let cfg = BnBConfig::with_gap(1e-6);
    let a = solve_michp(&p, &cfg, &backend()).unwrap();
    let b = solve_michp(&p, &cfg, &backend()).unwrap();
    assert_eq!(a.objective, b.objective);
    assert_eq!(a.node_count, b.node_count);
    assert_eq!(a.x, b.x);
}

#[test]
fn batched_search_reaches_the_same_objective() {
    let values = [3.0, 4.0, 5.0, 6.0, 7.0, 2.5, 4.5];
    let w = [2.0, 3.0, 4.0, 5.0, 6.0, 1.5, 3.5];
    let w2 = [0.3, 0.8, 0.2, 0.9, 0.4, 0.6, 0.5];
    let p = knapsack(&values, &w, 12.5, &w2, 1.2);
    let mut cfg = BnBConfig::with_gap(1e-9);
    let single = solve_michp(&p, &cfg, &ClarabelBackend::new(1)).unwrap();
    cfg.threads = 4;
    let batched = solve_michp(&p, &cfg, &ClarabelBackend::new(4)).unwrap();
    assert!((single.objective - batched.objective).abs() < 1e-6);
}

#[test]
fn node_limit_returns_the_incumbent() {
    let values = [3.0, 4.0, 5.0, 6.0, 7.0, 2.5, 4.5, 3.3];
    let w = [2.1, 3.2, 4.3, 5.1, 6.2, 1.7, 3.6, 2.9];
    let p = knapsack(&values, &w, 12.5, &[0.0; 8], 1.0);
    let mut cfg = BnBConfig::with_gap(1e-9);
    cfg.node_limit = 2;
    let m = solve_michp(&p, &cfg, &backend()).unwrap();
    assert!(m.node_count <= 2);
    assert!(matches!(m.status, MipStatus::Feasible | MipStatus::Limit | MipStatus::Optimal));
    if m.has_incumbent() {
        assert!(m.bound <= m.objective + 1e-7);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn knapsack_matches_enumeration(
        values in proptest::collection::vec(0.5f64..10.0, 5),
        w in proptest::collection::vec(0.5f64..5.0, 5),
        w2 in proptest::collection::vec(0.0f64..2.0, 5),
        cap in 2.0f64..12.0,
        cap2 in 0.5f64..3.0,
    ) {
        let p = knapsack(&values, &w, cap, &w2, cap2);
        let m = solve_michp(&p, &BnBConfig::with_gap(1e-9), &backend()).unwrap();
        let best = enumerate(&values, &w, cap, &w2, cap2);
        prop_assert_eq!(m.status, MipStatus::Optimal);
        prop_assert!((m.objective - best).abs() < 1e-5 * best.abs().max(1.0), "{} vs {}", m.objective, best);
        prop_assert!(p.violation(&m.x).max() <= 1e-6);
        prop_assert!(m.bound <= m.objective + 1e-7);
        let root = solve_continuous(&p, None, &backend()).unwrap();
        prop_assert!(root.objective <= m.objective + 1e-7);
    }
}
