mod common;

use distres::{ClarabelBackend, WallClock};
use distres_core::netmodel::{MerKind, ShortageForecast, ShortagePeriod};
use distres_core::oracle::enumerate_mixes;
use distres_core::predisaster::{build_sizing_model, solve_sizing, SizingConfig, SizingSolution};
use distres_core::solver::{BnBConfig, Integrality};
use distres_core::Error;
use proptest::prelude::*;

fn solve(fc: &ShortageForecast, catalog: &[distres_core::netmodel::MerSpec]) -> distres_core::Result<SizingSolution> {
    let m = build_sizing_model(fc, catalog, &fc.horizon, &SizingConfig::default())?;
    solve_sizing(&m, &BnBConfig::with_gap(1e-4), &ClarabelBackend::default(), &WallClock::start())
}

fn flat(fc: &ShortageForecast, p: f64, q: f64) -> ShortageForecast {
    let mut out = fc.clone();
    out.ders.clear();
    out.critical_fraction = None;
    for sp in &mut out.periods {
        *sp = ShortagePeriod {
            p_short_total: p,
            p_short_critical: p,
            q_short_total: q,
            q_short_critical: q,
        };
    }
    out
}

fn check_dispatch(s: &SizingSolution, fc: &ShortageForecast) {
    let tol = 1e-6;
    let dt = fc.horizon.dt;
    let pol = &s.parameters.q_policy;
    let e0: f64 = s
        .mix
        .units()
        .filter(|e| e.spec.kind == MerKind::MESS)
        .map(|e| e.count as f64 * e.spec.e_size.unwrap())
        .sum();
    let mut used = 0.0;
    for (t, d) in s.dispatch.iter().enumerate() {
        let sp = &fc.periods[t];
        assert!(d.p_load >= sp.p_short_critical - tol && d.p_load <= sp.p_short_total + tol);
        for (kind, p, q) in [(MerKind::MDG, d.p.mdg, d.q.mdg), (MerKind::MPV, d.p.mpv, d.q.mpv)] {
            let k = pol[&kind];
            assert!(q >= k.k1 * p - tol && q <= k.k2 * p + tol, "{kind:?} t{t}: p {p} q {q}");
        }
        let supply = d.p.mdg + d.p.mess + d.p.mpv + d.p.dg + d.p.ess + d.p.pv;
        assert!((supply - d.p_load).abs() < tol, "balance t{t}");
        used += d.p.mess * dt;
        assert!(used >= -tol && used <= e0 + tol, "storage energy t{t}: {used} of {e0}");
    }
    assert!(s.max_violation <= tol);
}

#[test]
fn cs1_mix() {
    let fc = common::forecast("cs1");
    let (m, s) = common::size("cs1");
    // Two sizes of each kind.
    assert_eq!(m.program.count_integrality(Integrality::Integer), 6);
    assert_eq!(s.dispatch.len(), 8);
    assert_eq!(s.mix.count(MerKind::MDG, 2), 1);
    assert_eq!(s.mix.n_units(), 1);
    assert!((s.mix.total_cost - 1500.0).abs() < 1e-9);
    assert_eq!(s.parameters.critical_fraction, Some(0.6));
    check_dispatch(&s, &fc);
}

#[test]
fn cs2_mix() {
    let fc = common::forecast("cs2");
    let (_, s) = common::size("cs2");
    assert_eq!(s.mix.count(MerKind::MDG, 1), 1);
    assert_eq!(s.mix.count(MerKind::MESS, 2), 1);
    assert_eq!(s.mix.n_units(), 2);
    assert!((s.mix.total_cost - 2500.0).abs() < 1e-9);
    check_dispatch(&s, &fc);
}

#[test]
fn sizing_cost_matches_mix_enumeration() {
    for case in ["cs1", "cs2"] {
        let (m, s) = common::size(case);
        let oracle = enumerate_mixes(&m, &ClarabelBackend::default()).unwrap();
        assert!((s.mix.total_cost - oracle.cost).abs() < 1e-6, "{case}: {} vs {}", s.mix.total_cost, oracle.cost);
    }
}

#[test]
fn zero_shortage_needs_nothing() {
    let fc = flat(&common::forecast("cs1"), 0.0, 0.0);
    let s = solve(&fc, &common::catalog()).unwrap();
    assert_eq!(s.mix.n_units(), 0);
    assert_eq!(s.mix.total_cost, 0.0);
}

#[test]
fn one_megawatt_block_takes_the_small_generator() {
    let fc = flat(&common::forecast("cs1"), 1.0, 0.3);
    let cat = common::catalog();
    let s = solve(&fc, &cat).unwrap();
    assert_eq!(s.mix.count(MerKind::MDG, 1), 1);
    assert_eq!(s.mix.n_units(), 1);
    assert!((s.mix.total_cost - 1000.0).abs() < 1e-9);

    let m = build_sizing_model(&fc, &cat, &fc.horizon, &SizingConfig::default()).unwrap();
    let oracle = enumerate_mixes(&m, &ClarabelBackend::default()).unwrap();
    assert!((oracle.cost - 1000.0).abs() < 1e-9);
}

#[test]
fn empty_catalog() {
    let base = common::forecast("cs1");
    let mut fc = base.clone();
    for sp in &mut fc.periods {
        sp.p_short_critical = 0.0;
        sp.q_short_critical = 0.0;
    }
    let s = solve(&fc, &[]).unwrap();
    assert_eq!(s.mix.n_units(), 0);
    for (d, sp) in s.dispatch.iter().zip(&fc.periods) {
        assert!(d.p_load <= sp.p_short_total + 1e-6);
    }

    let mut short = flat(&base, 1.0, 0.3);
    short.ders.clear();
    assert!(matches!(solve(&short, &[]), Err(Error::Infeasible(_))));
}

#[test]
fn mismatched_forecast_is_a_model_error() {
    let mut fc = common::forecast("cs1");
    fc.periods.pop();
    let r = build_sizing_model(&fc, &common::catalog(), &fc.horizon, &SizingConfig::default());
    assert!(matches!(r, Err(Error::Model(_))));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn less_critical_shortage_never_costs_more(scale in 0.0f64..1.0, case in prop::sample::select(vec!["cs1", "cs2"])) {
        let fc = common::forecast(case);
        let base = solve(&fc, &common::catalog()).unwrap().mix.total_cost;
        let mut lower = fc.clone();
        for sp in &mut lower.periods {
            sp.p_short_critical *= scale;
            sp.q_short_critical *= scale;
        }
        let cost = solve(&lower, &common::catalog()).unwrap().mix.total_cost;
        prop_assert!(cost <= base + 1e-9, "{} > {}", cost, base);
    }
}
