mod common;

use distres::{ClarabelBackend, WallClock};
use distres_core::netmodel::{
    Bases, Bus, BusId, DamageScenario, DerKind, DerUnit, FeederModel, Line, LineId, LoadProfile, QPolicy,
    StudyHorizon,
};
use distres_core::oracle::{check_nonconvex_feasibility, enumerate_schedule_profiles, enumerate_schedules};
use distres_core::postdisaster::{
    build_restoration_model, extract_energy_series, restoration_bnb_config, solve_restoration, verify_plan,
    RestorationConfig, RestorationModel, RestorationPlan,
};
use distres_core::predisaster::MerMixDecision;
use distres_core::solver::{solve_continuous, ContinuousStatus, Integrality};
use distres_core::supernode::{aggregate, detect_islands};
use distres_core::Error;

fn solve(model: &RestorationModel) -> RestorationPlan {
    solve_restoration(model, &restoration_bnb_config(), &ClarabelBackend::default(), &WallClock::start()).unwrap()
}

fn assert_sound(plan: &RestorationPlan, model: &RestorationModel) {
    let report = verify_plan(plan, model);
    let failures: Vec<_> = report.failures().map(|c| format!("{} {} {}", c.name, c.worst, c.detail)).collect();
    assert!(failures.is_empty(), "{failures:?}");
    let unserved: f64 = plan.energy.periods.iter().map(|p| p.ter_mwh - p.tes_mwh).sum();
    assert!((unserved - plan.objective).abs() < 1e-6, "{unserved} vs {}", plan.objective);
    for p in &plan.energy.periods {
        assert!(p.tes_mwh >= -1e-9 && p.tes_mwh <= p.ter_mwh + 1e-9);
    }
    assert_eq!(extract_energy_series(plan, &model.graph, &model.horizon), plan.energy);
}

/// Hub bus "0" with a generator, `n_leaves` loaded buses hanging off it by
/// damaged lines.
fn star(n_leaves: usize, leaf_load: f64, hub_gen: f64) -> FeederModel {
    let n_t = 8;
    let bus = |i: usize| Bus {
        id: BusId::new(i.to_string()),
        vmin: 0.95,
        vmax: 1.05,
    };
    FeederModel {
        bases: Bases { s_mva: 1.0, v_kv: 4.16 },
        buses: (0..=n_leaves).map(bus).collect(),
        lines: (1..=n_leaves)
            .map(|i| Line {
                id: LineId::new(format!("0-{i}")),
                from_bus: BusId::new("0"),
                to_bus: BusId::new(i.to_string()),
                r: 0.01,
                x: 0.01,
                i2max: 4.0,
                smax: 2.0,
            })
            .collect(),
        loads: (1..=n_leaves)
            .map(|i| LoadProfile {
                bus: BusId::new(i.to_string()),
                p_total: vec![leaf_load; n_t],
                p_critical: vec![0.5 * leaf_load; n_t],
                q_total: vec![0.2 * leaf_load; n_t],
                q_critical: vec![0.1 * leaf_load; n_t],
            })
            .collect(),
        ders: vec![DerUnit {
            id: None,
            bus: BusId::new("0"),
            kind: DerKind::DG,
            p_cap: hub_gen,
            p_avail: None,
            q_policy: QPolicy { k1: 0.0, k2: 1.0 },
            e_cap: None,
            s_cap: None,
            e_surplus: None,
            r_e: None,
            r_ct: None,
        }],
        horizon: StudyHorizon { n_periods: n_t, dt: 1.0 },
    }
}

fn damage_all(f: &FeederModel, rt: &[u32], crews: usize) -> DamageScenario {
    let n = f.lines.len();
    let mut s = DamageScenario::no_damage(crews);
    s.damaged_lines = f.lines.iter().map(|l| l.id.clone()).collect();
    s.repair_time = rt.to_vec();
    s.travel_time = vec![vec![0; n]; n];
    s.depot_travel = vec![0; n];
    s
}

fn model_for(f: &FeederModel, s: &DamageScenario, mix: &MerMixDecision) -> RestorationModel {
    let g = aggregate(f, &detect_islands(f, s), s).unwrap();
    build_restoration_model(&g, mix, s, &f.horizon, &RestorationConfig::default()).unwrap()
}

#[test]
fn ieee13_variable_counts() {
    let m = common::restoration("ieee13", &common::ieee13_mix());
    // u, α and β for 3 lines, 1 crew, 8 periods.
    assert_eq!(m.program.count_integrality(Integrality::Binary), 3 * 8 * 3);
    assert_eq!(m.index.u.len(), 3);
    assert_eq!(m.index.alpha.len(), 1);
}

#[test]
fn cs1_variable_counts() {
    let (_, sizing) = common::size("cs1");
    let m = common::restoration("cs1", &sizing.mix);
    assert_eq!(m.program.count_integrality(Integrality::Binary), 6 * 8 + 2 * 6 * 8 + 2 * 6 * 8);
    // One placement count per super-node for the single generator size.
    assert_eq!(m.program.count_integrality(Integrality::Integer), 7);
}

#[test]
fn ieee13_matches_the_schedule_oracle() {
    let m = common::restoration("ieee13", &common::ieee13_mix());
    let plan = solve(&m);
    let oracle = enumerate_schedules(&m, &ClarabelBackend::default()).unwrap();
    let rel = (plan.objective - oracle.objective).abs() / oracle.objective.abs().max(1.0);
    assert!(rel <= 1e-4, "{} vs {}", plan.objective, oracle.objective);
    assert_sound(&plan, &m);
    let report = check_nonconvex_feasibility(&plan, &m, 1e-6).unwrap();
    assert!(report.max_residual >= 0.0);
    assert!(report.relaxation_gap_estimate.is_finite());
}

#[test]
fn equal_repairs_with_zero_travel_finish_every_other_period() {
    let (f, mut s) = common::case("ieee13");
    s.repair_time = vec![2; 3];
    s.travel_time = vec![vec![0; 3]; 3];
    s.depot_travel = vec![0; 3];
    let m = model_for(&f, &s, &common::ieee13_mix());
    let plan = solve(&m);
    let mut on: Vec<usize> = plan.energized_at.iter().map(|e| e.unwrap()).collect();
    on.sort();
    // Third, fifth and seventh periods.
    assert_eq!(on, vec![2, 4, 6]);
    let oracle = enumerate_schedules(&m, &ClarabelBackend::default()).unwrap();
    assert!((plan.objective - oracle.objective).abs() <= 1e-4 * oracle.objective.max(1.0));
    assert_sound(&plan, &m);
}

#[test]
fn symmetric_islands_cost_the_same_in_any_order() {
    let f = star(3, 0.5, 5.0);
    let s = damage_all(&f, &[2, 2, 2], 1);
    let m = model_for(&f, &s, &MerMixDecision::empty());
    let profiles = enumerate_schedule_profiles(&m).unwrap();
    assert_eq!(profiles.len(), 6);
    let be = ClarabelBackend::default();
    let objs: Vec<f64> = profiles
        .values()
        .map(|sched| {
            let mut b = m.program.bounds();
            for (v, val) in sched.assignment(&m) {
                b[v] = (val, val);
            }
            let r = solve_continuous(&m.program, Some(&b), &be).unwrap();
            assert_eq!(r.status, ContinuousStatus::Optimal);
            r.objective
        })
        .collect();
    for o in &objs {
        assert!((o - objs[0]).abs() < 1e-6, "{objs:?}");
    }
    let oracle = enumerate_schedules(&m, &be).unwrap();
    assert!((oracle.objective - objs[0]).abs() < 1e-6);
}

#[test]
fn two_crews_repair_two_lines_in_parallel() {
    let f = star(2, 0.4, 5.0);
    let mut s = damage_all(&f, &[2, 3], 2);
    s.travel_time = vec![vec![0, 5], vec![5, 0]];
    let m = model_for(&f, &s, &MerMixDecision::empty());
    let oracle = enumerate_schedules(&m, &ClarabelBackend::default()).unwrap();
    assert_eq!(oracle.energized_at, vec![Some(2), Some(3)]);
    let plan = solve(&m);
    assert_eq!(plan.energized_at, vec![Some(2), Some(3)]);
    assert!((plan.objective - oracle.objective).abs() <= 1e-4 * oracle.objective.max(1.0));
    assert_sound(&plan, &m);
}

#[test]
fn no_damage_is_plain_dispatch() {
    let f = common::feeder("ieee13");
    let s = DamageScenario::no_damage(1);
    let m = model_for(&f, &s, &common::ieee13_mix());
    assert!(m.index.u.is_empty());
    assert_eq!(m.program.count_integrality(Integrality::Binary), 0);
    let plan = solve(&m);
    assert!(plan.tasks.is_empty());
    assert_sound(&plan, &m);
    // One island, no flows: the exact line equations hold trivially.
    let report = check_nonconvex_feasibility(&plan, &m, 1e-6).unwrap();
    assert!(report.line_residuals.iter().all(|r| r.residual == 0.0));
}

#[test]
fn critical_floor_without_supply_is_infeasible() {
    let mut f = star(1, 0.5, 5.0);
    f.ders.clear();
    let s = damage_all(&f, &[1], 1);
    let g = aggregate(&f, &detect_islands(&f, &s), &s).unwrap();
    let config = RestorationConfig {
        critical_floor: true,
        ..RestorationConfig::default()
    };
    let m = build_restoration_model(&g, &MerMixDecision::empty(), &s, &f.horizon, &config).unwrap();
    let r = solve_restoration(&m, &restoration_bnb_config(), &ClarabelBackend::default(), &WallClock::start());
    assert!(matches!(r, Err(Error::Infeasible(_))), "{r:?}");
}

#[test]
fn exact_relaxation_cannot_be_solved() {
    let (f, s, g) = common::graph("ieee13");
    let config = RestorationConfig {
        relax: distres_core::postdisaster::Relaxation::Exact,
        ..RestorationConfig::default()
    };
    let m = build_restoration_model(&g, &common::ieee13_mix(), &s, &f.horizon, &config).unwrap();
    assert!(!m.program.nonconvex.is_empty());
    let r = solve_restoration(&m, &restoration_bnb_config(), &ClarabelBackend::default(), &WallClock::start());
    assert!(r.is_err());
}
