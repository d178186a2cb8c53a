mod common;

use distres_core::netmodel::{
    gen_travel_matrix, BusId, DamageScenario, FeederModel, LineId, ScenarioSpec, TravelSpec,
};
use distres_core::Error;
use proptest::prelude::*;

#[test]
fn fixture_bus_counts() {
    assert_eq!(common::feeder("ieee13").buses.len(), 13);
    assert_eq!(common::feeder("cs1").buses.len(), 37);
    assert_eq!(common::feeder("cs2").buses.len(), 123);
}

#[test]
fn feeder_round_trip_is_a_fixpoint() {
    for case in ["ieee13", "cs1", "cs2"] {
        let f = common::feeder(case);
        let once = serde_json::to_string(&f).unwrap();
        let back: FeederModel = serde_json::from_str(&once).unwrap();
        assert_eq!(back, f);
        assert_eq!(serde_json::to_string(&back).unwrap(), once);
    }
}

fn expect_validation(f: &FeederModel, record: &str) {
    match f.validate() {
        Err(Error::Validation { record: r, .. }) => assert!(r.contains(record), "{r} does not name {record}"),
        other => panic!("expected a validation error naming {record}, got {other:?}"),
    }
}

#[test]
fn self_loop_is_rejected() {
    let mut f = common::feeder("ieee13");
    let to = f.lines[0].from_bus.clone();
    f.lines[0].to_bus = to;
    let id = f.lines[0].id.0.clone();
    expect_validation(&f, &id);
}

#[test]
fn type_invariants_name_the_record() {
    let base = common::feeder("ieee13");

    let mut f = base.clone();
    f.buses[2].vmin = 1.2;
    expect_validation(&f, &base.buses[2].id.0);

    let mut f = base.clone();
    f.lines[1].r = 0.0;
    f.lines[1].x = 0.0;
    expect_validation(&f, &base.lines[1].id.0);

    let mut f = base.clone();
    f.lines[3].smax = 0.0;
    expect_validation(&f, &base.lines[3].id.0);

    let mut f = base.clone();
    let bus = f.loads[0].bus.0.clone();
    f.loads[0].p_critical[0] = f.loads[0].p_total[0] + 1.0;
    expect_validation(&f, &bus);

    let mut f = base.clone();
    f.loads[0].q_total.pop();
    expect_validation(&f, &bus);

    let mut f = base.clone();
    f.horizon.dt = 0.0;
    expect_validation(&f, "horizon");

    let mut f = base;
    let k = f.ders.iter().position(|d| d.e_cap.is_some()).unwrap();
    f.ders[k].e_surplus = Some(f.ders[k].e_cap.unwrap() + 1.0);
    assert!(matches!(f.validate(), Err(Error::Validation { .. })));
}

#[test]
fn cs1_scenario_quantizes_hours_to_periods() {
    let (_, s) = common::case("cs1");
    assert_eq!(s.damaged_lines.len(), 6);
    // Repair hours (3, 4, 6, 3, 5, 6) over 4-hour periods, rounded up.
    assert_eq!(s.repair_time, vec![1, 1, 2, 1, 2, 2]);
    assert_eq!(s.n_crews, 2);
}

#[test]
fn cs2_scenario() {
    let (_, s) = common::case("cs2");
    assert_eq!(s.damaged_lines.len(), 8);
    // Repair hours (4, 3, 5, 4, 7, 2, 5, 7).
    assert_eq!(s.repair_time, vec![1, 1, 2, 1, 2, 1, 2, 2]);
    for (i, row) in s.travel_time.iter().enumerate() {
        assert_eq!(row[i], 0);
    }
}

#[test]
fn empty_damage_is_valid() {
    let f = common::feeder("ieee13");
    let spec = ScenarioSpec {
        damaged: vec![],
        repair_time: Default::default(),
        time_unit: Default::default(),
        travel_rounding: Default::default(),
        travel: TravelSpec::Matrix(vec![]),
        depot_travel: Default::default(),
        n_crews: 1,
        grid: Default::default(),
    };
    let s = DamageScenario::from_spec(&spec, &f).unwrap();
    assert!(s.damaged_lines.is_empty());
    assert!(s.travel_time.is_empty());
}

#[test]
fn unknown_damaged_line() {
    let f = common::feeder("ieee13");
    let mut spec = common::scenario_spec("ieee13");
    spec.damaged.push(LineId::new("nope"));
    assert!(matches!(DamageScenario::from_spec(&spec, &f), Err(Error::UnknownLine(l)) if l == "nope"));
}

#[test]
fn travel_matrix_size_mismatch() {
    let f = common::feeder("ieee13");
    let mut spec = common::scenario_spec("ieee13");
    spec.travel = TravelSpec::Matrix(vec![vec![0.0, 1.0], vec![1.0, 0.0]]);
    assert!(matches!(DamageScenario::from_spec(&spec, &f), Err(Error::Dimension(_))));
}

#[test]
fn travel_matrix_diagonal_and_repair_time_checked() {
    let f = common::feeder("ieee13");
    let mut spec = common::scenario_spec("ieee13");
    spec.travel = TravelSpec::Matrix(vec![vec![1.0, 0.0, 0.0], vec![0.0; 3], vec![0.0; 3]]);
    assert!(matches!(DamageScenario::from_spec(&spec, &f), Err(Error::Validation { .. })));

    let mut spec = common::scenario_spec("ieee13");
    spec.repair_time.insert(LineId::new("632-645"), 0.0);
    assert!(matches!(DamageScenario::from_spec(&spec, &f), Err(Error::Validation { .. })));
}

#[test]
fn grid_series_must_name_a_bus() {
    let f = common::feeder("ieee13");
    let mut spec = common::scenario_spec("ieee13");
    let n = f.horizon.n_periods;
    spec.grid.insert(
        BusId::new("nowhere"),
        distres_core::netmodel::GridSeries {
            p: vec![0.0; n],
            q: vec![0.0; n],
        },
    );
    assert!(matches!(DamageScenario::from_spec(&spec, &f), Err(Error::Validation { .. })));
}

#[test]
fn travel_matrix_examples() {
    assert_eq!(gen_travel_matrix(6, 42, 5), gen_travel_matrix(6, 42, 5));
    assert_eq!(gen_travel_matrix(1, 99, 3), vec![vec![0]]);
}

proptest! {
    #[test]
    fn travel_matrix_shape(n in 1usize..12, seed in any::<u64>(), max in 1u32..9) {
        let m = gen_travel_matrix(n, seed, max);
        prop_assert_eq!(m.len(), n);
        for i in 0..n {
            prop_assert_eq!(m[i].len(), n);
            prop_assert_eq!(m[i][i], 0);
            for j in 0..n {
                prop_assert_eq!(m[i][j], m[j][i]);
                if i != j {
                    prop_assert!((1..=max).contains(&m[i][j]));
                }
            }
        }
        prop_assert_eq!(m, gen_travel_matrix(n, seed, max));
    }
}
