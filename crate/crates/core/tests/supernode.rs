mod common;

use std::collections::{BTreeMap, BTreeSet};

use distres_core::netmodel::{
    Bases, Bus, BusId, DamageScenario, DerKind, DerUnit, FeederModel, Line, LineId, LoadProfile, QPolicy,
    StudyHorizon,
};
use distres_core::supernode::{aggregate, detect_islands, full_network, justify_reduction, IslandSet};
use distres_core::Error;
use proptest::prelude::*;

fn ids(v: &[&str]) -> Vec<BusId> {
    v.iter().map(|s| BusId::new(*s)).collect()
}

#[test]
fn island_counts_on_fixtures() {
    for (case, n) in [("ieee13", 4), ("cs1", 7), ("cs2", 9)] {
        let (f, s) = common::case(case);
        assert_eq!(detect_islands(&f, &s).len(), n, "{case}");
    }
}

#[test]
fn ieee13_first_island_and_graph_shape() {
    let (f, s) = common::case("ieee13");
    let isl = detect_islands(&f, &s);
    let first = isl.island_of(&BusId::new("650")).unwrap();
    let mut expect = ids(&["650", "632", "633", "634"]);
    expect.sort();
    assert_eq!(isl.islands[first], expect);
    let g = aggregate(&f, &isl, &s).unwrap();
    assert_eq!(g.nodes.len(), 4);
    assert_eq!(g.edges.len(), 3);
    assert!(g.edges.iter().all(|e| e.damaged));
    assert_eq!(g.nodes[0].id, "I");
}

#[test]
fn no_damage_gives_one_island() {
    let f = common::feeder("cs1");
    let s = DamageScenario::no_damage(1);
    let isl = detect_islands(&f, &s);
    assert_eq!(isl.len(), 1);
    let g = aggregate(&f, &isl, &s).unwrap();
    assert_eq!(g.nodes.len(), 1);
    assert!(g.edges.is_empty());
    for t in 0..f.horizon.n_periods {
        let total: f64 = f.loads.iter().map(|l| l.p_total[t]).sum();
        assert!((g.nodes[0].load.p_total[t] - total).abs() < 1e-12);
    }
}

fn toy_feeder(n_buses: usize, lines: &[(usize, usize)], p: &[f64]) -> FeederModel {
    let buses = (0..n_buses)
        .map(|i| Bus {
            id: BusId::new(format!("{}", i + 1)),
            vmin: 0.95,
            vmax: 1.05,
        })
        .collect();
    let lines = lines
        .iter()
        .map(|&(a, b)| Line {
            id: LineId::new(format!("{}-{}", a + 1, b + 1)),
            from_bus: BusId::new(format!("{}", a + 1)),
            to_bus: BusId::new(format!("{}", b + 1)),
            r: 0.01,
            x: 0.01,
            i2max: 4.0,
            smax: 2.0,
        })
        .collect();
    let loads = p
        .iter()
        .enumerate()
        .filter(|(_, &v)| v > 0.0)
        .map(|(i, &v)| LoadProfile {
            bus: BusId::new(format!("{}", i + 1)),
            p_total: vec![v],
            p_critical: vec![0.5 * v],
            q_total: vec![0.0],
            q_critical: vec![0.0],
        })
        .collect();
    FeederModel {
        bases: Bases { s_mva: 1.0, v_kv: 4.16 },
        buses,
        lines,
        loads,
        ders: vec![],
        horizon: StudyHorizon { n_periods: 1, dt: 1.0 },
    }
}

fn damage(f: &FeederModel, lines: &[usize]) -> DamageScenario {
    let mut s = DamageScenario::no_damage(1);
    for &k in lines {
        s.damaged_lines.push(f.lines[k].id.clone());
        s.repair_time.push(1);
    }
    let n = lines.len();
    s.travel_time = vec![vec![0; n]; n];
    s.depot_travel = vec![0; n];
    s
}

#[test]
fn two_bus_toy() {
    let f = toy_feeder(2, &[(0, 1)], &[1.0, 2.5]);
    let s = damage(&f, &[0]);
    let g = aggregate(&f, &detect_islands(&f, &s), &s).unwrap();
    assert_eq!(g.nodes.len(), 2);
    assert_eq!(g.nodes[0].load.p_total, vec![1.0]);
    assert_eq!(g.nodes[1].load.p_total, vec![2.5]);
    assert_eq!(g.edges.len(), 1);
}

#[test]
fn damaged_line_inside_an_island_is_a_repair_without_edge() {
    // Triangle: damaging one side keeps all three buses connected.
    let f = toy_feeder(3, &[(0, 1), (1, 2), (0, 2)], &[1.0, 1.0, 1.0]);
    let s = damage(&f, &[2]);
    let g = aggregate(&f, &detect_islands(&f, &s), &s).unwrap();
    assert_eq!(g.nodes.len(), 1);
    assert!(g.edges.is_empty());
    assert_eq!(g.internal_repairs.len(), 1);
    assert_eq!(g.internal_repairs[0].line, f.lines[2].id);
}

#[test]
fn crossing_voltage_bounds_are_infeasible() {
    let mut f = toy_feeder(2, &[(0, 1)], &[1.0, 1.0]);
    f.buses[0].vmin = 0.99;
    f.buses[0].vmax = 1.05;
    f.buses[1].vmin = 0.90;
    f.buses[1].vmax = 0.98;
    let s = DamageScenario::no_damage(1);
    assert!(matches!(
        aggregate(&f, &detect_islands(&f, &s), &s),
        Err(Error::InfeasibleBounds { .. })
    ));
}

#[test]
fn single_bus_island_has_no_drop() {
    let f = toy_feeder(2, &[(0, 1)], &[1.0, 2.0]);
    let s = damage(&f, &[0]);
    let rep = justify_reduction(&f, &detect_islands(&f, &s), 0.05);
    assert_eq!(rep.islands.len(), 2);
    for i in &rep.islands {
        assert_eq!(i.dv_squared, 0.0);
        assert_eq!(i.drop_pu, 0.0);
    }
}

#[test]
fn chain_drop_matches_direct_evaluation() {
    // Three buses in a chain, r = x = 0.01 p.u., 1 p.u. load at the end.
    let f = toy_feeder(3, &[(0, 1), (1, 2)], &[0.0, 0.0, 1.0]);
    let s = DamageScenario::no_damage(1);
    let rep = justify_reduction(&f, &detect_islands(&f, &s), 0.05);
    let isl = &rep.islands[0];
    // Walk the path applying v_j = v_i − 2(r·P + x·Q) per segment.
    let (p, q) = (1.0, 0.0);
    let mut v = 1.0;
    for _ in 0..2 {
        v -= 2.0 * (0.01 * p + 0.01 * q);
    }
    assert!((isl.dv_squared - (1.0 - v)).abs() < 1e-15);
    assert!((isl.drop_pu - (1.0 - v.sqrt())).abs() < 1e-15);
    assert!((isl.drop_kv - isl.drop_pu * 4.16).abs() < 1e-15);
    assert_eq!(isl.path.len(), 3);
    assert!(!isl.flagged);
}

#[test]
fn ieee13_lateral_island_drop_in_both_units() {
    let (f, s) = common::case("ieee13");
    let isl = detect_islands(&f, &s);
    let rep = justify_reduction(&f, &isl, 0.05);
    let k = isl.island_of(&BusId::new("692")).unwrap();
    let d = &rep.islands[k];
    assert!(d.drop_pu > 0.0);
    assert!((d.drop_kv - d.drop_pu * f.bases.v_kv).abs() < 1e-12);
}

#[test]
fn full_network_keeps_every_bus_and_line() {
    let (f, s) = common::case("ieee13");
    let g = full_network(&f, &s).unwrap();
    assert_eq!(g.nodes.len(), f.buses.len());
    assert_eq!(g.edges.len(), f.lines.len());
    assert_eq!(g.edges.iter().filter(|e| e.damaged).count(), s.damaged_lines.len());
}

fn der(bus: &BusId, kind: DerKind) -> DerUnit {
    DerUnit {
        id: None,
        bus: bus.clone(),
        kind,
        p_cap: 0.1,
        p_avail: None,
        q_policy: QPolicy::default(),
        e_cap: None,
        s_cap: None,
        e_surplus: None,
        r_e: None,
        r_ct: None,
    }
}

fn connected_within(f: &FeederModel, s: &DamageScenario, island: &[BusId]) -> bool {
    let set: BTreeSet<&BusId> = island.iter().collect();
    let mut seen = BTreeSet::from([&island[0]]);
    let mut stack = vec![&island[0]];
    while let Some(b) = stack.pop() {
        for l in f.lines.iter().filter(|l| !s.is_damaged(&l.id)) {
            let other = if &l.from_bus == b {
                &l.to_bus
            } else if &l.to_bus == b {
                &l.from_bus
            } else {
                continue;
            };
            if set.contains(other) && seen.insert(other) {
                stack.push(other);
            }
        }
    }
    seen.len() == island.len()
}

prop_compose! {
    fn feeder_case()(n in 2usize..14)
        (parents in proptest::collection::vec(any::<prop::sample::Index>(), n - 1),
         extra in proptest::collection::vec((any::<prop::sample::Index>(), any::<prop::sample::Index>()), 0..3),
         loads in proptest::collection::vec((0.0f64..2.0, 0.0f64..1.0), n),
         damaged in proptest::collection::vec(any::<bool>(), n + 2),
         with_der in proptest::collection::vec(any::<bool>(), n),
         n in Just(n))
        -> (FeederModel, DamageScenario)
    {
        let mut edges: Vec<(usize, usize)> = (1..n).map(|i| (parents[i - 1].index(i), i)).collect();
        for (a, b) in extra {
            let (a, b) = (a.index(n), b.index(n));
            if a != b && !edges.contains(&(a, b)) && !edges.contains(&(b, a)) {
                edges.push((a, b));
            }
        }
        let p: Vec<f64> = loads.iter().map(|l| l.0).collect();
        let mut f = toy_feeder(n, &edges, &p);
        for (l, (_, q)) in f.loads.iter_mut().zip(&loads) {
            l.q_total = vec![*q];
        }
        for (i, &d) in with_der.iter().enumerate() {
            if d {
                let bus = f.buses[i].id.clone();
                f.ders.push(der(&bus, if i % 2 == 0 { DerKind::DG } else { DerKind::PV }));
            }
        }
        let hit: Vec<usize> = (0..f.lines.len()).filter(|&k| damaged[k]).collect();
        let s = damage(&f, &hit);
        (f, s)
    }
}

proptest! {
    #[test]
    fn islands_partition_the_buses((f, s) in feeder_case()) {
        let isl = detect_islands(&f, &s);
        let total: usize = isl.islands.iter().map(|i| i.len()).sum();
        prop_assert_eq!(total, f.buses.len());
        let all: BTreeSet<&BusId> = isl.islands.iter().flatten().collect();
        prop_assert_eq!(all.len(), f.buses.len());
        for i in &isl.islands {
            prop_assert!(!i.is_empty());
            prop_assert!(connected_within(&f, &s, i));
        }
        for w in isl.islands.windows(2) {
            prop_assert!(w[0][0] < w[1][0]);
        }
        // No intact line joins two islands.
        for l in f.lines.iter().filter(|l| !s.is_damaged(&l.id)) {
            prop_assert_eq!(isl.island_of(&l.from_bus), isl.island_of(&l.to_bus));
        }
    }

    #[test]
    fn aggregation_conserves_load_and_ders((f, s) in feeder_case()) {
        let isl = detect_islands(&f, &s);
        let g = aggregate(&f, &isl, &s).unwrap();
        prop_assert_eq!(g.nodes.len(), isl.len());
        let sum = |v: &dyn Fn(&LoadProfile) -> f64| f.loads.iter().map(v).sum::<f64>();
        let node_sum = |v: &dyn Fn(&distres_core::supernode::AggregatedLoad) -> f64| {
            g.nodes.iter().map(|n| v(&n.load)).sum::<f64>()
        };
        prop_assert!((sum(&|l| l.p_total[0]) - node_sum(&|l| l.p_total[0])).abs() < 1e-9);
        prop_assert!((sum(&|l| l.q_total[0]) - node_sum(&|l| l.q_total[0])).abs() < 1e-9);
        prop_assert!((sum(&|l| l.p_critical[0]) - node_sum(&|l| l.p_crit[0])).abs() < 1e-9);
        prop_assert!((sum(&|l| l.q_critical[0]) - node_sum(&|l| l.q_crit[0])).abs() < 1e-9);

        let mut before: Vec<String> = f.ders.iter().map(|d| format!("{:?}", d)).collect();
        let mut after: Vec<String> = g.nodes.iter().flat_map(|n| n.ders.iter().map(|d| format!("{:?}", d))).collect();
        before.sort();
        after.sort();
        prop_assert_eq!(before, after);

        prop_assert!(g.edges.len() <= s.damaged_lines.len());
        for e in &g.edges {
            prop_assert!(e.from != e.to);
            prop_assert!(e.damaged);
        }
        prop_assert_eq!(g.edges.len() + g.internal_repairs.len(), s.damaged_lines.len());
    }

    #[test]
    fn contraction_is_idempotent((f, s) in feeder_case()) {
        let g = aggregate(&f, &detect_islands(&f, &s), &s).unwrap();
        let (f2, s2) = g.to_feeder();
        let isl2 = detect_islands(&f2, &s2);
        prop_assert!(isl2.islands.iter().all(|i| i.len() == 1));
        let g2 = aggregate(&f2, &isl2, &s2).unwrap();
        prop_assert_eq!(g2.nodes.len(), g.nodes.len());
        prop_assert_eq!(g2.edges.len(), g.edges.len());
        // Match nodes by their (single) member, which is the old node id.
        let pos: BTreeMap<String, usize> = g.nodes.iter().enumerate().map(|(k, n)| (n.id.clone(), k)).collect();
        for n2 in &g2.nodes {
            let k = pos[&n2.members[0].0];
            prop_assert_eq!(&n2.load, &g.nodes[k].load);
            prop_assert_eq!(n2.ders.len(), g.nodes[k].ders.len());
        }
        for (e, e2) in g.edges.iter().zip(&g2.edges) {
            prop_assert_eq!(&e.line, &e2.line);
            let ends = |a: usize, b: usize, gr: &distres_core::supernode::SuperNodeGraph| {
                let mut v = [gr.nodes[a].id.clone(), gr.nodes[b].id.clone()];
                v.sort();
                v
            };
            let m2 = |a: usize| g2.nodes[a].members[0].0.clone();
            let mut v2 = [m2(e2.from), m2(e2.to)];
            v2.sort();
            prop_assert_eq!(ends(e.from, e.to, &g), v2);
        }
    }
}

#[test]
fn island_of_unknown_bus() {
    let isl = IslandSet {
        islands: vec![ids(&["1", "2"])],
    };
    assert_eq!(isl.island_of(&BusId::new("2")), Some(0));
    assert_eq!(isl.island_of(&BusId::new("9")), None);
}
