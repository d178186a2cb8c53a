//! Island detection and contraction of each island into one aggregated node.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::netmodel::{
    Bases, Bus, BusId, DamageScenario, DerUnit, FeederModel, GridSeries, Line, LineId,
    LoadProfile, StudyHorizon,
};

/// A partition of the feeder's buses into electrically connected groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IslandSet {
    pub islands: Vec<Vec<BusId>>,
}

impl IslandSet {
    pub fn len(&self) -> usize {
        self.islands.len()
    }

    pub fn is_empty(&self) -> bool {
        self.islands.is_empty()
    }

    pub fn island_of(&self, bus: &BusId) -> Option<usize> {
        self.islands.iter().position(|i| i.contains(bus))
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, mut a: usize) -> usize {
        while self.0[a] != a {
            self.0[a] = self.0[self.0[a]];
            a = self.0[a];
        }
        a
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Connected components over intact lines, each sorted, ordered by smallest member.
pub fn detect_islands(feeder: &FeederModel, scenario: &DamageScenario) -> IslandSet {
    let n = feeder.buses.len();
    let index: BTreeMap<&BusId, usize> =
        feeder.buses.iter().enumerate().map(|(i, b)| (&b.id, i)).collect();
    let mut uf = UnionFind::new(n);
    for line in &feeder.lines {
        if scenario.is_damaged(&line.id) {
            continue;
        }
        if let (Some(&a), Some(&b)) = (index.get(&line.from_bus), index.get(&line.to_bus)) {
            uf.union(a, b);
        }
    }
    let mut groups: BTreeMap<usize, Vec<BusId>> = BTreeMap::new();
    for i in 0..n {
        let r = uf.find(i);
        groups.entry(r).or_default().push(feeder.buses[i].id.clone());
    }
    let mut islands: Vec<Vec<BusId>> = groups
        .into_values()
        .map(|mut g| {
            g.sort();
            g
        })
        .collect();
    islands.sort_by(|a, b| a[0].cmp(&b[0]));
    IslandSet { islands }
}

/// Summed load series of an aggregated node, in MW / MVAr.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregatedLoad {
    pub p_total: Vec<f64>,
    pub p_crit: Vec<f64>,
    pub q_total: Vec<f64>,
    pub q_crit: Vec<f64>,
}

impl AggregatedLoad {
    fn zeros(n: usize) -> Self {
        AggregatedLoad {
            p_total: vec![0.0; n],
            p_crit: vec![0.0; n],
            q_total: vec![0.0; n],
            q_crit: vec![0.0; n],
        }
    }

    fn add(&mut self, l: &LoadProfile) {
        for t in 0..self.p_total.len() {
            self.p_total[t] += l.p_total[t];
            self.p_crit[t] += l.p_critical[t];
            self.q_total[t] += l.q_total[t];
            self.q_crit[t] += l.q_critical[t];
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperNode {
    pub id: String,
    pub members: Vec<BusId>,
    pub load: AggregatedLoad,
    pub ders: Vec<DerUnit>,
    pub vmin: f64,
    pub vmax: f64,
    /// Summed grid supply of member buses, MW / MVAr; zero when absent.
    pub grid: GridSeries,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperEdge {
    pub line: LineId,
    pub from: usize,
    pub to: usize,
    pub r: f64,
    pub x: f64,
    pub i2max: f64,
    pub smax: f64,
    pub damaged: bool,
    /// Periods of crew work needed; zero for intact edges.
    pub repair_time: u32,
}

/// A damaged line with both ends inside one island: crew work but no flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InternalRepair {
    pub line: LineId,
    pub node: usize,
    pub repair_time: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuperNodeGraph {
    pub bases: Bases,
    pub horizon: StudyHorizon,
    pub nodes: Vec<SuperNode>,
    pub edges: Vec<SuperEdge>,
    pub internal_repairs: Vec<InternalRepair>,
}

pub fn roman(mut n: usize) -> String {
    const TABLE: [(usize, &str); 13] = [
        (1000, "M"),
        (900, "CM"),
        (500, "D"),
        (400, "CD"),
        (100, "C"),
        (90, "XC"),
        (50, "L"),
        (40, "XL"),
        (10, "X"),
        (9, "IX"),
        (5, "V"),
        (4, "IV"),
        (1, "I"),
    ];
    let mut s = String::new();
    for (v, r) in TABLE {
        while n >= v {
            s.push_str(r);
            n -= v;
        }
    }
    s
}

/// One node per island named I, II, …; damaged inter-island lines become edges.
pub fn aggregate(
    feeder: &FeederModel,
    islands: &IslandSet,
    scenario: &DamageScenario,
) -> Result<SuperNodeGraph> {
    let names: Vec<String> = (1..=islands.len()).map(roman).collect();
    build_graph(feeder, islands, scenario, &names)
}

/// The uncontracted network: every bus its own node, every line an edge.
pub fn full_network(feeder: &FeederModel, scenario: &DamageScenario) -> Result<SuperNodeGraph> {
    let islands = IslandSet {
        islands: feeder.buses.iter().map(|b| vec![b.id.clone()]).collect(),
    };
    let names: Vec<String> = feeder.buses.iter().map(|b| b.id.0.clone()).collect();
    build_graph(feeder, &islands, scenario, &names)
}

fn build_graph(
    feeder: &FeederModel,
    islands: &IslandSet,
    scenario: &DamageScenario,
    names: &[String],
) -> Result<SuperNodeGraph> {
    let n = feeder.horizon.n_periods;
    let mut node_of: BTreeMap<&BusId, usize> = BTreeMap::new();
    for (k, isl) in islands.islands.iter().enumerate() {
        for b in isl {
            node_of.insert(b, k);
        }
    }
    let bus_of: BTreeMap<&BusId, &Bus> = feeder.buses.iter().map(|b| (&b.id, b)).collect();
    let mut nodes = Vec::with_capacity(islands.len());
    for (k, isl) in islands.islands.iter().enumerate() {
        let mut load = AggregatedLoad::zeros(n);
        let (mut vmin, mut vmax) = (f64::NEG_INFINITY, f64::INFINITY);
        let mut grid = GridSeries {
            p: vec![0.0; n],
            q: vec![0.0; n],
        };
        for b in isl {
            let bus = bus_of
                .get(b)
                .ok_or_else(|| Error::validation(format!("island {}", k + 1), format!("unknown bus {b}")))?;
            vmin = vmin.max(bus.vmin);
            vmax = vmax.min(bus.vmax);
            if let Some(l) = feeder.load_at(b) {
                load.add(l);
            }
            if let Some(g) = scenario.grid_power.get(b) {
                for t in 0..n {
                    grid.p[t] += g.p[t];
                    grid.q[t] += g.q[t];
                }
            }
        }
        if vmin >= vmax {
            return Err(Error::InfeasibleBounds {
                island: k,
                vmin,
                vmax,
            });
        }
        let ders = feeder
            .ders
            .iter()
            .filter(|d| node_of.get(&d.bus) == Some(&k))
            .cloned()
            .collect();
        nodes.push(SuperNode {
            id: names[k].clone(),
            members: isl.clone(),
            load,
            ders,
            vmin,
            vmax,
            grid,
        });
    }

    let mut edges = Vec::new();
    let mut internal_repairs = Vec::new();
    for line in &feeder.lines {
        let (Some(&a), Some(&b)) = (node_of.get(&line.from_bus), node_of.get(&line.to_bus)) else {
            continue;
        };
        let task = scenario.task_index(&line.id);
        let repair_time = task.map_or(0, |k| scenario.repair_time[k]);
        if a == b {
            if task.is_some() {
                internal_repairs.push(InternalRepair {
                    line: line.id.clone(),
                    node: a,
                    repair_time,
                });
            }
            continue;
        }
        edges.push(edge_from(line, a, b, task.is_some(), repair_time));
    }
    Ok(SuperNodeGraph {
        bases: feeder.bases,
        horizon: feeder.horizon,
        nodes,
        edges,
        internal_repairs,
    })
}

fn edge_from(line: &Line, from: usize, to: usize, damaged: bool, repair_time: u32) -> SuperEdge {
    SuperEdge {
        line: line.id.clone(),
        from,
        to,
        r: line.r,
        x: line.x,
        i2max: line.i2max,
        smax: line.smax,
        damaged,
        repair_time,
    }
}

impl SuperNodeGraph {
    pub fn damaged_edges(&self) -> impl Iterator<Item = (usize, &SuperEdge)> {
        self.edges.iter().enumerate().filter(|(_, e)| e.damaged)
    }

    /// The graph written back as a feeder whose buses are the nodes, plus the
    /// scenario that damages exactly its damaged edges.
    pub fn to_feeder(&self) -> (FeederModel, DamageScenario) {
        let buses = self
            .nodes
            .iter()
            .map(|s| Bus {
                id: BusId(s.id.clone()),
                vmin: s.vmin,
                vmax: s.vmax,
            })
            .collect();
        let lines = self
            .edges
            .iter()
            .map(|e| Line {
                id: e.line.clone(),
                from_bus: BusId(self.nodes[e.from].id.clone()),
                to_bus: BusId(self.nodes[e.to].id.clone()),
                r: e.r,
                x: e.x,
                i2max: e.i2max,
                smax: e.smax,
            })
            .collect();
        let loads = self
            .nodes
            .iter()
            .map(|s| LoadProfile {
                bus: BusId(s.id.clone()),
                p_total: s.load.p_total.clone(),
                p_critical: s.load.p_crit.clone(),
                q_total: s.load.q_total.clone(),
                q_critical: s.load.q_crit.clone(),
            })
            .collect();
        let ders = self
            .nodes
            .iter()
            .flat_map(|s| {
                s.ders.iter().map(move |d| DerUnit {
                    bus: BusId(s.id.clone()),
                    ..d.clone()
                })
            })
            .collect();
        let feeder = FeederModel {
            bases: self.bases,
            buses,
            lines,
            loads,
            ders,
            horizon: self.horizon,
        };
        let mut scenario = DamageScenario::no_damage(0);
        for e in self.edges.iter().filter(|e| e.damaged) {
            scenario.damaged_lines.push(e.line.clone());
            scenario.repair_time.push(e.repair_time);
        }
        let k = scenario.damaged_lines.len();
        scenario.travel_time = vec![vec![0; k]; k];
        scenario.depot_travel = vec![0; k];
        (feeder, scenario)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IslandDrop {
    pub island: usize,
    pub far_bus: BusId,
    pub near_bus: BusId,
    /// Buses on the worst internal path.
    pub path: Vec<BusId>,
    /// Peak island load pushed over the path, MW / MVAr.
    pub p_mw: f64,
    pub q_mvar: f64,
    /// Drop in squared voltage, p.u.
    pub dv_squared: f64,
    /// Drop in voltage magnitude from 1 p.u.
    pub drop_pu: f64,
    pub drop_kv: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReductionReport {
    pub threshold_pu: f64,
    pub islands: Vec<IslandDrop>,
}

impl ReductionReport {
    pub fn any_flagged(&self) -> bool {
        self.islands.iter().any(|i| i.flagged)
    }
}

pub const DEFAULT_DROP_THRESHOLD: f64 = 0.05;

/// Linearized squared-voltage drop from pushing `(p, q)` p.u. over segments `(r, x)`.
pub fn lindistflow_drop(segments: &[(f64, f64)], p: f64, q: f64) -> f64 {
    segments.iter().map(|(r, x)| 2.0 * (r * p + x * q)).sum()
}

/// Worst-case internal voltage drop of each island with its peak load
/// carried end to end over the internal path of largest `r·P + x·Q`.
pub fn justify_reduction(feeder: &FeederModel, islands: &IslandSet, threshold: f64) -> ReductionReport {
    let s_base = feeder.bases.s_mva;
    let node_of: BTreeMap<&BusId, usize> = islands
        .islands
        .iter()
        .enumerate()
        .flat_map(|(k, isl)| isl.iter().map(move |b| (b, k)))
        .collect();
    let mut out = Vec::new();
    for (k, isl) in islands.islands.iter().enumerate() {
        let n = feeder.horizon.n_periods;
        let mut load = AggregatedLoad::zeros(n);
        for b in isl {
            if let Some(l) = feeder.load_at(b) {
                load.add(l);
            }
        }
        let peak_t = (0..n)
            .max_by(|&a, &b| load.p_total[a].total_cmp(&load.p_total[b]))
            .unwrap_or(0);
        let (p_mw, q_mvar) = (load.p_total[peak_t], load.q_total[peak_t]);
        let (p, q) = (p_mw / s_base, q_mvar / s_base);

        // Spanning tree of intact internal lines.
        let members: BTreeSet<&BusId> = isl.iter().collect();
        let mut adj: BTreeMap<&BusId, Vec<(&BusId, f64, f64)>> = BTreeMap::new();
        let mut uf_seen: BTreeSet<(&BusId, &BusId)> = BTreeSet::new();
        for line in &feeder.lines {
            if node_of.get(&line.from_bus) != Some(&k) || node_of.get(&line.to_bus) != Some(&k) {
                continue;
            }
            if !members.contains(&line.from_bus) {
                continue;
            }
            let key = if line.from_bus <= line.to_bus {
                (&line.from_bus, &line.to_bus)
            } else {
                (&line.to_bus, &line.from_bus)
            };
            if !uf_seen.insert(key) {
                continue;
            }
            adj.entry(&line.from_bus).or_default().push((&line.to_bus, line.r, line.x));
            adj.entry(&line.to_bus).or_default().push((&line.from_bus, line.r, line.x));
        }
        let weight = |r: f64, x: f64| r * p + x * q;
        let farthest = |start: &BusId| -> (BusId, f64, Vec<(BusId, f64, f64)>) {
            let mut best = (start.clone(), 0.0, Vec::new());
            let mut stack: Vec<(&BusId, Option<&BusId>, f64, Vec<(BusId, f64, f64)>)> =
                vec![(start, None, 0.0, vec![(start.clone(), 0.0, 0.0)])];
            let mut visited: BTreeSet<&BusId> = BTreeSet::new();
            while let Some((b, parent, w, path)) = stack.pop() {
                if !visited.insert(b) {
                    continue;
                }
                if w > best.1 + 1e-15 {
                    best = (b.clone(), w, path.clone());
                }
                for &(nb, r, x) in adj.get(b).map(|v| v.as_slice()).unwrap_or(&[]) {
                    if Some(nb) == parent || visited.contains(nb) {
                        continue;
                    }
                    let mut np = path.clone();
                    np.push((nb.clone(), r, x));
                    stack.push((nb, Some(b), w + weight(r, x), np));
                }
            }
            best
        };
        let (a, _, _) = farthest(&isl[0]);
        let (far, _, path) = farthest(&a);
        let segments: Vec<(f64, f64)> = path.iter().skip(1).map(|s| (s.1, s.2)).collect();
        let dv = lindistflow_drop(&segments, p, q);
        let drop_pu = 1.0 - math::sqrt((1.0 - dv).max(0.0));
        out.push(IslandDrop {
            island: k,
            far_bus: far,
            near_bus: a,
            path: path.into_iter().map(|s| s.0).collect(),
            p_mw,
            q_mvar,
            dv_squared: dv,
            drop_pu,
            drop_kv: drop_pu * feeder.bases.v_kv,
            flagged: drop_pu > threshold,
        });
    }
    ReductionReport {
        threshold_pu: threshold,
        islands: out,
    }
}
