use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::model::RestorationModel;
use crate::math;
use crate::netmodel::{DerKind, LineId, MerKind, StudyHorizon};
use crate::solver::MipStatus;
use crate::supernode::SuperNodeGraph;

/// Tolerance used by [`verify_plan`] for equalities and bounds.
pub const PLAN_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UnitDispatch {
    pub p: f64,
    pub q: f64,
    /// Storage loss term; zero for generators.
    pub loss: f64,
}

/// Dispatch of one node in one period. Powers are p.u. on the system base,
/// `v` is squared voltage magnitude in p.u.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeDispatch {
    pub p_load: f64,
    pub q_load: f64,
    pub v: f64,
    pub mdg: UnitDispatch,
    pub mpv: UnitDispatch,
    pub mess: UnitDispatch,
    pub ders: Vec<UnitDispatch>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeFlow {
    pub p: f64,
    pub q: f64,
    /// Squared current, p.u.
    pub l: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementDecision {
    pub kind: MerKind,
    pub size_index: usize,
    pub node: usize,
    pub node_id: String,
    pub count: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyPeriod {
    /// 1-based period number.
    pub period: usize,
    /// Energy requested, MWh.
    pub ter_mwh: f64,
    /// Energy served, MWh.
    pub tes_mwh: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EnergySeries {
    pub periods: Vec<EnergyPeriod>,
}

impl EnergySeries {
    pub fn unserved_mwh(&self) -> f64 {
        self.periods.iter().map(|p| p.ter_mwh - p.tes_mwh).sum()
    }

    pub fn served_mwh(&self) -> f64 {
        self.periods.iter().map(|p| p.tes_mwh).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestorationPlan {
    pub node_ids: Vec<String>,
    pub edge_lines: Vec<LineId>,
    pub tasks: Vec<LineId>,
    pub placement: Vec<PlacementDecision>,
    /// `[task][t]`
    pub line_status: Vec<Vec<u8>>,
    /// `[crew][task][t]`
    pub crew_visit: Vec<Vec<Vec<u8>>>,
    pub crew_work: Vec<Vec<Vec<u8>>>,
    /// First period (0-based) each task's line is in service.
    pub energized_at: Vec<Option<usize>>,
    /// `[node][t]`
    pub dispatch: Vec<Vec<NodeDispatch>>,
    /// `[edge][t]`
    pub flows: Vec<Vec<EdgeFlow>>,
    pub energy: EnergySeries,
    /// Unserved energy, MWh.
    pub objective: f64,
    pub bound: f64,
    pub gap: f64,
    pub status: MipStatus,
    pub node_count: usize,
    pub max_violation: f64,
}

fn bit(x: f64) -> u8 {
    if x > 0.5 {
        1
    } else {
        0
    }
}

pub fn extract_energy_series(plan: &RestorationPlan, graph: &SuperNodeGraph, horizon: &StudyHorizon) -> EnergySeries {
    let s = graph.bases.s_mva;
    let periods = (0..horizon.n_periods)
        .map(|t| EnergyPeriod {
            period: t + 1,
            ter_mwh: graph.nodes.iter().map(|n| n.load.p_total[t] * horizon.dt).sum(),
            tes_mwh: plan.dispatch.iter().map(|d| d[t].p_load * s * horizon.dt).sum(),
        })
        .collect();
    EnergySeries { periods }
}

impl RestorationModel {
    /// Reads a plan out of a full-space point.
    pub fn plan_from(&self, x: &[f64]) -> RestorationPlan {
        let idx = &self.index;
        let n_t = self.horizon.n_periods;
        let get = |v: Option<(usize, usize)>| match v {
            Some((p, q)) => UnitDispatch { p: x[p], q: x[q], loss: 0.0 },
            None => UnitDispatch::default(),
        };
        let dispatch: Vec<Vec<NodeDispatch>> = idx
            .nodes
            .iter()
            .map(|row| {
                row.iter()
                    .map(|nv| NodeDispatch {
                        p_load: x[nv.pl],
                        q_load: x[nv.ql],
                        v: x[nv.v],
                        mdg: get(nv.mdg),
                        mpv: get(nv.mpv),
                        mess: match nv.mess {
                            Some((p, q, l)) => UnitDispatch { p: x[p], q: x[q], loss: x[l] },
                            None => UnitDispatch::default(),
                        },
                        ders: nv
                            .ders
                            .iter()
                            .map(|d| UnitDispatch {
                                p: x[d.p],
                                q: x[d.q],
                                loss: d.loss.map(|l| x[l]).unwrap_or(0.0),
                            })
                            .collect(),
                    })
                    .collect()
            })
            .collect();
        let flows = idx
            .edges
            .iter()
            .map(|row| row.iter().map(|e| EdgeFlow { p: x[e.p], q: x[e.q], l: x[e.l] }).collect())
            .collect();
        let line_status: Vec<Vec<u8>> = idx.u.iter().map(|r| r.iter().map(|&v| bit(x[v])).collect()).collect();
        let crew = |a: &Vec<Vec<Vec<usize>>>| -> Vec<Vec<Vec<u8>>> {
            a.iter()
                .map(|m| m.iter().map(|d| d.iter().map(|&v| bit(x[v])).collect()).collect())
                .collect()
        };
        let mut placement = Vec::new();
        for p in &idx.placement {
            let count = math::round(x[p.var]).max(0.0) as u32;
            if count > 0 {
                let spec = &self.mix.entries[p.entry].spec;
                placement.push(PlacementDecision {
                    kind: spec.kind,
                    size_index: spec.size_index,
                    node: p.node,
                    node_id: self.graph.nodes[p.node].id.clone(),
                    count,
                });
            }
        }
        let energized_at = line_status
            .iter()
            .map(|r| r.iter().position(|&b| b == 1))
            .collect();
        let mut plan = RestorationPlan {
            node_ids: self.graph.nodes.iter().map(|n| n.id.clone()).collect(),
            edge_lines: self.graph.edges.iter().map(|e| e.line.clone()).collect(),
            tasks: idx.tasks.iter().map(|t| t.line.clone()).collect(),
            placement,
            line_status,
            crew_visit: crew(&idx.alpha),
            crew_work: crew(&idx.beta),
            energized_at,
            dispatch,
            flows,
            energy: EnergySeries::default(),
            objective: self.program.objective_value(x),
            bound: f64::NEG_INFINITY,
            gap: 0.0,
            status: MipStatus::Feasible,
            node_count: 0,
            max_violation: self.program.violation(x).max(),
        };
        debug_assert_eq!(plan.dispatch.first().map(|d| d.len()).unwrap_or(n_t), n_t);
        plan.energy = extract_energy_series(&plan, &self.graph, &self.horizon);
        plan
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantCheck {
    pub name: String,
    pub passed: bool,
    /// Worst residual found, in the check's own units.
    pub worst: f64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct InvariantReport {
    pub checks: Vec<InvariantCheck>,
}

impl InvariantReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &InvariantCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }

    fn push(&mut self, name: &str, worst: f64, tol: f64, detail: String) {
        self.checks.push(InvariantCheck {
            name: name.into(),
            passed: worst <= tol,
            worst,
            detail,
        });
    }

    fn push_count(&mut self, name: &str, bad: usize, detail: String) {
        self.push(name, bad as f64, 0.0, detail);
    }
}

/// Re-checks the structural and physical invariants of `plan` against the
/// data of `model` without going through the optimizer.
pub fn verify_plan(plan: &RestorationPlan, model: &RestorationModel) -> InvariantReport {
    let mut rep = InvariantReport::default();
    let g = &model.graph;
    let h = &model.horizon;
    let sc = &model.scenario;
    let idx = &model.index;
    let n_t = h.n_periods;
    let s = g.bases.s_mva;
    let n_d = idx.tasks.len();
    let n_m = plan.crew_visit.len();

    // Line status never goes back to open, and starts open.
    let mut bad = 0;
    let mut first = String::new();
    for (d, row) in plan.line_status.iter().enumerate() {
        if row.first() == Some(&1) || row.windows(2).any(|w| w[1] < w[0]) {
            bad += 1;
            if first.is_empty() {
                first = format!("line {}", plan.tasks[d]);
            }
        }
    }
    rep.push_count("line status monotone", bad, first);

    // One line per crew per period.
    let mut bad = 0;
    for m in 0..n_m {
        for t in 0..n_t {
            if (0..n_d).map(|d| plan.crew_visit[m][d][t] as u32).sum::<u32>() > 1 {
                bad += 1;
            }
        }
    }
    rep.push_count("one line per crew and period", bad, String::new());

    // Travel between lines and from the depot.
    let mut bad = 0;
    let mut first = String::new();
    for m in 0..n_m {
        for a in 0..n_d {
            for t in 0..n_t {
                if plan.crew_visit[m][a][t] == 0 {
                    continue;
                }
                if (t as u32) < sc.depot_travel[a] {
                    bad += 1;
                }
                for b in 0..n_d {
                    if a == b {
                        continue;
                    }
                    for tau in 1..=sc.travel_time[a][b] as usize {
                        if t + tau < n_t && plan.crew_visit[m][b][t + tau] == 1 {
                            bad += 1;
                            if first.is_empty() {
                                first = format!("crew {m}: {} at {t}, {} at {}", plan.tasks[a], plan.tasks[b], t + tau);
                            }
                        }
                    }
                }
            }
        }
    }
    rep.push_count("crew travel times respected", bad, first);

    // Work only where present; at most one crew per line.
    let mut bad = 0;
    for d in 0..n_d {
        for t in 0..n_t {
            let mut crews = 0;
            for m in 0..n_m {
                if plan.crew_work[m][d][t] > plan.crew_visit[m][d][t] {
                    bad += 1;
                }
                crews += plan.crew_work[m][d][t] as u32;
            }
            if crews > 1 {
                bad += 1;
            }
        }
    }
    rep.push_count("work requires presence", bad, String::new());

    // A line is in service only after its full repair time of work.
    let mut bad = 0;
    let mut first = String::new();
    for d in 0..n_d {
        let mut done = 0u32;
        for t in 0..n_t {
            if plan.line_status[d][t] == 1 && done < idx.tasks[d].repair_time {
                bad += 1;
                if first.is_empty() {
                    first = format!("line {} closed at {t} after {done} periods of work", plan.tasks[d]);
                }
            }
            done += (0..n_m).map(|m| plan.crew_work[m][d][t] as u32).sum::<u32>();
        }
    }
    rep.push_count("repair completed before energization", bad, first);

    // Mobile unit conservation.
    let mut bad = 0;
    for (k, e) in model.mix.entries.iter().enumerate() {
        let placed: u32 = plan
            .placement
            .iter()
            .filter(|p| p.kind == e.spec.kind && p.size_index == e.spec.size_index)
            .map(|p| p.count)
            .sum();
        let _ = k;
        if placed > e.count {
            bad += 1;
        }
    }
    rep.push_count("mobile units conserved", bad, String::new());

    // Mobile unit capacity at each node.
    let fleet = |kind: MerKind, node: usize, f: &dyn Fn(&crate::netmodel::MerSpec) -> f64| -> f64 {
        plan.placement
            .iter()
            .filter(|p| p.kind == kind && p.node == node)
            .map(|p| {
                let spec = &model
                    .mix
                    .entries
                    .iter()
                    .find(|e| e.spec.kind == kind && e.spec.size_index == p.size_index)
                    .unwrap()
                    .spec;
                p.count as f64 * f(spec)
            })
            .sum()
    };
    let pv = model.config.pv_profile.values(h).unwrap_or_else(|_| vec![0.0; n_t]);
    let mut worst: f64 = 0.0;
    for (i, _) in g.nodes.iter().enumerate() {
        let cap_mdg = fleet(MerKind::MDG, i, &|m| m.p_size.unwrap_or(0.0)) / s;
        let cap_mpv = fleet(MerKind::MPV, i, &|m| m.p_size.unwrap_or(0.0)) / s;
        let cap_mess = fleet(MerKind::MESS, i, &|m| m.s_size.unwrap_or(0.0)) / s;
        let e_mess = fleet(MerKind::MESS, i, &|m| m.e_size.unwrap_or(0.0));
        let mut soc = 0.0;
        for t in 0..n_t {
            let d = &plan.dispatch[i][t];
            worst = worst.max(d.mdg.p - cap_mdg).max(-d.mdg.p);
            worst = worst.max(d.mpv.p - cap_mpv * pv[t]).max(-d.mpv.p);
            worst = worst.max(math::hypot(d.mess.p, d.mess.q) - cap_mess);
            soc += (d.mess.p + d.mess.loss) * s * h.dt;
            worst = worst.max(soc - e_mess).max(-soc);
        }
    }
    rep.push("mobile unit limits", worst, PLAN_TOL, String::new());

    // Stationary resources.
    let mut worst: f64 = 0.0;
    for (i, node) in g.nodes.iter().enumerate() {
        for (k, der) in node.ders.iter().enumerate() {
            let avail = der.availability(h, &model.config.pv_profile).unwrap_or_else(|_| vec![0.0; n_t]);
            let mut soc = 0.0;
            for t in 0..n_t {
                let d = plan.dispatch[i][t].ders[k];
                match der.kind {
                    DerKind::DG | DerKind::PV => {
                        worst = worst.max(d.p - avail[t] / s).max(-d.p);
                        worst = worst.max(der.q_policy.k1 * d.p - d.q).max(d.q - der.q_policy.k2 * d.p);
                    }
                    DerKind::ESS => {
                        let c = der.s_cap.unwrap_or(0.0) / s;
                        worst = worst.max(math::hypot(d.p, d.q) - c);
                        soc += (d.p + d.loss) * s * h.dt;
                        let es = der.e_surplus.unwrap_or(0.0);
                        let ec = der.e_cap.unwrap_or(0.0);
                        worst = worst.max(soc - es).max(es - ec - soc);
                    }
                }
            }
        }
    }
    rep.push("stationary resource limits", worst, PLAN_TOL, String::new());

    // Served load within bounds.
    let mut worst: f64 = 0.0;
    for (i, node) in g.nodes.iter().enumerate() {
        for t in 0..n_t {
            let d = &plan.dispatch[i][t];
            let (pf, qf) = if model.config.critical_floor {
                (node.load.p_crit[t] / s, node.load.q_crit[t] / s)
            } else {
                (0.0, 0.0)
            };
            worst = worst
                .max(d.p_load - node.load.p_total[t] / s)
                .max(pf - d.p_load)
                .max(d.q_load - node.load.q_total[t] / s)
                .max(qf - d.q_load);
        }
    }
    rep.push("served load within bounds", worst, PLAN_TOL, String::new());

    // Nodal balance.
    let mut worst: f64 = 0.0;
    let mut first = String::new();
    for (i, node) in g.nodes.iter().enumerate() {
        for t in 0..n_t {
            let d = &plan.dispatch[i][t];
            let mut p = d.mdg.p + d.mpv.p + d.mess.p - d.p_load + node.grid.p[t] / s;
            let mut q = d.mdg.q + d.mpv.q + d.mess.q - d.q_load + node.grid.q[t] / s;
            for u in &d.ders {
                p += u.p;
                q += u.q;
            }
            for (b, e) in g.edges.iter().enumerate() {
                let f = plan.flows[b][t];
                if e.to == i {
                    p += f.p - e.r * f.l;
                    q += f.q - e.x * f.l;
                }
                if e.from == i {
                    p -= f.p;
                    q -= f.q;
                }
            }
            let r = math::abs(p).max(math::abs(q));
            if r > worst {
                worst = r;
                first = format!("node {} period {}", node.id, t + 1);
            }
        }
    }
    rep.push("power balance", worst, PLAN_TOL, first);

    // Open lines carry nothing; closed and intact lines obey the voltage drop.
    let mut worst_open: f64 = 0.0;
    let mut worst_drop: f64 = 0.0;
    for (b, e) in g.edges.iter().enumerate() {
        let task = idx.tasks.iter().position(|t| t.edge == Some(b));
        for t in 0..n_t {
            let f = plan.flows[b][t];
            let closed = task.map(|d| plan.line_status[d][t] == 1).unwrap_or(true);
            if closed {
                let vf = plan.dispatch[e.from][t].v;
                let vt = plan.dispatch[e.to][t].v;
                let r = vf - vt - 2.0 * (e.r * f.p + e.x * f.q) + (e.r * e.r + e.x * e.x) * f.l;
                worst_drop = worst_drop.max(math::abs(r));
            } else {
                worst_open = worst_open.max(math::abs(f.p)).max(math::abs(f.q)).max(f.l);
            }
        }
    }
    rep.push("no flow on open lines", worst_open, PLAN_TOL, String::new());
    rep.push("voltage drop on closed lines", worst_drop, PLAN_TOL, String::new());

    let mut worst: f64 = 0.0;
    for (i, node) in g.nodes.iter().enumerate() {
        for t in 0..n_t {
            let v = plan.dispatch[i][t].v;
            worst = worst
                .max(node.vmin * node.vmin - v)
                .max(v - node.vmax * node.vmax);
        }
    }
    rep.push("voltage within limits", worst, PLAN_TOL, String::new());

    let mut worst: f64 = 0.0;
    for (b, e) in g.edges.iter().enumerate() {
        for t in 0..n_t {
            let f = plan.flows[b][t];
            worst = worst.max(math::hypot(f.p, f.q) - e.smax).max(f.l - e.i2max).max(-f.l);
        }
    }
    rep.push("line limits", worst, PLAN_TOL, String::new());

    let series = extract_energy_series(plan, g, h);
    let r = math::abs(plan.objective - series.unserved_mwh());
    rep.push(
        "objective equals unserved energy",
        r,
        PLAN_TOL * plan.objective.abs().max(1.0),
        format!("objective {} vs {}", plan.objective, series.unserved_mwh()),
    );
    rep
}
