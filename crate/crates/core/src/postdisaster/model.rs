use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::chr::{hull_line_flow_params, hull_storage_loss_params, StorageConeVariant};
use crate::error::{Error, Result};
use crate::netmodel::{
    DamageScenario, DerKind, LineId, MerKind, PvProfile, QPolicy, StorageLossParams, StudyHorizon,
};
use crate::predisaster::MerMixDecision;
use crate::solver::{branch_class, ConicProgram, LinExpr, QuadraticEquality, Sense, VarId};
use crate::supernode::SuperNodeGraph;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relaxation {
    /// Branch-flow and storage-loss equalities replaced by their convex hulls.
    #[default]
    Hull,
    /// Equalities kept as nonconvex records; for evaluation only.
    Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RestorationConfig {
    pub relax: Relaxation,
    pub storage_cone: StorageConeVariant,
    pub pv_profile: PvProfile,
    pub pv_curtailable: bool,
    pub storage_charging: bool,
    /// Hold served load at or above the critical series; otherwise shedding
    /// may go down to zero.
    pub critical_floor: bool,
    /// Replace line capacity in the on/off flow limits with per-period
    /// supply/demand bounds of the two sides of the line.
    pub tight_flow_bounds: bool,
}

impl Default for RestorationConfig {
    fn default() -> Self {
        RestorationConfig {
            relax: Relaxation::Hull,
            storage_cone: StorageConeVariant::ResistanceScaled,
            pv_profile: PvProfile::default(),
            pv_curtailable: true,
            storage_charging: true,
            critical_floor: false,
            tight_flow_bounds: true,
        }
    }
}

/// A damaged line that needs crew work.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepairTask {
    pub line: LineId,
    /// Flow edge in the graph; `None` for lines inside one island.
    pub edge: Option<usize>,
    pub repair_time: u32,
    pub depot_travel: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerVars {
    pub kind: DerKind,
    pub p: VarId,
    pub q: VarId,
    pub loss: Option<VarId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodeVars {
    pub pl: VarId,
    pub ql: VarId,
    pub v: VarId,
    pub mdg: Option<(VarId, VarId)>,
    pub mpv: Option<(VarId, VarId)>,
    pub mess: Option<(VarId, VarId, VarId)>,
    pub ders: Vec<DerVars>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EdgeVars {
    pub p: VarId,
    pub q: VarId,
    pub l: VarId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Placement {
    /// Index into the mix entries.
    pub entry: usize,
    pub node: usize,
    pub var: VarId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelIndex {
    pub tasks: Vec<RepairTask>,
    /// `[task][t]`
    pub u: Vec<Vec<VarId>>,
    /// `[crew][task][t]`
    pub alpha: Vec<Vec<Vec<VarId>>>,
    pub beta: Vec<Vec<Vec<VarId>>>,
    pub placement: Vec<Placement>,
    /// `[node][t]`
    pub nodes: Vec<Vec<NodeVars>>,
    /// `[edge][t]`
    pub edges: Vec<Vec<EdgeVars>>,
    pub mess_params: Option<StorageLossParams>,
}

#[derive(Debug, Clone)]
pub struct RestorationModel {
    pub program: ConicProgram,
    pub graph: SuperNodeGraph,
    pub scenario: DamageScenario,
    pub mix: MerMixDecision,
    pub horizon: StudyHorizon,
    pub config: RestorationConfig,
    pub index: ModelIndex,
}

fn add_q_policy(prog: &mut ConicProgram, p: VarId, q: VarId, pol: QPolicy) {
    prog.add_linear(vec![(q, 1.0), (p, -pol.k1)], Sense::Ge, 0.0);
    prog.add_linear(vec![(q, 1.0), (p, -pol.k2)], Sense::Le, 0.0);
}

fn kind_policy(mix: &MerMixDecision, kind: MerKind) -> QPolicy {
    mix.units()
        .find(|e| e.spec.kind == kind)
        .map(|e| e.spec.q_policy)
        .unwrap_or_default()
}

/// Per-period limits on what each side of a line can push across it.
struct SideBounds {
    /// `[edge][t]`: (max forward p, max backward p, max |q|)
    p_fwd: Vec<Vec<f64>>,
    p_bwd: Vec<Vec<f64>>,
    q_abs: Vec<Vec<f64>>,
}

fn side_bounds(
    graph: &SuperNodeGraph,
    mix: &MerMixDecision,
    config: &RestorationConfig,
    pv: &[f64],
    der_avail: &[Vec<Vec<f64>>],
) -> SideBounds {
    let n_t = graph.horizon.n_periods;
    let s = graph.bases.s_mva;
    let n = graph.nodes.len();
    // Node-local supply and absorption, p.u.
    let mut sup_p = vec![vec![0.0; n_t]; n];
    let mut abs_p = vec![vec![0.0; n_t]; n];
    let mut sup_q = vec![vec![0.0; n_t]; n];
    let mut abs_q = vec![vec![0.0; n_t]; n];
    for (i, node) in graph.nodes.iter().enumerate() {
        for t in 0..n_t {
            abs_p[i][t] += node.load.p_total[t] / s;
            abs_q[i][t] += node.load.q_total[t] / s;
            let (gp, gq) = (node.grid.p[t] / s, node.grid.q[t] / s);
            sup_p[i][t] += gp.max(0.0);
            abs_p[i][t] += (-gp).max(0.0);
            sup_q[i][t] += gq.max(0.0);
            abs_q[i][t] += (-gq).max(0.0);
            for (d, der) in node.ders.iter().enumerate() {
                match der.kind {
                    DerKind::DG | DerKind::PV => {
                        let a = der_avail[i][d][t] / s;
                        sup_p[i][t] += a;
                        sup_q[i][t] += der.q_policy.k2 * a;
                    }
                    DerKind::ESS => {
                        let c = der.s_cap.unwrap_or(0.0) / s;
                        sup_p[i][t] += c;
                        sup_q[i][t] += c;
                        abs_q[i][t] += c;
                        if config.storage_charging {
                            abs_p[i][t] += c;
                        }
                    }
                }
            }
        }
    }
    // Mobile fleet can sit on either side.
    let mut fleet_sup_p = vec![0.0; n_t];
    let mut fleet_sup_q = vec![0.0; n_t];
    let mut fleet_abs = 0.0;
    for e in mix.units() {
        let c = e.count as f64;
        for t in 0..n_t {
            match e.spec.kind {
                MerKind::MDG => {
                    let a = c * e.spec.p_size.unwrap_or(0.0) / s;
                    fleet_sup_p[t] += a;
                    fleet_sup_q[t] += e.spec.q_policy.k2 * a;
                }
                MerKind::MPV => {
                    let a = c * e.spec.p_size.unwrap_or(0.0) * pv[t] / s;
                    fleet_sup_p[t] += a;
                    fleet_sup_q[t] += e.spec.q_policy.k2 * a;
                }
                MerKind::MESS => {
                    let a = c * e.spec.s_size.unwrap_or(0.0) / s;
                    fleet_sup_p[t] += a;
                    fleet_sup_q[t] += a;
                }
            }
        }
        if e.spec.kind == MerKind::MESS {
            fleet_abs += c * e.spec.s_size.unwrap_or(0.0) / s;
        }
    }
    let fleet_abs_p = if config.storage_charging { fleet_abs } else { 0.0 };
    // Losses inside the receiving side are bounded by each line's current limit.
    let (mut margin_p, mut margin_q) = (0.0, 0.0);
    for e in &graph.edges {
        let vmin = graph.nodes[e.from].vmin.min(graph.nodes[e.to].vmin);
        let lcap = e.i2max.min(e.smax * e.smax / (vmin * vmin));
        margin_p += e.r * lcap;
        margin_q += e.x * lcap;
    }

    let mut out = SideBounds {
        p_fwd: Vec::new(),
        p_bwd: Vec::new(),
        q_abs: Vec::new(),
    };
    for (b, e) in graph.edges.iter().enumerate() {
        // Nodes reachable from `from` without crossing edge b.
        let mut side = vec![false; n];
        let mut stack = vec![e.from];
        side[e.from] = true;
        while let Some(i) = stack.pop() {
            for (c, o) in graph.edges.iter().enumerate() {
                if c == b {
                    continue;
                }
                let nb = if o.from == i {
                    o.to
                } else if o.to == i {
                    o.from
                } else {
                    continue;
                };
                if !side[nb] {
                    side[nb] = true;
                    stack.push(nb);
                }
            }
        }
        let cap = e.smax;
        if side[e.to] {
            // Part of a loop: no side argument.
            out.p_fwd.push(vec![cap; n_t]);
            out.p_bwd.push(vec![cap; n_t]);
            out.q_abs.push(vec![cap; n_t]);
            continue;
        }
        let sum = |v: &Vec<Vec<f64>>, t: usize, want: bool| -> f64 {
            (0..n).filter(|&i| side[i] == want).map(|i| v[i][t]).sum()
        };
        let (mut f, mut bw, mut qa) = (Vec::new(), Vec::new(), Vec::new());
        for t in 0..n_t {
            let sa = sum(&sup_p, t, true) + fleet_sup_p[t];
            let sb = sum(&sup_p, t, false) + fleet_sup_p[t];
            let aa = sum(&abs_p, t, true) + fleet_abs_p + margin_p;
            let ab = sum(&abs_p, t, false) + fleet_abs_p + margin_p;
            f.push(sa.min(ab).min(cap));
            bw.push(sb.min(aa).min(cap));
            let qsa = sum(&sup_q, t, true) + fleet_sup_q[t];
            let qsb = sum(&sup_q, t, false) + fleet_sup_q[t];
            let qaa = sum(&abs_q, t, true) + fleet_abs + margin_q;
            let qab = sum(&abs_q, t, false) + fleet_abs + margin_q;
            qa.push(qsa.min(qab).max(qsb.min(qaa)).min(cap));
        }
        out.p_fwd.push(f);
        out.p_bwd.push(bw);
        out.q_abs.push(qa);
    }
    out
}

pub fn build_restoration_model(
    graph: &SuperNodeGraph,
    mix: &MerMixDecision,
    scenario: &DamageScenario,
    horizon: &StudyHorizon,
    config: &RestorationConfig,
) -> Result<RestorationModel> {
    horizon.validate()?;
    mix.check()?;
    let n_t = horizon.n_periods;
    if graph.horizon.n_periods != n_t {
        return Err(Error::Model(format!(
            "graph covers {} periods, horizon has {n_t}",
            graph.horizon.n_periods
        )));
    }
    for node in &graph.nodes {
        if node.load.p_total.len() != n_t || node.grid.p.len() != n_t {
            return Err(Error::Model(format!("node {} series length differs from horizon", node.id)));
        }
    }
    let d_n = scenario.damaged_lines.len();
    if scenario.repair_time.len() != d_n
        || scenario.depot_travel.len() != d_n
        || scenario.travel_time.len() != d_n
        || scenario.travel_time.iter().any(|r| r.len() != d_n)
    {
        return Err(Error::Model("scenario arrays do not match the damaged-line count".into()));
    }
    let s = graph.bases.s_mva;
    let dt = horizon.dt;
    let pv = config.pv_profile.values(horizon)?;
    let mut prog = ConicProgram::new();

    // Repair tasks, in scenario order.
    let mut tasks = Vec::with_capacity(d_n);
    for (k, line) in scenario.damaged_lines.iter().enumerate() {
        let edge = graph.edges.iter().position(|e| e.damaged && &e.line == line);
        let internal = graph.internal_repairs.iter().any(|r| &r.line == line);
        if edge.is_none() && !internal {
            return Err(Error::Model(format!("damaged line {line} does not appear in the graph")));
        }
        tasks.push(RepairTask {
            line: line.clone(),
            edge,
            repair_time: scenario.repair_time[k],
            depot_travel: scenario.depot_travel[k],
        });
    }
    let damaged_edges: BTreeSet<usize> = tasks.iter().filter_map(|t| t.edge).collect();
    for (b, e) in graph.edges.iter().enumerate() {
        if e.damaged && !damaged_edges.contains(&b) {
            return Err(Error::Model(format!("graph edge {} is damaged but not in the scenario", e.line)));
        }
    }

    // Line status and crews.
    let mut u = Vec::with_capacity(d_n);
    for task in &tasks {
        let row: Vec<VarId> = (0..n_t)
            .map(|t| prog.add_binary(format!("u[{}][{t}]", task.line), branch_class::LINE))
            .collect();
        // Nothing can be repaired before the first period of work.
        prog.variables[row[0]].upper = 0.0;
        for t in 1..n_t {
            prog.add_linear(vec![(row[t], 1.0), (row[t - 1], -1.0)], Sense::Ge, 0.0);
        }
        u.push(row);
    }
    let m_n = if d_n == 0 { 0 } else { scenario.n_crews };
    let mut alpha = Vec::with_capacity(m_n);
    let mut beta = Vec::with_capacity(m_n);
    for m in 0..m_n {
        let mut am = Vec::with_capacity(d_n);
        let mut bm = Vec::with_capacity(d_n);
        for task in &tasks {
            let a: Vec<VarId> = (0..n_t)
                .map(|t| prog.add_binary(format!("alpha[{m}][{}][{t}]", task.line), branch_class::CREW))
                .collect();
            let b: Vec<VarId> = (0..n_t)
                .map(|t| prog.add_binary(format!("beta[{m}][{}][{t}]", task.line), branch_class::CREW))
                .collect();
            for t in 0..n_t {
                if (t as u32) < task.depot_travel {
                    prog.variables[a[t]].upper = 0.0;
                }
                prog.add_linear(vec![(b[t], 1.0), (a[t], -1.0)], Sense::Le, 0.0);
            }
            am.push(a);
            bm.push(b);
        }
        for t in 0..n_t {
            prog.add_linear((0..d_n).map(|d| (am[d][t], 1.0)).collect(), Sense::Le, 1.0);
        }
        for a in 0..d_n {
            for b in 0..d_n {
                if a == b {
                    continue;
                }
                let tt = scenario.travel_time[a][b] as usize;
                for t in 0..n_t {
                    for tau in 1..=tt {
                        if t + tau < n_t {
                            prog.add_linear(vec![(am[a][t], 1.0), (am[b][t + tau], 1.0)], Sense::Le, 1.0);
                        }
                    }
                }
            }
        }
        alpha.push(am);
        beta.push(bm);
    }
    for (d, task) in tasks.iter().enumerate() {
        for t in 0..n_t {
            if m_n > 1 {
                prog.add_linear((0..m_n).map(|m| (beta[m][d][t], 1.0)).collect(), Sense::Le, 1.0);
            }
            if t + 1 < n_t {
                let mut row = vec![(u[d][t + 1], task.repair_time as f64)];
                for m in 0..m_n {
                    for tau in 0..=t {
                        row.push((beta[m][d][tau], -1.0));
                    }
                }
                prog.add_linear(row, Sense::Le, 0.0);
            }
        }
    }

    // Mobile resource placement.
    let mut placement = Vec::new();
    for (k, e) in mix.entries.iter().enumerate() {
        if e.count == 0 {
            continue;
        }
        let mut row = Vec::new();
        for (i, node) in graph.nodes.iter().enumerate() {
            let v = prog.add_integer(
                format!("N[{}][{}]", e.spec.label(), node.id),
                0.0,
                e.count as f64,
                branch_class::MER,
            );
            placement.push(Placement { entry: k, node: i, var: v });
            row.push((v, 1.0));
        }
        prog.add_linear(row, Sense::Le, e.count as f64);
    }
    let has = |kind: MerKind| mix.units().any(|e| e.spec.kind == kind);
    let mess_params = if has(MerKind::MESS) {
        let e = mix.units().find(|e| e.spec.kind == MerKind::MESS).unwrap();
        let missing = |parameter| Error::MissingParameter {
            record: e.spec.label(),
            parameter,
        };
        let fleet_s: f64 = mix
            .units()
            .filter(|e| e.spec.kind == MerKind::MESS)
            .map(|e| e.count as f64 * e.spec.s_size.unwrap_or(0.0))
            .sum();
        Some(StorageLossParams {
            r_e: e.spec.r_e.ok_or_else(|| missing("r_e"))?,
            r_ct: e.spec.r_ct.ok_or_else(|| missing("r_ct"))?,
            s_cap: fleet_s / s,
        })
    } else {
        None
    };
    let placed = |kind: MerKind, node: usize, f: &dyn Fn(&crate::netmodel::MerSpec) -> f64| {
        placement
            .iter()
            .filter(|p| p.node == node && mix.entries[p.entry].spec.kind == kind)
            .map(|p| (p.var, f(&mix.entries[p.entry].spec)))
            .collect::<Vec<_>>()
    };

    // Node variables.
    let mut der_avail = Vec::with_capacity(graph.nodes.len());
    for node in &graph.nodes {
        der_avail.push(
            node.ders
                .iter()
                .map(|d| d.availability(horizon, &config.pv_profile))
                .collect::<Result<Vec<_>>>()?,
        );
    }
    let mut nodes = Vec::with_capacity(graph.nodes.len());
    let mut objective_offset = 0.0;
    for (i, node) in graph.nodes.iter().enumerate() {
        let (vl, vu) = (node.vmin * node.vmin, node.vmax * node.vmax);
        let mut per_t = Vec::with_capacity(n_t);
        for t in 0..n_t {
            let tag = |what: &str| format!("{what}[{}][{t}]", node.id);
            let (pf, qf) = if config.critical_floor {
                (node.load.p_crit[t] / s, node.load.q_crit[t] / s)
            } else {
                (0.0, 0.0)
            };
            let pl = prog.add_continuous(tag("pL"), pf, node.load.p_total[t] / s);
            let ql = prog.add_continuous(tag("qL"), qf, node.load.q_total[t] / s);
            objective_offset += node.load.p_total[t] * dt;
            prog.add_objective(pl, -s * dt);
            let v = prog.add_continuous(tag("v"), vl, vu);

            let mdg = if has(MerKind::MDG) {
                let p = prog.add_continuous(tag("p_mdg"), 0.0, f64::INFINITY);
                let q = prog.add_continuous(tag("q_mdg"), 0.0, f64::INFINITY);
                let mut row = vec![(p, 1.0)];
                for (var, c) in placed(MerKind::MDG, i, &|m| m.p_size.unwrap_or(0.0) / s) {
                    row.push((var, -c));
                }
                prog.add_linear(row, Sense::Le, 0.0);
                add_q_policy(&mut prog, p, q, kind_policy(mix, MerKind::MDG));
                Some((p, q))
            } else {
                None
            };
            let mpv = if has(MerKind::MPV) {
                let p = prog.add_continuous(tag("p_mpv"), 0.0, f64::INFINITY);
                let q = prog.add_continuous(tag("q_mpv"), 0.0, f64::INFINITY);
                let mut row = vec![(p, 1.0)];
                for (var, c) in placed(MerKind::MPV, i, &|m| m.p_size.unwrap_or(0.0) * pv[t] / s) {
                    row.push((var, -c));
                }
                let sense = if config.pv_curtailable { Sense::Le } else { Sense::Eq };
                prog.add_linear(row, sense, 0.0);
                add_q_policy(&mut prog, p, q, kind_policy(mix, MerKind::MPV));
                Some((p, q))
            } else {
                None
            };
            let mess = if let Some(params) = &mess_params {
                let lo = if config.storage_charging { -params.s_cap } else { 0.0 };
                let p = prog.add_continuous(tag("p_mess"), lo, params.s_cap);
                let q = prog.add_continuous(tag("q_mess"), -params.s_cap, params.s_cap);
                let loss = prog.add_continuous(tag("loss_mess"), 0.0, f64::INFINITY);
                let mut radius = LinExpr::new();
                for (var, c) in placed(MerKind::MESS, i, &|m| m.s_size.unwrap_or(0.0) / s) {
                    radius.push(var, c);
                }
                prog.add_soc(vec![LinExpr::var(p), LinExpr::var(q)], radius);
                match config.relax {
                    Relaxation::Hull => {
                        hull_storage_loss_params(params, node.vmin, node.vmax, config.storage_cone)
                            .apply(&mut prog, [p, q, loss, v])
                    }
                    Relaxation::Exact => prog.nonconvex.push(QuadraticEquality {
                        squares: vec![(p, params.r_e), (q, params.r_ct)],
                        product: (loss, v),
                    }),
                }
                Some((p, q, loss))
            } else {
                None
            };
            let mut ders = Vec::new();
            for (d, der) in node.ders.iter().enumerate() {
                let dtag = |what: &str| format!("{what}[{}#{d}][{t}]", node.id);
                let a = der_avail[i][d][t] / s;
                let dv = match der.kind {
                    DerKind::DG => {
                        let p = prog.add_continuous(dtag("p_dg"), 0.0, a);
                        let q = prog.add_continuous(dtag("q_dg"), 0.0, f64::INFINITY);
                        add_q_policy(&mut prog, p, q, der.q_policy);
                        DerVars { kind: der.kind, p, q, loss: None }
                    }
                    DerKind::PV => {
                        let lo = if config.pv_curtailable { 0.0 } else { a };
                        let p = prog.add_continuous(dtag("p_pv"), lo, a);
                        let q = prog.add_continuous(dtag("q_pv"), 0.0, f64::INFINITY);
                        add_q_policy(&mut prog, p, q, der.q_policy);
                        DerVars { kind: der.kind, p, q, loss: None }
                    }
                    DerKind::ESS => {
                        let params = der.loss_params(s)?;
                        let c = params.s_cap;
                        let lo = if config.storage_charging { -c } else { 0.0 };
                        let p = prog.add_continuous(dtag("p_es"), lo, c);
                        let q = prog.add_continuous(dtag("q_es"), -c, c);
                        let loss = prog.add_continuous(dtag("loss_es"), 0.0, f64::INFINITY);
                        prog.add_soc(vec![LinExpr::var(p), LinExpr::var(q)], LinExpr::constant(c));
                        match config.relax {
                            Relaxation::Hull => hull_storage_loss_params(
                                &params,
                                node.vmin,
                                node.vmax,
                                config.storage_cone,
                            )
                            .apply(&mut prog, [p, q, loss, v]),
                            Relaxation::Exact => prog.nonconvex.push(QuadraticEquality {
                                squares: vec![(p, params.r_e), (q, params.r_ct)],
                                product: (loss, v),
                            }),
                        }
                        DerVars { kind: der.kind, p, q, loss: Some(loss) }
                    }
                };
                ders.push(dv);
            }
            per_t.push(NodeVars {
                pl,
                ql,
                v,
                mdg,
                mpv,
                mess,
                ders,
            });
        }
        nodes.push(per_t);
    }
    prog.objective_offset = objective_offset;

    // Storage energy as running sums, MWh.
    for (i, node) in graph.nodes.iter().enumerate() {
        for t in 0..n_t {
            if let Some(_) = mess_params {
                let mut row: Vec<(VarId, f64)> = Vec::new();
                for tau in 0..=t {
                    let (p, _, l) = nodes[i][tau].mess.unwrap();
                    row.push((p, s * dt));
                    row.push((l, s * dt));
                }
                prog.add_linear(row.clone(), Sense::Ge, 0.0);
                for (var, c) in placed(MerKind::MESS, i, &|m| m.e_size.unwrap_or(0.0)) {
                    row.push((var, -c));
                }
                prog.add_linear(row, Sense::Le, 0.0);
            }
            for (d, der) in node.ders.iter().enumerate() {
                if der.kind != DerKind::ESS {
                    continue;
                }
                let mut row: Vec<(VarId, f64)> = Vec::new();
                for tau in 0..=t {
                    let dv = &nodes[i][tau].ders[d];
                    row.push((dv.p, s * dt));
                    row.push((dv.loss.unwrap(), s * dt));
                }
                let es = der.e_surplus.unwrap_or(0.0);
                let ec = der.e_cap.unwrap_or(0.0);
                prog.add_linear(row.clone(), Sense::Le, es);
                prog.add_linear(row, Sense::Ge, es - ec);
            }
        }
    }

    // Lines.
    let bounds = if config.tight_flow_bounds && !graph.edges.is_empty() {
        Some(side_bounds(graph, mix, config, &pv, &der_avail))
    } else {
        None
    };
    let mut edges = Vec::with_capacity(graph.edges.len());
    for (b, e) in graph.edges.iter().enumerate() {
        let (fr, to) = (&graph.nodes[e.from], &graph.nodes[e.to]);
        let task = tasks.iter().position(|t| t.edge == Some(b));
        let vu2 = (fr.vmax * fr.vmax).max(to.vmax * to.vmax);
        let vl2 = (fr.vmin * fr.vmin).min(to.vmin * to.vmin);
        let big_m = (vu2 - vl2) + 2.0 * (e.r + e.x) * e.smax + (e.r * e.r + e.x * e.x) * e.i2max;
        let mut per_t = Vec::with_capacity(n_t);
        for t in 0..n_t {
            let tag = |what: &str| format!("{what}[{}][{t}]", e.line);
            let (fwd, bwd, qa) = match &bounds {
                Some(sb) => (sb.p_fwd[b][t], sb.p_bwd[b][t], sb.q_abs[b][t]),
                None => (e.smax, e.smax, e.smax),
            };
            let lcap = e
                .i2max
                .min((fwd.max(bwd) * fwd.max(bwd) + qa * qa) / (fr.vmin * fr.vmin));
            let p = prog.add_continuous(tag("p"), -bwd, fwd);
            let q = prog.add_continuous(tag("q"), -qa, qa);
            let l = prog.add_continuous(tag("l"), 0.0, lcap);
            prog.add_soc(vec![LinExpr::var(p), LinExpr::var(q)], LinExpr::constant(e.smax));
            let v_from = nodes[e.from][t].v;
            let v_to = nodes[e.to][t].v;
            match config.relax {
                Relaxation::Hull => hull_line_flow_params(fr.vmin, fr.vmax, e.smax)
                    .apply(&mut prog, [p, q, l, v_from]),
                Relaxation::Exact => prog.nonconvex.push(QuadraticEquality {
                    squares: vec![(p, 1.0), (q, 1.0)],
                    product: (l, v_from),
                }),
            }
            let drop = vec![
                (v_from, 1.0),
                (v_to, -1.0),
                (p, -2.0 * e.r),
                (q, -2.0 * e.x),
                (l, e.r * e.r + e.x * e.x),
            ];
            match task {
                None => prog.add_linear(drop, Sense::Eq, 0.0),
                Some(d) => {
                    let uv = u[d][t];
                    let mut up = drop.clone();
                    up.push((uv, big_m));
                    prog.add_linear(up, Sense::Le, big_m);
                    let mut dn = drop;
                    dn.push((uv, -big_m));
                    prog.add_linear(dn, Sense::Ge, -big_m);
                    prog.add_linear(vec![(p, 1.0), (uv, -fwd)], Sense::Le, 0.0);
                    prog.add_linear(vec![(p, 1.0), (uv, bwd)], Sense::Ge, 0.0);
                    prog.add_linear(vec![(q, 1.0), (uv, -qa)], Sense::Le, 0.0);
                    prog.add_linear(vec![(q, 1.0), (uv, qa)], Sense::Ge, 0.0);
                    prog.add_linear(vec![(l, 1.0), (uv, -lcap)], Sense::Le, 0.0);
                }
            }
            per_t.push(EdgeVars { p, q, l });
        }
        edges.push(per_t);
    }

    // Nodal balance.
    for (i, node) in graph.nodes.iter().enumerate() {
        for t in 0..n_t {
            let nv = &nodes[i][t];
            let mut pr: Vec<(VarId, f64)> = vec![(nv.pl, -1.0)];
            let mut qr: Vec<(VarId, f64)> = vec![(nv.ql, -1.0)];
            for (p, q) in [nv.mdg, nv.mpv].into_iter().flatten() {
                pr.push((p, 1.0));
                qr.push((q, 1.0));
            }
            if let Some((p, q, _)) = nv.mess {
                pr.push((p, 1.0));
                qr.push((q, 1.0));
            }
            for d in &nv.ders {
                pr.push((d.p, 1.0));
                qr.push((d.q, 1.0));
            }
            for (b, e) in graph.edges.iter().enumerate() {
                let ev = edges[b][t];
                if e.to == i {
                    pr.push((ev.p, 1.0));
                    pr.push((ev.l, -e.r));
                    qr.push((ev.q, 1.0));
                    qr.push((ev.l, -e.x));
                }
                if e.from == i {
                    pr.push((ev.p, -1.0));
                    qr.push((ev.q, -1.0));
                }
            }
            prog.add_linear(pr, Sense::Eq, -node.grid.p[t] / s);
            prog.add_linear(qr, Sense::Eq, -node.grid.q[t] / s);
        }
    }

    prog.validate()?;
    Ok(RestorationModel {
        program: prog,
        graph: graph.clone(),
        scenario: scenario.clone(),
        mix: mix.clone(),
        horizon: *horizon,
        config: config.clone(),
        index: ModelIndex {
            tasks,
            u,
            alpha,
            beta,
            placement,
            nodes,
            edges,
            mess_params,
        },
    })
}

impl RestorationModel {
    pub fn n_crews(&self) -> usize {
        self.index.alpha.len()
    }

    pub fn task_names(&self) -> Vec<String> {
        self.index.tasks.iter().map(|t| t.line.0.clone()).collect()
    }
}
