//! Exhaustive reference solvers for small instances, and a feasibility check
//! of relaxed plans against the exact branch-flow and storage-loss equations.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::netmodel::{DerKind, MerKind};
use crate::postdisaster::{earliest_start, RestorationModel, RestorationPlan, Schedule, Visit};
use crate::predisaster::{MerMixDecision, MixEntry, SizingModel};
use crate::solver::{solve_continuous, ContinuousBackend, ContinuousStatus, VarId};

pub const MAX_ORACLE_LINES: usize = 4;
pub const MAX_ORACLE_CREWS: usize = 2;
pub const MAX_ORACLE_PERIODS: usize = 12;
pub const MAX_ORACLE_UNITS_PER_KIND: u32 = 4;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleOracleResult {
    pub objective: f64,
    pub schedule: Schedule,
    pub energized_at: Vec<Option<usize>>,
    /// `(placement index, count)` for every placement variable.
    pub placement: Vec<u32>,
    /// Distinct energization profiles examined.
    pub n_profiles: usize,
    pub n_solves: usize,
}

fn routes_rec(
    model: &RestorationModel,
    remaining: &mut Vec<usize>,
    routes: &mut Vec<Vec<Visit>>,
    out: &mut BTreeMap<Vec<Option<usize>>, Schedule>,
) {
    let tasks = &model.index.tasks;
    let n_t = model.horizon.n_periods;
    if remaining.is_empty() {
        let s = Schedule { routes: routes.clone() };
        out.entry(s.energization(tasks, n_t)).or_insert(s);
        return;
    }
    for k in 0..remaining.len() {
        let d = remaining.remove(k);
        for m in 0..routes.len() {
            // Crews are interchangeable: never open a new crew past the first idle one.
            if m > 0 && routes[m - 1].is_empty() && routes[m].is_empty() {
                break;
            }
            let start = earliest_start(tasks, &model.scenario.travel_time, &routes[m], d);
            routes[m].push(Visit { task: d, start });
            routes_rec(model, remaining, routes, out);
            routes[m].pop();
        }
        remaining.insert(k, d);
    }
}

/// All non-preemptive, idle-free crew schedules, one per energization profile.
pub fn enumerate_schedule_profiles(model: &RestorationModel) -> Result<BTreeMap<Vec<Option<usize>>, Schedule>> {
    let n_d = model.index.tasks.len();
    let n_m = model.n_crews();
    let n_t = model.horizon.n_periods;
    if n_d > MAX_ORACLE_LINES || n_m > MAX_ORACLE_CREWS || n_t > MAX_ORACLE_PERIODS {
        return Err(Error::TooLarge(format!(
            "{n_d} lines, {n_m} crews, {n_t} periods; limits are {MAX_ORACLE_LINES}, {MAX_ORACLE_CREWS}, {MAX_ORACLE_PERIODS}"
        )));
    }
    let mut out = BTreeMap::new();
    if n_d == 0 {
        out.insert(Vec::new(), Schedule::default());
        return Ok(out);
    }
    let mut remaining: Vec<usize> = (0..n_d).collect();
    let mut routes = vec![Vec::new(); n_m];
    routes_rec(model, &mut remaining, &mut routes, &mut out);
    Ok(out)
}

/// Ways to spread `count` identical units over `n` slots.
fn compositions(count: u32, n: usize) -> Vec<Vec<u32>> {
    if n == 0 {
        return if count == 0 { vec![Vec::new()] } else { Vec::new() };
    }
    if n == 1 {
        return vec![vec![count]];
    }
    let mut out = Vec::new();
    for first in (0..=count).rev() {
        for mut rest in compositions(count - first, n - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Every full placement of the mix, as one count per placement variable.
fn placements(model: &RestorationModel) -> Vec<Vec<u32>> {
    let idx = &model.index;
    let mut per_entry: Vec<(Vec<usize>, u32)> = Vec::new();
    for (k, e) in model.mix.entries.iter().enumerate() {
        let slots: Vec<usize> = idx
            .placement
            .iter()
            .enumerate()
            .filter(|(_, p)| p.entry == k)
            .map(|(j, _)| j)
            .collect();
        if !slots.is_empty() {
            per_entry.push((slots, e.count));
        }
    }
    let mut out = vec![vec![0u32; idx.placement.len()]];
    for (slots, count) in per_entry {
        let mut next = Vec::new();
        for base in &out {
            for c in compositions(count, slots.len()) {
                let mut b = base.clone();
                for (j, v) in slots.iter().zip(c) {
                    b[*j] = v;
                }
                next.push(b);
            }
        }
        out = next;
    }
    out
}

/// Brute-force optimum of a small restoration model: every crew ordering
/// (deduplicated by when lines come back) times every placement of the fleet,
/// each solved as a continuous program with all integers fixed.
pub fn enumerate_schedules<B: ContinuousBackend + ?Sized>(
    model: &RestorationModel,
    backend: &B,
) -> Result<ScheduleOracleResult> {
    let profiles = enumerate_schedule_profiles(model)?;
    let places = placements(model);
    let mut best: Option<ScheduleOracleResult> = None;
    let mut n_solves = 0;
    for (profile, sched) in &profiles {
        let fixed = sched.assignment(model);
        for pl in &places {
            let mut b = model.program.bounds();
            for &(v, val) in &fixed {
                b[v] = (val, val);
            }
            for (p, &c) in model.index.placement.iter().zip(pl) {
                b[p.var] = (c as f64, c as f64);
            }
            n_solves += 1;
            let sol = solve_continuous(&model.program, Some(&b), backend)?;
            if sol.status != ContinuousStatus::Optimal {
                continue;
            }
            if best.as_ref().is_none_or(|r| sol.objective < r.objective - 1e-9) {
                best = Some(ScheduleOracleResult {
                    objective: sol.objective,
                    schedule: sched.clone(),
                    energized_at: profile.clone(),
                    placement: pl.clone(),
                    n_profiles: profiles.len(),
                    n_solves: 0,
                });
            }
        }
    }
    let mut best = best.ok_or_else(|| Error::Infeasible("no enumerated schedule is feasible".into()))?;
    best.n_solves = n_solves;
    Ok(best)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixOracleResult {
    pub mix: MerMixDecision,
    pub counts: Vec<u32>,
    pub cost: f64,
    pub n_candidates: usize,
    pub n_solves: usize,
}

/// Cheapest feasible mix with at most four units of each kind, found by
/// checking candidates in order of cost.
pub fn enumerate_mixes<B: ContinuousBackend + ?Sized>(model: &SizingModel, backend: &B) -> Result<MixOracleResult> {
    let cat = &model.catalog;
    let mut cands: Vec<(f64, Vec<u32>)> = vec![(0.0, Vec::new())];
    for m in cat {
        let mut next = Vec::new();
        for (cost, c) in &cands {
            for n in 0..=MAX_ORACLE_UNITS_PER_KIND {
                let mut c2 = c.clone();
                c2.push(n);
                next.push((cost + n as f64 * m.cost, c2));
            }
        }
        cands = next;
    }
    cands.retain(|(_, c)| {
        [MerKind::MDG, MerKind::MESS, MerKind::MPV].iter().all(|&k| {
            cat.iter()
                .zip(c)
                .filter(|(m, _)| m.kind == k)
                .map(|(_, &n)| n)
                .sum::<u32>()
                <= MAX_ORACLE_UNITS_PER_KIND
        })
    });
    cands.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
    let n_candidates = cands.len();
    for (n_solves, (cost, counts)) in cands.into_iter().enumerate() {
        let b = model.bounds_for_counts(&counts);
        let sol = solve_continuous(&model.program, Some(&b), backend)?;
        if sol.status == ContinuousStatus::Optimal {
            let entries = cat
                .iter()
                .zip(&counts)
                .map(|(m, &count)| MixEntry { spec: m.clone(), count })
                .collect();
            return Ok(MixOracleResult {
                mix: MerMixDecision::new(entries),
                counts,
                cost,
                n_candidates,
                n_solves: n_solves + 1,
            });
        }
    }
    Err(Error::Infeasible(
        "no mix with at most four units per kind covers the shortage".into(),
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualEntry {
    /// Line id or storage label.
    pub element: String,
    /// 1-based period.
    pub period: usize,
    pub residual: f64,
    /// Exact value of the dependent variable (`ℓ` or loss) at the plan's
    /// other coordinates.
    pub exact: f64,
    /// The plan's value of that variable.
    pub relaxed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityReport {
    pub tolerance: f64,
    /// `|p² + q² − v·ℓ|` for every in-service line and period.
    pub line_residuals: Vec<ResidualEntry>,
    /// `|r_e·p² + r_ct·q² − loss·v|` for every storage unit and period.
    pub storage_residuals: Vec<ResidualEntry>,
    pub max_residual: f64,
    /// Energy (MWh) the relaxed plan spends on losses beyond the exact
    /// equations. Replacing the dependent variables by their exact values
    /// frees at most this much energy, so it bounds how far the plan's
    /// objective can sit from that of the repaired point.
    pub relaxation_gap_estimate: f64,
    /// Points where the exact value would need the dependent variable to go
    /// up by more than the tolerance (the relaxation cannot produce these).
    pub n_lift_up: usize,
    /// Whether every repaired current stays within its line limit.
    pub repaired_within_limits: bool,
}

impl FeasibilityReport {
    pub fn feasible(&self) -> bool {
        self.max_residual <= self.tolerance
    }

    pub fn violations(&self) -> impl Iterator<Item = &ResidualEntry> {
        self.line_residuals
            .iter()
            .chain(&self.storage_residuals)
            .filter(move |r| r.residual > self.tolerance)
    }
}

/// Evaluates the exact nonconvex equalities at a plan produced under the hull relaxation.
pub fn check_nonconvex_feasibility(plan: &RestorationPlan, model: &RestorationModel, tolerance: f64) -> Result<FeasibilityReport> {
    let g = &model.graph;
    let s = g.bases.s_mva;
    let dt = model.horizon.dt;
    let n_t = model.horizon.n_periods;
    let mut rep = FeasibilityReport {
        tolerance,
        line_residuals: Vec::new(),
        storage_residuals: Vec::new(),
        max_residual: 0.0,
        relaxation_gap_estimate: 0.0,
        n_lift_up: 0,
        repaired_within_limits: true,
    };
    for (b, e) in g.edges.iter().enumerate() {
        let task = model.index.tasks.iter().position(|t| t.edge == Some(b));
        for t in 0..n_t {
            if task.is_some_and(|d| plan.line_status[d][t] == 0) {
                continue;
            }
            let f = plan.flows[b][t];
            let v = plan.dispatch[e.from][t].v;
            let exact = (f.p * f.p + f.q * f.q) / v;
            if exact > f.l + tolerance {
                rep.n_lift_up += 1;
            }
            if exact > e.i2max + tolerance {
                rep.repaired_within_limits = false;
            }
            rep.relaxation_gap_estimate += e.r * (f.l - exact).max(0.0) * s * dt;
            rep.line_residuals.push(ResidualEntry {
                element: e.line.0.clone(),
                period: t + 1,
                residual: math::abs(f.p * f.p + f.q * f.q - v * f.l),
                exact,
                relaxed: f.l,
            });
        }
    }
    for (i, node) in g.nodes.iter().enumerate() {
        let mut units: Vec<(String, f64, f64, usize)> = Vec::new();
        if let Some(p) = &model.index.mess_params {
            units.push((format!("MESS@{}", node.id), p.r_e, p.r_ct, usize::MAX));
        }
        for (k, der) in node.ders.iter().enumerate() {
            if der.kind == DerKind::ESS {
                let p = der.loss_params(s)?;
                units.push((der.label(), p.r_e, p.r_ct, k));
            }
        }
        for (label, r_e, r_ct, k) in units {
            for t in 0..n_t {
                let d = &plan.dispatch[i][t];
                let u = if k == usize::MAX { d.mess } else { d.ders[k] };
                let exact = (r_e * u.p * u.p + r_ct * u.q * u.q) / d.v;
                if exact > u.loss + tolerance {
                    rep.n_lift_up += 1;
                }
                rep.relaxation_gap_estimate += (u.loss - exact).max(0.0) * s * dt;
                rep.storage_residuals.push(ResidualEntry {
                    element: label.clone(),
                    period: t + 1,
                    residual: math::abs(r_e * u.p * u.p + r_ct * u.q * u.q - u.loss * d.v),
                    exact,
                    relaxed: u.loss,
                });
            }
        }
    }
    rep.max_residual = rep
        .line_residuals
        .iter()
        .chain(&rep.storage_residuals)
        .map(|r| r.residual)
        .fold(0.0, f64::max);
    Ok(rep)
}

/// Values of every crew, line-status and placement variable of a plan, for
/// re-solving the model with the discrete part held fixed.
pub fn plan_integer_fixings(plan: &RestorationPlan, model: &RestorationModel) -> Vec<(VarId, f64)> {
    let idx = &model.index;
    let mut out = Vec::new();
    for (d, row) in idx.u.iter().enumerate() {
        for (t, &v) in row.iter().enumerate() {
            out.push((v, plan.line_status[d][t] as f64));
        }
    }
    for m in 0..idx.alpha.len() {
        for d in 0..idx.tasks.len() {
            for t in 0..model.horizon.n_periods {
                out.push((idx.alpha[m][d][t], plan.crew_visit[m][d][t] as f64));
                out.push((idx.beta[m][d][t], plan.crew_work[m][d][t] as f64));
            }
        }
    }
    for p in &idx.placement {
        let spec = &model.mix.entries[p.entry].spec;
        let c = plan
            .placement
            .iter()
            .find(|d| d.node == p.node && d.kind == spec.kind && d.size_index == spec.size_index)
            .map_or(0, |d| d.count);
        out.push((p.var, c as f64));
    }
    out
}
