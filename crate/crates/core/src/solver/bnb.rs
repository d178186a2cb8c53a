//! Best-bound branch-and-bound over a continuous conic backend.

use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::backend::{finish, infeasible, ContinuousBackend, ContinuousSolution, ContinuousStatus};
use super::presolve::{presolve, Presolved};
use super::program::{ConicProgram, VarId};
use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BranchingRule {
    /// Largest distance to the nearest integer; ties by branch class, then id.
    MostFractional,
    /// Lowest-id fractional variable.
    FirstFractional,
    /// Most fractional within the first branch class, in `order`, that has a
    /// fractional variable; ties by id.
    ClassPriority { order: [u8; 4] },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchRule {
    BestBound,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BnBConfig {
    pub gap: f64,
    pub node_limit: usize,
    /// Seconds, measured by the caller's clock.
    pub time_limit: Option<f64>,
    pub branching: BranchingRule,
    pub search: SearchRule,
    pub int_tol: f64,
    /// Nodes evaluated per batch; results are processed in pop order.
    pub threads: usize,
    /// Run a rounding dive from the root before branching.
    pub dive: bool,
}

impl Default for BnBConfig {
    fn default() -> Self {
        BnBConfig {
            gap: 1e-3,
            node_limit: 1_000_000,
            time_limit: None,
            branching: BranchingRule::MostFractional,
            search: SearchRule::BestBound,
            int_tol: 1e-6,
            threads: 1,
            dive: true,
        }
    }
}

impl BnBConfig {
    pub fn with_gap(gap: f64) -> Self {
        BnBConfig {
            gap,
            ..Self::default()
        }
    }
}

/// Source of elapsed wall time; the core crate has none of its own.
pub trait Clock {
    fn elapsed(&self) -> f64;
}

pub struct NoClock;

impl Clock for NoClock {
    fn elapsed(&self) -> f64 {
        0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MipStatus {
    Optimal,
    /// A limit stopped the search with an incumbent in hand.
    Feasible,
    Infeasible,
    Unbounded,
    /// A limit stopped the search before any incumbent was found.
    Limit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitKind {
    Nodes,
    Time,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MipSolution {
    pub status: MipStatus,
    pub limit: Option<LimitKind>,
    pub x: Vec<f64>,
    pub objective: f64,
    pub bound: f64,
    pub gap: f64,
    pub node_count: usize,
}

impl MipSolution {
    pub fn has_incumbent(&self) -> bool {
        !self.x.is_empty()
    }
}

pub fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    (incumbent - bound) / math::abs(incumbent).max(1.0)
}

struct Node {
    fixings: Vec<(VarId, f64, f64)>,
    bound: f64,
    seq: u64,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // Max-heap: the smallest bound, then the oldest node, is the greatest.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.seq.cmp(&self.seq))
    }
}

struct Engine<'a, B: ?Sized, C: ?Sized> {
    program: &'a ConicProgram,
    config: &'a BnBConfig,
    backend: &'a B,
    clock: &'a C,
    root: Vec<(f64, f64)>,
    ints: Vec<VarId>,
    incumbent: Option<(f64, Vec<f64>)>,
    node_count: usize,
    pruned_min: f64,
}

impl<B: ContinuousBackend + ?Sized, C: Clock + ?Sized> Engine<'_, B, C> {
    fn bounds_for(&self, fixings: &[(VarId, f64, f64)]) -> Vec<(f64, f64)> {
        let mut b = self.root.clone();
        for &(v, lo, hi) in fixings {
            b[v] = (lo, hi);
        }
        b
    }

    fn evaluate(&mut self, all: &[Vec<(f64, f64)>]) -> Result<Vec<ContinuousSolution>> {
        let pres: Vec<Presolved> = all.iter().map(|b| presolve(self.program, b)).collect();
        let forms: Vec<_> = pres
            .iter()
            .filter_map(|p| match p {
                Presolved::Reduced { form, .. } if form.n > 0 => Some(form),
                _ => None,
            })
            .collect();
        let mut results = self.backend.solve_batch(&forms).into_iter();
        let mut out = Vec::with_capacity(all.len());
        for (bounds, pre) in all.iter().zip(&pres) {
            match pre {
                Presolved::Infeasible => out.push(infeasible()),
                Presolved::Reduced { form, .. } if form.n == 0 => {
                    let x = pre.postsolve(&[]);
                    out.push(ContinuousSolution {
                        status: ContinuousStatus::Optimal,
                        objective: self.program.objective_value(&x),
                        x,
                    })
                }
                Presolved::Reduced { .. } => {
                    let res = results.next().expect("one result per form");
                    out.push(finish(self.program, bounds, pre, res)?);
                }
            }
        }
        Ok(out)
    }

    fn solve_one(&mut self, bounds: Vec<(f64, f64)>) -> Result<ContinuousSolution> {
        Ok(self.evaluate(&[bounds])?.pop().unwrap())
    }

    fn threshold(&self) -> f64 {
        match &self.incumbent {
            Some((obj, _)) => obj - self.config.gap * math::abs(*obj).max(1.0),
            None => f64::INFINITY,
        }
    }

    fn incumbent_obj(&self) -> f64 {
        self.incumbent.as_ref().map_or(f64::INFINITY, |i| i.0)
    }

    fn fractional(&self, x: &[f64]) -> Vec<(VarId, f64)> {
        self.ints
            .iter()
            .filter_map(|&v| {
                let f = math::abs(x[v] - math::round(x[v]));
                (f > self.config.int_tol).then_some((v, f))
            })
            .collect()
    }

    fn select(&self, frac: &[(VarId, f64)]) -> VarId {
        match self.config.branching {
            BranchingRule::FirstFractional => frac.iter().map(|f| f.0).min().unwrap(),
            BranchingRule::MostFractional => {
                let best = frac.iter().map(|f| f.1).fold(0.0, f64::max);
                frac.iter()
                    .filter(|f| f.1 >= best - 1e-3)
                    .map(|f| (self.program.variables[f.0].branch_class, f.0))
                    .min()
                    .unwrap()
                    .1
            }
            BranchingRule::ClassPriority { order } => {
                let rank = |v: VarId| {
                    let c = self.program.variables[v].branch_class;
                    order.iter().position(|&o| o == c).unwrap_or(order.len())
                };
                let top = frac.iter().map(|f| rank(f.0)).min().unwrap();
                let mut best = (f64::NEG_INFINITY, VarId::MAX);
                for &(v, f) in frac.iter().filter(|f| rank(f.0) == top) {
                    if f > best.0 + 1e-12 || (math::abs(f - best.0) <= 1e-12 && v < best.1) {
                        best = (f, v);
                    }
                }
                best.1
            }
        }
    }

    /// Rounds the integer part of `x`, fixes it and re-solves the rest.
    fn try_incumbent(&mut self, bounds: &[(f64, f64)], x: &[f64]) -> Result<bool> {
        let mut b = bounds.to_vec();
        for &v in &self.ints {
            let r = math::round(x[v]);
            if r < b[v].0 - 1e-9 || r > b[v].1 + 1e-9 {
                return Ok(false);
            }
            b[v] = (r, r);
        }
        let sol = self.solve_one(b)?;
        if sol.status != ContinuousStatus::Optimal {
            return Ok(false);
        }
        if sol.objective < self.incumbent_obj() {
            self.incumbent = Some((sol.objective, sol.x));
            return Ok(true);
        }
        Ok(false)
    }

    fn out_of_time(&self) -> bool {
        self.config
            .time_limit
            .is_some_and(|t| self.clock.elapsed() >= t)
    }

    /// Repeatedly fixes the least fractional integer to its rounded value.
    fn dive(&mut self, mut bounds: Vec<(f64, f64)>, mut sol: ContinuousSolution) -> Result<()> {
        let max_steps = 2 * self.ints.len() + 2;
        for _ in 0..max_steps {
            if self.out_of_time() || sol.objective >= self.threshold() {
                return Ok(());
            }
            let frac = self.fractional(&sol.x);
            if frac.is_empty() {
                self.try_incumbent(&bounds, &sol.x)?;
                return Ok(());
            }
            let &(v, _) = frac
                .iter()
                .min_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)))
                .unwrap();
            let r = math::round(sol.x[v]);
            let other = if r > sol.x[v] { r - 1.0 } else { r + 1.0 };
            let mut next = None;
            for val in [r, other] {
                if val < bounds[v].0 - 1e-9 || val > bounds[v].1 + 1e-9 {
                    continue;
                }
                let mut b = bounds.clone();
                b[v] = (val, val);
                let s = self.solve_one(b.clone())?;
                if s.status == ContinuousStatus::Optimal {
                    next = Some((b, s));
                    break;
                }
            }
            match next {
                Some((b, s)) => {
                    bounds = b;
                    sol = s;
                }
                None => return Ok(()),
            }
        }
        Ok(())
    }
}

/// Solves `program` to the configured relative gap.
pub fn solve_michp<B: ContinuousBackend + ?Sized>(
    program: &ConicProgram,
    config: &BnBConfig,
    backend: &B,
) -> Result<MipSolution> {
    solve_michp_with(program, config, backend, &NoClock, &[])
}

/// As [`solve_michp`], with a wall clock for the time limit and partial
/// assignments used to seed the incumbent. Each hint is fixed, solved and
/// dived from before the tree search starts.
pub fn solve_michp_with<B: ContinuousBackend + ?Sized, C: Clock + ?Sized>(
    program: &ConicProgram,
    config: &BnBConfig,
    backend: &B,
    clock: &C,
    hints: &[Vec<(VarId, f64)>],
) -> Result<MipSolution> {
    if !(config.gap > 0.0) {
        return Err(Error::Model("branch-and-bound gap must be positive".into()));
    }
    program.validate()?;
    if !program.nonconvex.is_empty() {
        return Err(Error::Model(
            "program carries nonconvex equalities and cannot be solved directly".into(),
        ));
    }
    let mut eng = Engine {
        program,
        config,
        backend,
        clock,
        root: program.bounds(),
        ints: program.integer_vars(),
        incumbent: None,
        node_count: 0,
        pruned_min: f64::INFINITY,
    };

    let root_sol = eng.solve_one(eng.root.clone())?;
    eng.node_count = 1;
    match root_sol.status {
        ContinuousStatus::Infeasible => return Ok(terminal(MipStatus::Infeasible, eng.node_count)),
        ContinuousStatus::Unbounded => return Ok(terminal(MipStatus::Unbounded, eng.node_count)),
        _ => {}
    }
    if !eng.fractional(&root_sol.x).is_empty() {
        for h in hints {
            let mut b = eng.root.clone();
            for &(v, val) in h {
                let val = val.clamp(b[v].0, b[v].1);
                b[v] = (val, val);
            }
            let s = eng.solve_one(b.clone())?;
            if s.status == ContinuousStatus::Optimal {
                eng.dive(b, s)?;
            }
        }
        if config.dive {
            eng.dive(eng.root.clone(), root_sol.clone())?;
        }
    }

    let mut heap = BinaryHeap::new();
    let mut seq = 0u64;
    let mut limit = None;
    // The root has been solved; seed its children directly.
    let mut pending: Vec<(Vec<(VarId, f64, f64)>, ContinuousSolution)> =
        alloc::vec![(Vec::new(), root_sol)];
    loop {
        for (fixings, sol) in pending.drain(..) {
            match sol.status {
                ContinuousStatus::Infeasible => continue,
                ContinuousStatus::Unbounded => {
                    return Ok(terminal(MipStatus::Unbounded, eng.node_count))
                }
                _ => {}
            }
            if sol.objective >= eng.threshold() {
                eng.pruned_min = eng.pruned_min.min(sol.objective);
                continue;
            }
            let frac = eng.fractional(&sol.x);
            let bounds = eng.bounds_for(&fixings);
            if frac.is_empty() {
                eng.try_incumbent(&bounds, &sol.x)?;
                continue;
            }
            let v = eng.select(&frac);
            let xv = sol.x[v];
            let (lo, hi) = bounds[v];
            let down = math::floor(xv);
            for (nlo, nhi) in [(down + 1.0, hi), (lo, down)] {
                if nlo > nhi {
                    continue;
                }
                let mut f = fixings.clone();
                f.push((v, nlo, nhi));
                heap.push(Node {
                    fixings: f,
                    bound: sol.objective,
                    seq,
                });
                seq += 1;
            }
        }

        if eng.node_count >= config.node_limit {
            limit = Some(LimitKind::Nodes);
            break;
        }
        if eng.out_of_time() {
            limit = Some(LimitKind::Time);
            break;
        }
        let mut batch = Vec::new();
        while batch.len() < config.threads.max(1) {
            let Some(node) = heap.pop() else { break };
            if node.bound >= eng.threshold() {
                eng.pruned_min = eng.pruned_min.min(node.bound);
                continue;
            }
            batch.push(node);
        }
        if batch.is_empty() {
            break;
        }
        let all: Vec<_> = batch.iter().map(|n| eng.bounds_for(&n.fixings)).collect();
        eng.node_count += all.len();
        let sols = eng.evaluate(&all)?;
        for (node, mut sol) in batch.into_iter().zip(sols) {
            // A child's relaxation can never beat its parent's.
            if sol.status == ContinuousStatus::Optimal && sol.objective < node.bound {
                sol.objective = node.bound;
            }
            pending.push((node.fixings, sol));
        }
    }

    let open_min = heap
        .iter()
        .map(|n| n.bound)
        .chain(pending.iter().map(|p| p.1.objective))
        .fold(f64::INFINITY, f64::min);
    let inc = eng.incumbent_obj();
    let bound = inc.min(eng.pruned_min).min(open_min);
    Ok(match eng.incumbent {
        Some((objective, x)) => {
            let gap = relative_gap(objective, bound);
            let status = if limit.is_some() && gap > config.gap {
                MipStatus::Feasible
            } else {
                MipStatus::Optimal
            };
            MipSolution {
                status,
                limit: if status == MipStatus::Feasible { limit } else { None },
                x,
                objective,
                bound,
                gap,
                node_count: eng.node_count,
            }
        }
        None => match limit {
            Some(_) => MipSolution {
                status: MipStatus::Limit,
                limit,
                x: Vec::new(),
                objective: f64::INFINITY,
                bound,
                gap: f64::INFINITY,
                node_count: eng.node_count,
            },
            None => terminal(MipStatus::Infeasible, eng.node_count),
        },
    })
}

fn terminal(status: MipStatus, node_count: usize) -> MipSolution {
    MipSolution {
        status,
        limit: None,
        x: Vec::new(),
        objective: if status == MipStatus::Unbounded {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        },
        bound: if status == MipStatus::Unbounded {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        },
        gap: f64::INFINITY,
        node_count,
    }
}
