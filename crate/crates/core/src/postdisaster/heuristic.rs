use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::model::RestorationModel;
use super::schedule::{list_schedule, Schedule};
use crate::error::Result;
use crate::math;
use crate::solver::{
    solve_continuous, solve_michp_with, BnBConfig, Clock, ContinuousBackend, ContinuousStatus, VarId,
};

/// Search over repair orders used to seed branch-and-bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleSearch {
    /// Enumerate every order when there are at most this many.
    pub max_permutations: usize,
    /// Passes of swap/insert local search otherwise.
    pub max_rounds: usize,
    /// Node limit of the placement search for each fixed schedule.
    pub sub_nodes: usize,
    /// Stop searching once the clock passes this many seconds.
    pub time_budget: Option<f64>,
    /// Number of best schedules handed to the tree search.
    pub n_hints: usize,
}

impl Default for ScheduleSearch {
    fn default() -> Self {
        ScheduleSearch {
            max_permutations: 120,
            max_rounds: 3,
            sub_nodes: 200,
            time_budget: None,
            n_hints: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleCandidate {
    pub objective: f64,
    pub schedule: Schedule,
    pub x: Vec<f64>,
}

impl ScheduleCandidate {
    /// Every integer variable at its rounded value.
    pub fn hint(&self, model: &RestorationModel) -> Vec<(VarId, f64)> {
        model
            .program
            .integer_vars()
            .into_iter()
            .map(|v| (v, math::round(self.x[v])))
            .collect()
    }
}

struct Search<'a, B: ?Sized, C: ?Sized> {
    model: &'a RestorationModel,
    backend: &'a B,
    clock: &'a C,
    opts: ScheduleSearch,
    seen: BTreeMap<Vec<Option<usize>>, Option<f64>>,
    found: Vec<ScheduleCandidate>,
}

impl<B: ContinuousBackend + ?Sized, C: Clock + ?Sized> Search<'_, B, C> {
    fn out_of_time(&self) -> bool {
        self.opts.time_budget.is_some_and(|t| self.clock.elapsed() >= t)
    }

    fn schedule(&self, order: &[usize]) -> Schedule {
        let m = self.model;
        list_schedule(&m.index.tasks, &m.scenario.travel_time, m.n_crews(), order)
    }

    /// Unserved energy of the best placement under the schedule from `order`.
    fn evaluate(&mut self, order: &[usize]) -> Result<Option<f64>> {
        let sched = self.schedule(order);
        let key = sched.energization(&self.model.index.tasks, self.model.horizon.n_periods);
        if let Some(v) = self.seen.get(&key) {
            return Ok(*v);
        }
        let mut prog = self.model.program.clone();
        for (v, val) in sched.assignment(self.model) {
            prog.variables[v].lower = val;
            prog.variables[v].upper = val;
        }
        let cfg = BnBConfig {
            node_limit: self.opts.sub_nodes,
            gap: 1e-4,
            ..BnBConfig::default()
        };
        let sol = solve_michp_with(&prog, &cfg, self.backend, self.clock, &[])?;
        let obj = sol.has_incumbent().then_some(sol.objective);
        if sol.has_incumbent() {
            self.found.push(ScheduleCandidate {
                objective: sol.objective,
                schedule: sched,
                x: sol.x,
            });
        }
        self.seen.insert(key, obj);
        Ok(obj)
    }
}

fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let mut i = p.len() - 1;
    while i > 0 && p[i - 1] >= p[i] {
        i -= 1;
    }
    if i == 0 {
        return false;
    }
    let mut j = p.len() - 1;
    while p[j] <= p[i - 1] {
        j -= 1;
    }
    p.swap(i - 1, j);
    p[i..].reverse();
    true
}

fn factorial_at_most(n: usize, cap: usize) -> bool {
    let mut f = 1usize;
    for k in 2..=n {
        f = f.saturating_mul(k);
        if f > cap {
            return false;
        }
    }
    true
}

/// Repair orders ranked by how early the continuous relaxation energizes each line.
fn relaxation_order<B: ContinuousBackend + ?Sized>(model: &RestorationModel, backend: &B) -> Result<Option<Vec<usize>>> {
    let sol = solve_continuous(&model.program, None, backend)?;
    if sol.status != ContinuousStatus::Optimal {
        return Ok(None);
    }
    let tasks = &model.index.tasks;
    let score: Vec<f64> = model.index.u.iter().map(|row| row.iter().map(|&v| sol.x[v]).sum()).collect();
    let mut order: Vec<usize> = (0..tasks.len()).collect();
    order.sort_by(|&a, &b| {
        score[b]
            .total_cmp(&score[a])
            .then(tasks[a].repair_time.cmp(&tasks[b].repair_time))
            .then(a.cmp(&b))
    });
    Ok(Some(order))
}

/// Best schedules found by list scheduling over repair orders, each with the
/// mobile units placed by a small branch-and-bound. Sorted best first.
pub fn search_schedules<B: ContinuousBackend + ?Sized, C: Clock + ?Sized>(
    model: &RestorationModel,
    opts: &ScheduleSearch,
    backend: &B,
    clock: &C,
) -> Result<Vec<ScheduleCandidate>> {
    let n_d = model.index.tasks.len();
    let mut s = Search {
        model,
        backend,
        clock,
        opts: *opts,
        seen: BTreeMap::new(),
        found: Vec::new(),
    };
    if n_d == 0 {
        s.evaluate(&[])?;
    } else if factorial_at_most(n_d, opts.max_permutations) {
        let mut p: Vec<usize> = (0..n_d).collect();
        loop {
            s.evaluate(&p)?;
            if s.out_of_time() || !next_permutation(&mut p) {
                break;
            }
        }
    } else {
        let tasks = &model.index.tasks;
        let mut seeds: Vec<Vec<usize>> = Vec::new();
        if let Some(o) = relaxation_order(model, backend)? {
            seeds.push(o);
        }
        let mut spt: Vec<usize> = (0..n_d).collect();
        spt.sort_by_key(|&d| (tasks[d].repair_time + tasks[d].depot_travel, d));
        seeds.push(spt);
        seeds.push((0..n_d).collect());
        let mut best: Option<(f64, Vec<usize>)> = None;
        for o in seeds {
            if let Some(v) = s.evaluate(&o)? {
                if best.as_ref().is_none_or(|b| v < b.0) {
                    best = Some((v, o));
                }
            }
        }
        if let Some((mut best_v, mut order)) = best {
            'rounds: for _ in 0..opts.max_rounds {
                let mut improved = false;
                let mut moves: Vec<Vec<usize>> = Vec::new();
                for i in 0..n_d {
                    for j in i + 1..n_d {
                        let mut o = order.clone();
                        o.swap(i, j);
                        moves.push(o);
                    }
                }
                for i in 0..n_d {
                    for j in 0..n_d {
                        if i != j && i + 1 != j {
                            let mut o = order.clone();
                            let d = o.remove(i);
                            o.insert(if j > i { j - 1 } else { j }, d);
                            moves.push(o);
                        }
                    }
                }
                for o in moves {
                    if s.out_of_time() {
                        break 'rounds;
                    }
                    if let Some(v) = s.evaluate(&o)? {
                        if v < best_v - 1e-9 {
                            best_v = v;
                            order = o;
                            improved = true;
                        }
                    }
                }
                if !improved {
                    break;
                }
            }
        }
    }
    let mut found = s.found;
    found.sort_by(|a, b| a.objective.total_cmp(&b.objective));
    Ok(found)
}
