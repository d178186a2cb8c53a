use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::model::{RepairTask, RestorationModel};
use crate::solver::VarId;

/// One stint of crew work on a task, starting at period `start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Visit {
    pub task: usize,
    pub start: usize,
}

/// Non-preemptive crew routes: `routes[m]` lists the visits of crew `m` in order.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct Schedule {
    pub routes: Vec<Vec<Visit>>,
}

impl Schedule {
    /// First period in which each task's line may be energized, if inside the horizon.
    pub fn energization(&self, tasks: &[RepairTask], n_periods: usize) -> Vec<Option<usize>> {
        let mut out = vec![None; tasks.len()];
        for v in self.routes.iter().flatten() {
            let done = v.start + tasks[v.task].repair_time as usize;
            if done < n_periods {
                out[v.task] = Some(done);
            }
        }
        out
    }

    /// Values for every crew, work and line-status variable of `model`.
    pub fn assignment(&self, model: &RestorationModel) -> Vec<(VarId, f64)> {
        let idx = &model.index;
        let n_t = model.horizon.n_periods;
        let mut out = Vec::new();
        let mut work = vec![vec![vec![0.0; n_t]; idx.tasks.len()]; idx.alpha.len()];
        for (m, route) in self.routes.iter().enumerate().take(idx.alpha.len()) {
            for v in route {
                let rt = idx.tasks[v.task].repair_time as usize;
                for t in v.start..(v.start + rt).min(n_t) {
                    work[m][v.task][t] = 1.0;
                }
            }
        }
        for m in 0..idx.alpha.len() {
            for d in 0..idx.tasks.len() {
                for t in 0..n_t {
                    out.push((idx.alpha[m][d][t], work[m][d][t]));
                    out.push((idx.beta[m][d][t], work[m][d][t]));
                }
            }
        }
        let on = self.energization(&idx.tasks, n_t);
        for (d, row) in idx.u.iter().enumerate() {
            for (t, &var) in row.iter().enumerate() {
                let val = match on[d] {
                    Some(s) if t >= s => 1.0,
                    _ => 0.0,
                };
                out.push((var, val));
            }
        }
        out
    }
}

/// Earliest start for `task` on a crew that has already made `visits`.
pub fn earliest_start(tasks: &[RepairTask], travel: &[Vec<u32>], visits: &[Visit], task: usize) -> usize {
    let mut start = tasks[task].depot_travel as usize;
    for v in visits {
        let last = v.start + tasks[v.task].repair_time as usize - 1;
        start = start.max(last + travel[v.task][task] as usize + 1);
    }
    start
}

/// List scheduling: tasks in `order`, each given to the crew that can start it first.
pub fn list_schedule(tasks: &[RepairTask], travel: &[Vec<u32>], n_crews: usize, order: &[usize]) -> Schedule {
    let mut routes: Vec<Vec<Visit>> = vec![Vec::new(); n_crews];
    for &d in order {
        let best = (0..n_crews)
            .map(|m| (earliest_start(tasks, travel, &routes[m], d), m))
            .min();
        if let Some((start, m)) = best {
            routes[m].push(Visit { task: d, start });
        }
    }
    Schedule { routes }
}

/// Shortest-repair-first list schedule used to seed the search.
pub fn greedy_schedule(model: &RestorationModel) -> Schedule {
    let tasks = &model.index.tasks;
    let mut order: Vec<usize> = (0..tasks.len()).collect();
    order.sort_by_key(|&d| (tasks[d].repair_time + tasks[d].depot_travel, d));
    list_schedule(tasks, &model.scenario.travel_time, model.n_crews(), &order)
}
