//! Joint placement, crew routing and dispatch after the event.

mod heuristic;
mod model;
mod plan;
mod schedule;

pub use heuristic::{search_schedules, ScheduleCandidate, ScheduleSearch};
pub use model::{
    build_restoration_model, DerVars, EdgeVars, ModelIndex, NodeVars, Placement, Relaxation, RepairTask,
    RestorationConfig, RestorationModel,
};
pub use plan::{
    extract_energy_series, verify_plan, EdgeFlow, EnergyPeriod, EnergySeries, InvariantCheck, InvariantReport,
    NodeDispatch, PlacementDecision, RestorationPlan, UnitDispatch, PLAN_TOL,
};
pub use schedule::{earliest_start, greedy_schedule, list_schedule, Schedule, Visit};

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::solver::{branch_class, solve_michp_with, BnBConfig, BranchingRule, Clock, ContinuousBackend, MipStatus};

/// Placement counts first, then line status, then crews. Fixing where the
/// mobile units sit moves the bound far more than any schedule decision.
pub const PLACEMENT_FIRST: BranchingRule = BranchingRule::ClassPriority {
    order: [branch_class::MER, branch_class::LINE, branch_class::CREW, branch_class::OTHER],
};

/// Default search settings for restoration: [`PLACEMENT_FIRST`] branching.
pub fn restoration_bnb_config() -> BnBConfig {
    BnBConfig {
        branching: PLACEMENT_FIRST,
        ..BnBConfig::default()
    }
}

/// Solves the restoration model by branch-and-bound, seeded with the best
/// schedules from [`search_schedules`] and a greedy crew schedule.
pub fn solve_restoration<B: ContinuousBackend + ?Sized, C: Clock + ?Sized>(
    model: &RestorationModel,
    config: &BnBConfig,
    backend: &B,
    clock: &C,
) -> Result<RestorationPlan> {
    let search = ScheduleSearch {
        time_budget: config.time_limit.map(|t| 0.3 * t),
        ..ScheduleSearch::default()
    };
    solve_restoration_with(model, config, &search, backend, clock)
}

pub fn solve_restoration_with<B: ContinuousBackend + ?Sized, C: Clock + ?Sized>(
    model: &RestorationModel,
    config: &BnBConfig,
    search: &ScheduleSearch,
    backend: &B,
    clock: &C,
) -> Result<RestorationPlan> {
    let mut hints: Vec<_> = search_schedules(model, search, backend, clock)?
        .iter()
        .take(search.n_hints)
        .map(|c| c.hint(model))
        .collect();
    hints.push(greedy_schedule(model).assignment(model));
    let sol = solve_michp_with(&model.program, config, backend, clock, &hints)?;
    match sol.status {
        MipStatus::Infeasible => {
            return Err(Error::Infeasible("no feasible restoration plan exists".into()))
        }
        MipStatus::Unbounded => return Err(Error::SolverFailure("restoration model is unbounded".into())),
        MipStatus::Limit => {
            return Err(Error::SolverFailure("limit reached before a feasible plan was found".into()))
        }
        MipStatus::Optimal | MipStatus::Feasible => {}
    }
    let mut plan = model.plan_from(&sol.x);
    plan.bound = sol.bound;
    plan.gap = sol.gap;
    plan.status = sol.status;
    plan.node_count = sol.node_count;
    Ok(plan)
}
