use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::presolve::{presolve, Presolved, StandardForm};
use super::program::ConicProgram;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContinuousStatus {
    Optimal,
    Infeasible,
    Unbounded,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendResult {
    pub status: ContinuousStatus,
    /// Reduced-space point; empty unless optimal.
    pub x: Vec<f64>,
    pub objective: f64,
    pub diagnostics: String,
}

/// A continuous second-order-cone solver.
pub trait ContinuousBackend {
    fn solve(&self, form: &StandardForm) -> BackendResult;

    /// Solves independent problems; implementations may run them concurrently
    /// but must return results in input order.
    fn solve_batch(&self, forms: &[&StandardForm]) -> Vec<BackendResult> {
        forms.iter().map(|f| self.solve(f)).collect()
    }
}

impl<B: ContinuousBackend + ?Sized> ContinuousBackend for &B {
    fn solve(&self, form: &StandardForm) -> BackendResult {
        (**self).solve(form)
    }

    fn solve_batch(&self, forms: &[&StandardForm]) -> Vec<BackendResult> {
        (**self).solve_batch(forms)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuousSolution {
    pub status: ContinuousStatus,
    pub x: Vec<f64>,
    pub objective: f64,
}

pub(crate) fn finish(
    program: &ConicProgram,
    bounds: &[(f64, f64)],
    pre: &Presolved,
    res: BackendResult,
) -> Result<ContinuousSolution> {
    match res.status {
        ContinuousStatus::Optimal => {
            let x = pre.postsolve(&res.x);
            let objective = program.objective_value(&x);
            Ok(ContinuousSolution {
                status: ContinuousStatus::Optimal,
                x,
                objective,
            })
        }
        ContinuousStatus::Infeasible | ContinuousStatus::Unbounded => Ok(ContinuousSolution {
            status: res.status,
            x: Vec::new(),
            objective: if res.status == ContinuousStatus::Infeasible {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            },
        }),
        ContinuousStatus::Failed => Err(Error::NumericalFailure {
            message: format!("continuous backend failed: {}", res.diagnostics),
            node: Some(Box::new(program.with_bounds(bounds))),
        }),
    }
}

pub(crate) fn infeasible() -> ContinuousSolution {
    ContinuousSolution {
        status: ContinuousStatus::Infeasible,
        x: Vec::new(),
        objective: f64::INFINITY,
    }
}

/// Solves the continuous relaxation of `program` (integrality ignored) under `bounds`.
pub fn solve_continuous<B: ContinuousBackend + ?Sized>(
    program: &ConicProgram,
    bounds: Option<&[(f64, f64)]>,
    backend: &B,
) -> Result<ContinuousSolution> {
    if !program.nonconvex.is_empty() {
        return Err(Error::Model(
            "program carries nonconvex equalities and cannot be solved directly".into(),
        ));
    }
    let owned;
    let bounds = match bounds {
        Some(b) => b,
        None => {
            owned = program.bounds();
            &owned
        }
    };
    let pre = presolve(program, bounds);
    let form = match &pre {
        Presolved::Infeasible => return Ok(infeasible()),
        Presolved::Reduced { form, .. } => form,
    };
    if form.n == 0 {
        let x = pre.postsolve(&[]);
        return Ok(ContinuousSolution {
            status: ContinuousStatus::Optimal,
            objective: program.objective_value(&x),
            x,
        });
    }
    let res = backend.solve(form);
    finish(program, bounds, &pre, res)
}
