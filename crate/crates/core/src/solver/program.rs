use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;

pub type VarId = usize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Integrality {
    Continuous,
    Binary,
    Integer,
}

/// Branching priority groups; lower classes branch first on ties.
pub mod branch_class {
    pub const CREW: u8 = 0;
    pub const LINE: u8 = 1;
    pub const MER: u8 = 2;
    pub const OTHER: u8 = 3;
}

mod lower_bound {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        let o = if v.is_finite() { Some(*v) } else { None };
        o.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NEG_INFINITY))
    }
}

mod upper_bound {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        let o = if v.is_finite() { Some(*v) } else { None };
        o.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    #[serde(with = "lower_bound")]
    pub lower: f64,
    #[serde(with = "upper_bound")]
    pub upper: f64,
    pub integrality: Integrality,
    #[serde(default = "default_class")]
    pub branch_class: u8,
}

fn default_class() -> u8 {
    branch_class::OTHER
}

impl Variable {
    pub fn is_integer(&self) -> bool {
        self.integrality != Integrality::Continuous
    }
}

/// `Σ coef·x + constant`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LinExpr {
    pub terms: Vec<(VarId, f64)>,
    #[serde(default)]
    pub constant: f64,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn var(v: VarId) -> Self {
        Self::term(v, 1.0)
    }

    pub fn term(v: VarId, c: f64) -> Self {
        LinExpr {
            terms: alloc::vec![(v, c)],
            constant: 0.0,
        }
    }

    pub fn constant(c: f64) -> Self {
        LinExpr {
            terms: Vec::new(),
            constant: c,
        }
    }

    pub fn add(mut self, v: VarId, c: f64) -> Self {
        self.terms.push((v, c));
        self
    }

    pub fn push(&mut self, v: VarId, c: f64) {
        self.terms.push((v, c));
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(v, c)| c * x[v]).sum::<f64>()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub terms: Vec<(VarId, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl LinearConstraint {
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs: f64 = self.terms.iter().map(|&(v, c)| c * x[v]).sum();
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => math::abs(lhs - self.rhs),
        }
    }
}

/// `‖(rows_1(x), …, rows_m(x))‖₂ ≤ radius(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocConstraint {
    pub rows: Vec<LinExpr>,
    pub radius: LinExpr,
}

impl SocConstraint {
    pub fn violation(&self, x: &[f64]) -> f64 {
        let vals: Vec<f64> = self.rows.iter().map(|r| r.eval(x)).collect();
        (math::norm(&vals) - self.radius.eval(x)).max(0.0)
    }
}

/// `Σ coef·x_k² = x_a·x_b`; recorded for evaluation, never passed to a backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuadraticEquality {
    pub squares: Vec<(VarId, f64)>,
    pub product: (VarId, VarId),
}

impl QuadraticEquality {
    pub fn residual(&self, x: &[f64]) -> f64 {
        let lhs: f64 = self.squares.iter().map(|&(v, c)| c * x[v] * x[v]).sum();
        math::abs(lhs - x[self.product.0] * x[self.product.1])
    }
}

/// A minimization over linear, second-order-cone and integrality constraints.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ConicProgram {
    pub variables: Vec<Variable>,
    pub objective: Vec<(VarId, f64)>,
    #[serde(default)]
    pub objective_offset: f64,
    pub linear: Vec<LinearConstraint>,
    pub soc: Vec<SocConstraint>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nonconvex: Vec<QuadraticEquality>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub bounds: f64,
    pub linear: f64,
    pub soc: f64,
    pub integrality: f64,
}

impl Violation {
    pub fn max(&self) -> f64 {
        self.bounds.max(self.linear).max(self.soc).max(self.integrality)
    }
}

impl ConicProgram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_var(
        &mut self,
        name: impl Into<String>,
        lower: f64,
        upper: f64,
        integrality: Integrality,
    ) -> VarId {
        self.variables.push(Variable {
            name: name.into(),
            lower,
            upper,
            integrality,
            branch_class: branch_class::OTHER,
        });
        self.variables.len() - 1
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> VarId {
        self.add_var(name, lower, upper, Integrality::Continuous)
    }

    pub fn add_binary(&mut self, name: impl Into<String>, class: u8) -> VarId {
        let v = self.add_var(name, 0.0, 1.0, Integrality::Binary);
        self.variables[v].branch_class = class;
        v
    }

    pub fn add_integer(&mut self, name: impl Into<String>, lower: f64, upper: f64, class: u8) -> VarId {
        let v = self.add_var(name, lower, upper, Integrality::Integer);
        self.variables[v].branch_class = class;
        v
    }

    pub fn add_objective(&mut self, v: VarId, c: f64) {
        self.objective.push((v, c));
    }

    pub fn add_linear(&mut self, terms: Vec<(VarId, f64)>, sense: Sense, rhs: f64) {
        self.linear.push(LinearConstraint { terms, sense, rhs });
    }

    pub fn add_soc(&mut self, rows: Vec<LinExpr>, radius: LinExpr) {
        self.soc.push(SocConstraint { rows, radius });
    }

    pub fn n_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn integer_vars(&self) -> Vec<VarId> {
        (0..self.variables.len())
            .filter(|&v| self.variables[v].is_integer())
            .collect()
    }

    pub fn count_integrality(&self, kind: Integrality) -> usize {
        self.variables.iter().filter(|v| v.integrality == kind).count()
    }

    pub fn bounds(&self) -> Vec<(f64, f64)> {
        self.variables.iter().map(|v| (v.lower, v.upper)).collect()
    }

    /// Copy with the given bounds written into the variables.
    pub fn with_bounds(&self, bounds: &[(f64, f64)]) -> ConicProgram {
        let mut p = self.clone();
        for (v, &(lo, hi)) in p.variables.iter_mut().zip(bounds) {
            v.lower = lo;
            v.upper = hi;
        }
        p
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_offset + self.objective.iter().map(|&(v, c)| c * x[v]).sum::<f64>()
    }

    /// Largest violation of each constraint family at `x`.
    pub fn violation(&self, x: &[f64]) -> Violation {
        let mut out = Violation::default();
        for (var, &xv) in self.variables.iter().zip(x) {
            out.bounds = out
                .bounds
                .max(var.lower - xv)
                .max(xv - var.upper);
            if var.is_integer() {
                out.integrality = out.integrality.max(math::abs(xv - math::round(xv)));
            }
        }
        for c in &self.linear {
            out.linear = out.linear.max(c.violation(x));
        }
        for c in &self.soc {
            out.soc = out.soc.max(c.violation(x));
        }
        out
    }

    /// Structural checks: ids in range, ordered bounds, binary bounds inside [0, 1].
    pub fn validate(&self) -> Result<()> {
        let n = self.variables.len();
        let mut names = BTreeSet::new();
        for (i, v) in self.variables.iter().enumerate() {
            if !(v.lower <= v.upper) {
                return Err(Error::Model(format!(
                    "variable {} ({}) has lower {} > upper {}",
                    i, v.name, v.lower, v.upper
                )));
            }
            if v.integrality == Integrality::Binary && (v.lower < 0.0 || v.upper > 1.0) {
                return Err(Error::Model(format!("binary variable {} has bounds outside [0, 1]", v.name)));
            }
            if !names.insert(v.name.as_str()) {
                return Err(Error::Model(format!("duplicate variable name {}", v.name)));
            }
        }
        let check = |v: VarId| -> Result<()> {
            if v >= n {
                Err(Error::Model(format!("reference to unknown variable {v}")))
            } else {
                Ok(())
            }
        };
        for &(v, _) in &self.objective {
            check(v)?;
        }
        for c in &self.linear {
            for &(v, _) in &c.terms {
                check(v)?;
            }
        }
        for c in &self.soc {
            for r in c.rows.iter().chain(core::iter::once(&c.radius)) {
                for &(v, _) in &r.terms {
                    check(v)?;
                }
            }
        }
        for q in &self.nonconvex {
            for &(v, _) in &q.squares {
                check(v)?;
            }
            check(q.product.0)?;
            check(q.product.1)?;
        }
        Ok(())
    }
}
