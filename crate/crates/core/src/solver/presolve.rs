//! Fixed-variable substitution and singleton-row bound tightening, producing
//! the reduced standard form handed to a continuous backend.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::program::{ConicProgram, Integrality, Sense, VarId};
use crate::math;

const FIX_TOL: f64 = 1e-9;
const FEAS_TOL: f64 = 1e-7;

/// `Σ coef·x_col + constant` over reduced columns.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AffineRow {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

/// `‖components‖ ≤ radius`, all affine in the reduced columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SocBlock {
    pub radius: AffineRow,
    pub components: Vec<AffineRow>,
}

/// minimize `c·x + offset` s.t. `eq_i(x) = 0`, `ineq_i(x) ≤ 0`, cones.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StandardForm {
    pub n: usize,
    pub c: Vec<f64>,
    pub offset: f64,
    pub eq: Vec<AffineRow>,
    pub ineq: Vec<AffineRow>,
    pub socs: Vec<SocBlock>,
}

/// Result of presolving a program under a set of variable bounds.
#[derive(Debug, Clone)]
pub enum Presolved {
    Infeasible,
    Reduced {
        form: StandardForm,
        /// Reduced column of each original variable, `None` when fixed.
        column: Vec<Option<usize>>,
        fixed_value: Vec<f64>,
    },
}

impl Presolved {
    pub fn postsolve(&self, xr: &[f64]) -> Vec<f64> {
        match self {
            Presolved::Infeasible => Vec::new(),
            Presolved::Reduced {
                column,
                fixed_value,
                ..
            } => column
                .iter()
                .zip(fixed_value)
                .map(|(c, &f)| match c {
                    Some(j) => xr[*j],
                    None => f,
                })
                .collect(),
        }
    }
}

fn tighten(lo: &mut f64, hi: &mut f64, new_lo: f64, new_hi: f64, integer: bool) -> bool {
    let mut changed = false;
    let (mut nl, mut nh) = (new_lo, new_hi);
    if integer {
        nl = math::ceil(nl - 1e-6);
        nh = math::floor(nh + 1e-6);
    }
    if nl > *lo + FIX_TOL {
        *lo = nl;
        changed = true;
    }
    if nh < *hi - FIX_TOL {
        *hi = nh;
        changed = true;
    }
    changed
}

fn is_fixed(lo: f64, hi: f64) -> bool {
    hi - lo <= FIX_TOL
}

pub fn presolve(program: &ConicProgram, bounds: &[(f64, f64)]) -> Presolved {
    let n = program.n_vars();
    let mut lo: Vec<f64> = bounds.iter().map(|b| b.0).collect();
    let mut hi: Vec<f64> = bounds.iter().map(|b| b.1).collect();
    let integer: Vec<bool> = program
        .variables
        .iter()
        .map(|v| v.integrality != Integrality::Continuous)
        .collect();
    for j in 0..n {
        if integer[j] {
            lo[j] = math::ceil(lo[j] - 1e-6);
            hi[j] = math::floor(hi[j] + 1e-6);
        }
        if lo[j] > hi[j] + FEAS_TOL {
            return Presolved::Infeasible;
        }
    }

    // Singleton rows: after substituting fixed variables, a row with one free
    // variable is a bound on it.
    let mut singleton = vec![false; program.linear.len()];
    for _pass in 0..50 {
        let mut changed = false;
        for (r, row) in program.linear.iter().enumerate() {
            let mut free: Option<(VarId, f64)> = None;
            let mut n_free = 0;
            let mut fixed_sum = 0.0;
            for &(v, c) in &row.terms {
                if c == 0.0 {
                    continue;
                }
                if is_fixed(lo[v], hi[v]) {
                    fixed_sum += c * lo[v];
                } else {
                    n_free += 1;
                    match &mut free {
                        Some((fv, fc)) if *fv == v => *fc += c,
                        Some(_) => {}
                        None => free = Some((v, c)),
                    }
                }
            }
            let rhs = row.rhs - fixed_sum;
            if n_free == 0 {
                let bad = match row.sense {
                    Sense::Le => -rhs > FEAS_TOL,
                    Sense::Ge => rhs > FEAS_TOL,
                    Sense::Eq => math::abs(rhs) > FEAS_TOL,
                };
                if bad {
                    return Presolved::Infeasible;
                }
                singleton[r] = true;
                continue;
            }
            let distinct = row
                .terms
                .iter()
                .filter(|(v, c)| *c != 0.0 && !is_fixed(lo[*v], hi[*v]))
                .all(|(v, _)| Some(*v) == free.map(|f| f.0));
            if !distinct {
                continue;
            }
            let (v, c) = free.unwrap();
            if math::abs(c) < 1e-12 {
                continue;
            }
            singleton[r] = true;
            let b = rhs / c;
            let (mut nl, mut nh) = (f64::NEG_INFINITY, f64::INFINITY);
            match (row.sense, c > 0.0) {
                (Sense::Eq, _) => {
                    nl = b;
                    nh = b;
                }
                (Sense::Le, true) | (Sense::Ge, false) => nh = b,
                (Sense::Le, false) | (Sense::Ge, true) => nl = b,
            }
            if tighten(&mut lo[v], &mut hi[v], nl, nh, integer[v]) {
                changed = true;
            }
            if lo[v] > hi[v] + FEAS_TOL {
                return Presolved::Infeasible;
            }
            if lo[v] > hi[v] {
                let m = 0.5 * (lo[v] + hi[v]);
                lo[v] = m;
                hi[v] = m;
            }
        }
        if !changed {
            break;
        }
    }

    let mut column = vec![None; n];
    let mut fixed_value = vec![0.0; n];
    let mut ncols = 0;
    for j in 0..n {
        if is_fixed(lo[j], hi[j]) {
            fixed_value[j] = if integer[j] {
                math::round(lo[j])
            } else {
                0.5 * (lo[j] + hi[j])
            };
        } else {
            column[j] = Some(ncols);
            ncols += 1;
        }
    }

    let reduce = |terms: &[(VarId, f64)], constant: f64| -> AffineRow {
        let mut row = AffineRow {
            terms: Vec::new(),
            constant,
        };
        for &(v, c) in terms {
            match column[v] {
                Some(j) => row.terms.push((j, c)),
                None => row.constant += c * fixed_value[v],
            }
        }
        row.terms.sort_by_key(|t| t.0);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(row.terms.len());
        for (j, c) in row.terms.drain(..) {
            match merged.last_mut() {
                Some((lj, lc)) if *lj == j => *lc += c,
                _ => merged.push((j, c)),
            }
        }
        merged.retain(|t| t.1 != 0.0);
        row.terms = merged;
        row
    };

    let mut form = StandardForm {
        n: ncols,
        c: vec![0.0; ncols],
        offset: program.objective_offset,
        ..Default::default()
    };
    for &(v, c) in &program.objective {
        match column[v] {
            Some(j) => form.c[j] += c,
            None => form.offset += c * fixed_value[v],
        }
    }

    for (r, row) in program.linear.iter().enumerate() {
        if singleton[r] {
            continue;
        }
        let a = reduce(&row.terms, -row.rhs);
        if a.terms.is_empty() {
            let bad = match row.sense {
                Sense::Le => a.constant > FEAS_TOL,
                Sense::Ge => -a.constant > FEAS_TOL,
                Sense::Eq => math::abs(a.constant) > FEAS_TOL,
            };
            if bad {
                return Presolved::Infeasible;
            }
            continue;
        }
        match row.sense {
            Sense::Le => form.ineq.push(a),
            Sense::Eq => form.eq.push(a),
            Sense::Ge => form.ineq.push(negate(a)),
        }
    }

    for j in 0..n {
        if let Some(col) = column[j] {
            if lo[j].is_finite() {
                form.ineq.push(AffineRow {
                    terms: vec![(col, -1.0)],
                    constant: lo[j],
                });
            }
            if hi[j].is_finite() {
                form.ineq.push(AffineRow {
                    terms: vec![(col, 1.0)],
                    constant: -hi[j],
                });
            }
        }
    }

    for cone in &program.soc {
        let radius = reduce(&cone.radius.terms, cone.radius.constant);
        let mut components = Vec::new();
        let mut const_sq = 0.0;
        for row in &cone.rows {
            let a = reduce(&row.terms, row.constant);
            if a.terms.is_empty() {
                const_sq += a.constant * a.constant;
                if a.constant != 0.0 {
                    components.push(a);
                }
            } else {
                components.push(a);
            }
        }
        let all_const = components.iter().all(|c| c.terms.is_empty());
        if all_const {
            // ‖const‖ ≤ radius(x) is linear.
            let norm = math::sqrt(const_sq);
            let mut row = negate(radius);
            row.constant += norm;
            if row.terms.is_empty() {
                if row.constant > FEAS_TOL {
                    return Presolved::Infeasible;
                }
            } else {
                form.ineq.push(row);
            }
            continue;
        }
        if components.len() == 1 {
            let u = components.pop().unwrap();
            // |u| ≤ t  ⇔  u − t ≤ 0 and −u − t ≤ 0
            form.ineq.push(add_rows(&u, &negate(radius.clone())));
            form.ineq.push(add_rows(&negate(u), &negate(radius)));
            continue;
        }
        form.socs.push(SocBlock { radius, components });
    }

    Presolved::Reduced {
        form,
        column,
        fixed_value,
    }
}

fn negate(mut a: AffineRow) -> AffineRow {
    for t in &mut a.terms {
        t.1 = -t.1;
    }
    a.constant = -a.constant;
    a
}

fn add_rows(a: &AffineRow, b: &AffineRow) -> AffineRow {
    let mut terms: Vec<(usize, f64)> = a.terms.iter().chain(&b.terms).copied().collect();
    terms.sort_by_key(|t| t.0);
    let mut merged: Vec<(usize, f64)> = Vec::with_capacity(terms.len());
    for (j, c) in terms {
        match merged.last_mut() {
            Some((lj, lc)) if *lj == j => *lc += c,
            _ => merged.push((j, c)),
        }
    }
    merged.retain(|t| t.1 != 0.0);
    AffineRow {
        terms: merged,
        constant: a.constant + b.constant,
    }
}
