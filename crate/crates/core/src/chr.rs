//! Convex-hull relaxations of the branch-flow and storage-loss equalities,
//! and a sampling check that a relaxation contains its manifold.
//!
//! Bus limits are voltage magnitudes; the model variable `v` is the squared
//! magnitude, so every bound below is squared before use.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::math;
use crate::netmodel::{Bus, Line, StorageLossParams};
use crate::solver::{ConicProgram, LinExpr, Sense, VarId};

const SQRT2: f64 = core::f64::consts::SQRT_2;

/// `‖diag(scale)·y‖₂ − b·y ≤ offset`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HullCone {
    pub scale: [f64; 4],
    pub b: [f64; 4],
    pub offset: f64,
}

/// `c·y ≤ d`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HullCut {
    pub c: [f64; 4],
    pub d: f64,
}

impl HullCone {
    pub fn value(&self, y: &[f64; 4]) -> f64 {
        let s: [f64; 4] = core::array::from_fn(|k| self.scale[k] * y[k]);
        math::norm(&s) - dot(&self.b, y) - self.offset
    }
}

impl HullCut {
    pub fn value(&self, y: &[f64; 4]) -> f64 {
        dot(&self.c, y) - self.d
    }
}

fn dot(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Constraints over a 4-tuple `y` of model variables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullConstraintSet {
    pub soc_constraints: Vec<HullCone>,
    pub linear_cuts: Vec<HullCut>,
}

impl HullConstraintSet {
    /// Largest positive constraint value at `y`, with the index of the offender
    /// (cones first, then cuts).
    pub fn worst(&self, y: &[f64; 4]) -> (f64, usize) {
        let mut worst = (f64::NEG_INFINITY, 0);
        let vals = self
            .soc_constraints
            .iter()
            .map(|c| c.value(y))
            .chain(self.linear_cuts.iter().map(|c| c.value(y)));
        for (k, v) in vals.enumerate() {
            if v > worst.0 {
                worst = (v, k);
            }
        }
        worst
    }

    pub fn max_violation(&self, y: &[f64; 4]) -> f64 {
        self.worst(y).0.max(0.0)
    }

    /// Emits the set into `program` over variables `y`.
    pub fn apply(&self, program: &mut ConicProgram, y: [VarId; 4]) {
        for cone in &self.soc_constraints {
            let rotated = cone.offset == 0.0
                && cone.b == [0.0, 0.0, 1.0, 1.0]
                && cone.scale[2] == 1.0
                && cone.scale[3] == 1.0;
            // ‖(a, b, y₂, y₃)‖ ≤ y₂ + y₃  ⇔  a² + b² ≤ 2·y₂·y₃  ⇔  ‖(√2·a, √2·b, y₂ − y₃)‖ ≤ y₂ + y₃
            let lift = if rotated { SQRT2 } else { 1.0 };
            let mut rows = Vec::new();
            for k in 0..2 {
                if cone.scale[k] != 0.0 {
                    rows.push(LinExpr::term(y[k], lift * cone.scale[k]));
                }
            }
            if rotated {
                rows.push(LinExpr::var(y[2]).add(y[3], -1.0));
            } else {
                for k in 2..4 {
                    if cone.scale[k] != 0.0 {
                        rows.push(LinExpr::term(y[k], cone.scale[k]));
                    }
                }
            }
            let mut radius = LinExpr::constant(cone.offset);
            for k in 0..4 {
                if cone.b[k] != 0.0 {
                    radius.push(y[k], cone.b[k]);
                }
            }
            program.add_soc(rows, radius);
        }
        for cut in &self.linear_cuts {
            let terms = (0..4)
                .filter(|&k| cut.c[k] != 0.0)
                .map(|k| (y[k], cut.c[k]))
                .collect();
            program.add_linear(terms, Sense::Le, cut.d);
        }
    }
}

/// Hull of `p² + q² = ℓ·v` over `y = (p, q, ℓ, v)` with `v` the squared
/// voltage at the sending bus.
pub fn hull_line_flow(line: &Line, bus: &Bus) -> HullConstraintSet {
    hull_line_flow_params(bus.vmin, bus.vmax, line.smax)
}

/// As [`hull_line_flow`] from magnitude bounds and the apparent-power limit.
pub fn hull_line_flow_params(vmin: f64, vmax: f64, smax: f64) -> HullConstraintSet {
    let (vl, vu) = (vmin * vmin, vmax * vmax);
    let s2 = smax * smax;
    HullConstraintSet {
        soc_constraints: alloc::vec![HullCone {
            scale: [SQRT2, SQRT2, 1.0, 1.0],
            b: [0.0, 0.0, 1.0, 1.0],
            offset: 0.0,
        }],
        linear_cuts: alloc::vec![HullCut {
            c: [0.0, 0.0, vl * vu, s2],
            d: (vu + vl) * s2,
        }],
    }
}

/// Which form the first storage-loss cone takes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StorageConeVariant {
    /// `p² + q² ≤ p_loss·v`; cuts off the loss manifold whenever a resistance is below 1.
    ResistanceFree,
    /// `r_e·p² + r_ct·q² ≤ p_loss·v`.
    #[default]
    ResistanceScaled,
}

/// Hull of `r_e·p² + r_ct·q² = p_loss·v` over `y = (p, q, p_loss, v)`.
pub fn hull_storage_loss(
    params: &StorageLossParams,
    bus: &Bus,
    variant: StorageConeVariant,
) -> HullConstraintSet {
    hull_storage_loss_params(params, bus.vmin, bus.vmax, variant)
}

pub fn hull_storage_loss_params(
    params: &StorageLossParams,
    vmin: f64,
    vmax: f64,
    variant: StorageConeVariant,
) -> HullConstraintSet {
    let (vl, vu) = (vmin * vmin, vmax * vmax);
    let s2 = params.s_cap * params.s_cap;
    let r_e = params.r_e;
    let e = r_e * s2;
    let first = match variant {
        StorageConeVariant::ResistanceFree => [SQRT2, SQRT2, 1.0, 1.0],
        StorageConeVariant::ResistanceScaled => [
            math::sqrt(2.0 * params.r_e),
            math::sqrt(2.0 * params.r_ct),
            1.0,
            1.0,
        ],
    };
    HullConstraintSet {
        soc_constraints: alloc::vec![
            HullCone {
                scale: first,
                b: [0.0, 0.0, 1.0, 1.0],
                offset: 0.0,
            },
            HullCone {
                scale: [0.0, math::sqrt(2.0 * params.r_bt().max(0.0)), 1.0, 1.0],
                b: [0.0, 0.0, 1.0, 1.0],
                offset: e,
            },
        ],
        linear_cuts: alloc::vec![HullCut {
            c: [0.0, 0.0, vl * vu, e],
            d: r_e * (vu + vl) * s2,
        }],
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Manifold {
    /// `p² + q² = ℓ·v`
    BranchFlow,
    /// `r_e·p² + r_ct·q² = p_loss·v`
    StorageLoss,
}

/// Variable box the samples are drawn from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ManifoldParams {
    pub vmin: f64,
    pub vmax: f64,
    /// Apparent-power limit (line `smax` or storage `s_cap`), p.u.
    pub smax: f64,
    /// Squared-current limit; `None` means unbounded.
    pub i2max: Option<f64>,
    pub r_e: f64,
    pub r_ct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViolatingPoint {
    pub y: [f64; 4],
    pub violation: f64,
    /// Index into cones followed by cuts.
    pub constraint: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoundnessReport {
    pub manifold: Manifold,
    pub n_samples: usize,
    pub seed: u64,
    pub tolerance: f64,
    pub max_violation: f64,
    pub n_violations: usize,
    /// First violating points, at most [`MAX_REPORTED_POINTS`].
    pub violating_points: Vec<ViolatingPoint>,
}

impl SoundnessReport {
    pub fn passed(&self) -> bool {
        self.n_violations == 0
    }
}

pub const MAX_REPORTED_POINTS: usize = 32;
pub const SOUNDNESS_TOL: f64 = 1e-9;

/// Draws `n_samples` points on the manifold within the parameter box and
/// evaluates every constraint of `hull` there.
pub fn soundness_check(
    hull: &HullConstraintSet,
    manifold: Manifold,
    params: &ManifoldParams,
    n_samples: usize,
    seed: u64,
) -> SoundnessReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = SoundnessReport {
        manifold,
        n_samples: 0,
        seed,
        tolerance: SOUNDNESS_TOL,
        max_violation: 0.0,
        n_violations: 0,
        violating_points: Vec::new(),
    };
    let mut attempts = 0usize;
    while report.n_samples < n_samples && attempts < 1000 * n_samples.max(1) {
        attempts += 1;
        let Some(y) = sample_point(&mut rng, manifold, params) else {
            continue;
        };
        report.n_samples += 1;
        let (worst, k) = hull.worst(&y);
        if worst > report.max_violation {
            report.max_violation = worst;
        }
        if worst > SOUNDNESS_TOL {
            report.n_violations += 1;
            if report.violating_points.len() < MAX_REPORTED_POINTS {
                report.violating_points.push(ViolatingPoint {
                    y,
                    violation: worst,
                    constraint: k,
                });
            }
        }
    }
    report
}

fn sample_point(rng: &mut ChaCha8Rng, manifold: Manifold, m: &ManifoldParams) -> Option<[f64; 4]> {
    let (vl, vu) = (m.vmin * m.vmin, m.vmax * m.vmax);
    // One draw in eight lands on the boundary of the box, where relaxations
    // are most likely to fail.
    let edge = rng.random_range(0..8) == 0;
    let v = if edge {
        if rng.random_bool(0.5) {
            vl
        } else {
            vu
        }
    } else {
        vl + (vu - vl) * rng.random::<f64>()
    };
    let (p, q) = if edge {
        let th = 2.0 * core::f64::consts::PI * rng.random::<f64>();
        (m.smax * libm::cos(th), m.smax * libm::sin(th))
    } else {
        loop {
            let p = m.smax * (2.0 * rng.random::<f64>() - 1.0);
            let q = m.smax * (2.0 * rng.random::<f64>() - 1.0);
            if math::hypot(p, q) <= m.smax {
                break (p, q);
            }
        }
    };
    let dep = match manifold {
        Manifold::BranchFlow => (p * p + q * q) / v,
        Manifold::StorageLoss => (m.r_e * p * p + m.r_ct * q * q) / v,
    };
    if let Some(l) = m.i2max {
        if manifold == Manifold::BranchFlow && dep > l {
            return None;
        }
    }
    Some([p, q, dep, v])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flow() -> HullConstraintSet {
        hull_line_flow_params(0.95, 1.05, 1.0)
    }

    #[test]
    fn origin_is_inside() {
        let h = flow();
        let y = [0.0, 0.0, 0.0, 1.0];
        assert!(h.soc_constraints[0].value(&y) <= 0.0);
        assert!(h.linear_cuts[0].value(&y) < 0.0);
    }

    #[test]
    fn cone_is_tight_on_manifold() {
        let h = flow();
        let y = [0.5, 0.5, 0.5, 1.0];
        assert!(h.soc_constraints[0].value(&y).abs() < 1e-12);
        assert!(h.linear_cuts[0].value(&y) <= 0.0);
    }

    #[test]
    fn degenerate_voltage_band_bounds_current() {
        let h = hull_line_flow_params(1.0, 1.0, 0.8);
        let cut = h.linear_cuts[0];
        // v̄²ℓ + S̄²v ≤ 2v̄S̄² at v = v̄ gives ℓ ≤ S̄²/v̄².
        let lmax = 0.64;
        assert!(cut.value(&[0.0, 0.0, lmax, 1.0]).abs() < 1e-12);
        assert!(cut.value(&[0.0, 0.0, lmax + 1e-3, 1.0]) > 0.0);
    }

    #[test]
    fn resistance_free_cone_rejects_loss_manifold() {
        let params = StorageLossParams { r_e: 0.05, r_ct: 0.02, s_cap: 1.0 };
        let mp = ManifoldParams {
            vmin: 0.95,
            vmax: 1.05,
            smax: 1.0,
            i2max: None,
            r_e: 0.05,
            r_ct: 0.02,
        };
        let bad = hull_storage_loss_params(&params, 0.95, 1.05, StorageConeVariant::ResistanceFree);
        let r = soundness_check(&bad, Manifold::StorageLoss, &mp, 500, 1);
        assert!(r.n_violations > 0);
        let good = hull_storage_loss_params(&params, 0.95, 1.05, StorageConeVariant::ResistanceScaled);
        let r = soundness_check(&good, Manifold::StorageLoss, &mp, 500, 1);
        assert!(r.passed(), "{r:?}");
    }
}
