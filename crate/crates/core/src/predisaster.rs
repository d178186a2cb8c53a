//! Minimum-cost mobile resource fleet for a forecast shortage.
//!
//! The model is area-wide with no network: per period, served load equals
//! the summed output of mobile units and surviving DERs. Storage energy is
//! tracked as running sums over the periods.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math;
use crate::netmodel::{
    validate_catalog, DerKind, MerKind, MerSpec, PvProfile, QPolicy, ShortageForecast,
    StudyHorizon,
};
use crate::solver::{
    branch_class, solve_michp_with, BnBConfig, Clock, ConicProgram, ContinuousBackend, LinExpr,
    MipStatus, Sense, VarId,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizingConfig {
    pub pv_profile: PvProfile,
    /// Let PV and mobile PV be curtailed; when false their output is fixed at availability.
    pub pv_curtailable: bool,
    /// Allow storage to absorb surplus (negative output within its MVA rating).
    pub storage_charging: bool,
    /// Upper bound on each unit count; `None` uses the peak-shortage rule.
    pub max_units: Option<u32>,
}

impl Default for SizingConfig {
    fn default() -> Self {
        SizingConfig {
            pv_profile: PvProfile::default(),
            pv_curtailable: false,
            storage_charging: true,
            max_units: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixEntry {
    pub spec: MerSpec,
    pub count: u32,
}

/// Chosen fleet: unit counts per catalog option.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MerMixDecision {
    pub entries: Vec<MixEntry>,
    pub total_cost: f64,
}

impl MerMixDecision {
    pub fn new(entries: Vec<MixEntry>) -> Self {
        let total_cost = entries.iter().map(|e| e.count as f64 * e.spec.cost).sum();
        MerMixDecision {
            entries,
            total_cost,
        }
    }

    pub fn empty() -> Self {
        Self::new(Vec::new())
    }

    pub fn count(&self, kind: MerKind, size_index: usize) -> u32 {
        self.entries
            .iter()
            .filter(|e| e.spec.kind == kind && e.spec.size_index == size_index)
            .map(|e| e.count)
            .sum()
    }

    /// Entries with a nonzero count.
    pub fn units(&self) -> impl Iterator<Item = &MixEntry> {
        self.entries.iter().filter(|e| e.count > 0)
    }

    pub fn n_units(&self) -> u32 {
        self.entries.iter().map(|e| e.count).sum()
    }

    pub fn check(&self) -> Result<()> {
        let cost: f64 = self.entries.iter().map(|e| e.count as f64 * e.spec.cost).sum();
        if math::abs(cost - self.total_cost) > 1e-9 * cost.max(1.0) {
            return Err(Error::validation("mix", "total_cost differs from the sum of unit costs"));
        }
        for e in &self.entries {
            e.spec.validate()?;
        }
        Ok(())
    }
}

/// Per-class outputs of one period, MW or MVAr.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClassOutputs {
    pub mdg: f64,
    pub mess: f64,
    pub mpv: f64,
    pub dg: f64,
    pub ess: f64,
    pub pv: f64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SizingPeriod {
    pub p_load: f64,
    pub q_load: f64,
    pub p: ClassOutputs,
    pub q: ClassOutputs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizingParameters {
    pub critical_fraction: Option<f64>,
    pub pv_profile: PvProfile,
    pub pv_availability: Vec<f64>,
    pub pv_curtailable: bool,
    pub storage_charging: bool,
    pub q_policy: BTreeMap<MerKind, QPolicy>,
    pub unit_upper_bounds: Vec<u32>,
}

#[derive(Debug, Clone, Default)]
struct PeriodVars {
    pl: Option<VarId>,
    ql: Option<VarId>,
    mdg: Option<(VarId, VarId)>,
    mess: Option<(VarId, VarId)>,
    mpv: Option<(VarId, VarId)>,
    /// Per DER: (kind, p, q).
    ders: Vec<(DerKind, VarId, VarId)>,
}

/// Sizing program plus the bookkeeping to read a solution back.
#[derive(Debug, Clone)]
pub struct SizingModel {
    pub program: ConicProgram,
    pub catalog: Vec<MerSpec>,
    /// Count variable of each catalog entry.
    pub count_vars: Vec<VarId>,
    pub parameters: SizingParameters,
    periods: Vec<PeriodVars>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SizingSolution {
    pub mix: MerMixDecision,
    pub dispatch: Vec<SizingPeriod>,
    pub parameters: SizingParameters,
    pub status: MipStatus,
    pub bound: f64,
    pub gap: f64,
    pub node_count: usize,
    /// Largest constraint violation of the returned point.
    pub max_violation: f64,
}

fn kind_policy(catalog: &[MerSpec], kind: MerKind) -> Result<Option<QPolicy>> {
    let mut it = catalog.iter().filter(|m| m.kind == kind);
    let Some(first) = it.next() else {
        return Ok(None);
    };
    if it.any(|m| m.q_policy != first.q_policy) {
        return Err(Error::Model(format!(
            "catalog entries of kind {kind:?} carry different reactive policies"
        )));
    }
    Ok(Some(first.q_policy))
}

fn add_q_policy(prog: &mut ConicProgram, p: VarId, q: VarId, pol: QPolicy) {
    prog.add_linear(alloc::vec![(q, 1.0), (p, -pol.k1)], Sense::Ge, 0.0);
    prog.add_linear(alloc::vec![(q, 1.0), (p, -pol.k2)], Sense::Le, 0.0);
}

pub fn build_sizing_model(
    forecast: &ShortageForecast,
    catalog: &[MerSpec],
    horizon: &StudyHorizon,
    config: &SizingConfig,
) -> Result<SizingModel> {
    horizon.validate()?;
    validate_catalog(catalog)?;
    let n = horizon.n_periods;
    if forecast.periods.len() != n || forecast.horizon.n_periods != n {
        return Err(Error::Model(format!(
            "forecast covers {} periods, horizon has {n}",
            forecast.periods.len()
        )));
    }
    let dt = horizon.dt;
    let pv = config.pv_profile.values(horizon)?;
    let ders = &forecast.ders;
    let mut prog = ConicProgram::new();

    let peak = forecast.peak_critical();
    let mut ubs = Vec::new();
    let mut count_vars = Vec::new();
    for m in catalog {
        let smallest = catalog
            .iter()
            .filter(|o| o.kind == m.kind)
            .map(|o| o.unit_rating())
            .fold(f64::INFINITY, f64::min);
        let ub = match config.max_units {
            Some(u) => u,
            None => math::ceil(peak / smallest - 1e-9).max(0.0) as u32 + 1,
        };
        ubs.push(ub);
        let v = prog.add_integer(format!("N[{}]", m.label()), 0.0, ub as f64, branch_class::MER);
        prog.add_objective(v, m.cost);
        count_vars.push(v);
    }
    let entries = |kind: MerKind| -> Vec<(usize, &MerSpec)> {
        catalog.iter().enumerate().filter(|(_, m)| m.kind == kind).collect()
    };
    let mdg = entries(MerKind::MDG);
    let mess = entries(MerKind::MESS);
    let mpv = entries(MerKind::MPV);
    let mut q_policy = BTreeMap::new();
    for kind in [MerKind::MDG, MerKind::MESS, MerKind::MPV] {
        if let Some(p) = kind_policy(catalog, kind)? {
            q_policy.insert(kind, p);
        }
    }

    let der_avail: Vec<Vec<f64>> = ders
        .iter()
        .map(|d| d.availability(horizon, &config.pv_profile))
        .collect::<Result<_>>()?;

    let mut periods = Vec::with_capacity(n);
    for t in 0..n {
        let sp = &forecast.periods[t];
        let mut pv_ = PeriodVars::default();
        let pl = prog.add_continuous(format!("pL[{t}]"), sp.p_short_critical, sp.p_short_total);
        let ql = prog.add_continuous(format!("qL[{t}]"), sp.q_short_critical, sp.q_short_total);
        pv_.pl = Some(pl);
        pv_.ql = Some(ql);
        let mut pbal = alloc::vec![(pl, -1.0)];
        let mut qbal = alloc::vec![(ql, -1.0)];

        if !mdg.is_empty() {
            let p = prog.add_continuous(format!("p_mdg[{t}]"), 0.0, f64::INFINITY);
            let q = prog.add_continuous(format!("q_mdg[{t}]"), 0.0, f64::INFINITY);
            let mut cap = alloc::vec![(p, 1.0)];
            for &(k, m) in &mdg {
                cap.push((count_vars[k], -m.p_size.unwrap()));
            }
            prog.add_linear(cap, Sense::Le, 0.0);
            add_q_policy(&mut prog, p, q, q_policy[&MerKind::MDG]);
            pbal.push((p, 1.0));
            qbal.push((q, 1.0));
            pv_.mdg = Some((p, q));
        }
        if !mpv.is_empty() {
            let p = prog.add_continuous(format!("p_mpv[{t}]"), 0.0, f64::INFINITY);
            let q = prog.add_continuous(format!("q_mpv[{t}]"), 0.0, f64::INFINITY);
            let mut cap = alloc::vec![(p, 1.0)];
            for &(k, m) in &mpv {
                cap.push((count_vars[k], -m.p_size.unwrap() * pv[t]));
            }
            let sense = if config.pv_curtailable { Sense::Le } else { Sense::Eq };
            prog.add_linear(cap, sense, 0.0);
            add_q_policy(&mut prog, p, q, q_policy[&MerKind::MPV]);
            pbal.push((p, 1.0));
            qbal.push((q, 1.0));
            pv_.mpv = Some((p, q));
        }
        if !mess.is_empty() {
            let lo = if config.storage_charging { f64::NEG_INFINITY } else { 0.0 };
            let p = prog.add_continuous(format!("p_mess[{t}]"), lo, f64::INFINITY);
            let q = prog.add_continuous(format!("q_mess[{t}]"), f64::NEG_INFINITY, f64::INFINITY);
            let mut radius = LinExpr::new();
            for &(k, m) in &mess {
                radius.push(count_vars[k], m.s_size.unwrap());
            }
            prog.add_soc(alloc::vec![LinExpr::var(p), LinExpr::var(q)], radius);
            pbal.push((p, 1.0));
            qbal.push((q, 1.0));
            pv_.mess = Some((p, q));
        }
        for (d, der) in ders.iter().enumerate() {
            let name = |s: &str| format!("{s}_der{d}[{t}]");
            let (p, q) = match der.kind {
                DerKind::DG => {
                    let p = prog.add_continuous(name("p"), 0.0, der.p_cap);
                    let q = prog.add_continuous(name("q"), 0.0, f64::INFINITY);
                    add_q_policy(&mut prog, p, q, der.q_policy);
                    (p, q)
                }
                DerKind::PV => {
                    let a = der_avail[d][t];
                    let lo = if config.pv_curtailable { 0.0 } else { a };
                    let p = prog.add_continuous(name("p"), lo, a);
                    let q = prog.add_continuous(name("q"), 0.0, f64::INFINITY);
                    add_q_policy(&mut prog, p, q, der.q_policy);
                    (p, q)
                }
                DerKind::ESS => {
                    let s = der.s_cap.unwrap_or(0.0);
                    let lo = if config.storage_charging { -s } else { 0.0 };
                    let p = prog.add_continuous(name("p"), lo, s);
                    let q = prog.add_continuous(name("q"), -s, s);
                    prog.add_soc(
                        alloc::vec![LinExpr::var(p), LinExpr::var(q)],
                        LinExpr::constant(s),
                    );
                    (p, q)
                }
            };
            pbal.push((p, 1.0));
            qbal.push((q, 1.0));
            pv_.ders.push((der.kind, p, q));
        }
        prog.add_linear(pbal, Sense::Eq, 0.0);
        prog.add_linear(qbal, Sense::Eq, 0.0);
        periods.push(pv_);
    }

    // Running-sum energy limits for every prefix of periods.
    for t in 0..n {
        if !mess.is_empty() {
            let mut used: Vec<(VarId, f64)> =
                (0..=t).map(|s| (periods[s].mess.unwrap().0, dt)).collect();
            prog.add_linear(used.clone(), Sense::Ge, 0.0);
            for &(k, m) in &mess {
                used.push((count_vars[k], -m.e_size.unwrap()));
            }
            prog.add_linear(used, Sense::Le, 0.0);
        }
        for (d, der) in ders.iter().enumerate() {
            if der.kind != DerKind::ESS {
                continue;
            }
            let used: Vec<(VarId, f64)> = (0..=t).map(|s| (periods[s].ders[d].1, dt)).collect();
            let es = der.e_surplus.unwrap_or(0.0);
            let ec = der.e_cap.unwrap_or(0.0);
            prog.add_linear(used.clone(), Sense::Le, es);
            prog.add_linear(used, Sense::Ge, es - ec);
        }
    }

    Ok(SizingModel {
        program: prog,
        catalog: catalog.to_vec(),
        count_vars,
        parameters: SizingParameters {
            critical_fraction: forecast.critical_fraction,
            pv_profile: config.pv_profile.clone(),
            pv_availability: pv,
            pv_curtailable: config.pv_curtailable,
            storage_charging: config.storage_charging,
            q_policy,
            unit_upper_bounds: ubs,
        },
        periods,
    })
}

impl SizingModel {
    pub fn mix_from(&self, x: &[f64]) -> MerMixDecision {
        MerMixDecision::new(
            self.catalog
                .iter()
                .zip(&self.count_vars)
                .map(|(m, &v)| MixEntry {
                    spec: m.clone(),
                    count: math::round(x[v]).max(0.0) as u32,
                })
                .collect(),
        )
    }

    pub fn dispatch_from(&self, x: &[f64]) -> Vec<SizingPeriod> {
        self.periods
            .iter()
            .map(|pv| {
                let mut out = SizingPeriod {
                    p_load: pv.pl.map_or(0.0, |v| x[v]),
                    q_load: pv.ql.map_or(0.0, |v| x[v]),
                    ..Default::default()
                };
                let get = |o: Option<(VarId, VarId)>| o.map_or((0.0, 0.0), |(p, q)| (x[p], x[q]));
                (out.p.mdg, out.q.mdg) = get(pv.mdg);
                (out.p.mess, out.q.mess) = get(pv.mess);
                (out.p.mpv, out.q.mpv) = get(pv.mpv);
                for &(kind, p, q) in &pv.ders {
                    let (tp, tq) = match kind {
                        DerKind::DG => (&mut out.p.dg, &mut out.q.dg),
                        DerKind::ESS => (&mut out.p.ess, &mut out.q.ess),
                        DerKind::PV => (&mut out.p.pv, &mut out.q.pv),
                    };
                    *tp += x[p];
                    *tq += x[q];
                }
                out
            })
            .collect()
    }

    /// Bounds with every count variable fixed to the given mix.
    pub fn bounds_for_counts(&self, counts: &[u32]) -> Vec<(f64, f64)> {
        let mut b = self.program.bounds();
        for (&v, &c) in self.count_vars.iter().zip(counts) {
            b[v] = (c as f64, c as f64);
        }
        b
    }
}

pub fn solve_sizing<B: ContinuousBackend + ?Sized, C: Clock + ?Sized>(
    model: &SizingModel,
    config: &BnBConfig,
    backend: &B,
    clock: &C,
) -> Result<SizingSolution> {
    let sol = solve_michp_with(&model.program, config, backend, clock, &[])?;
    match sol.status {
        MipStatus::Infeasible => {
            return Err(Error::Infeasible(
                "the shortage cannot be covered by the catalog and surviving resources".into(),
            ))
        }
        MipStatus::Unbounded => return Err(Error::SolverFailure("sizing model is unbounded".into())),
        MipStatus::Limit => {
            return Err(Error::SolverFailure(
                "limit reached before a feasible mix was found".into(),
            ))
        }
        MipStatus::Optimal | MipStatus::Feasible => {}
    }
    let v = model.program.violation(&sol.x);
    Ok(SizingSolution {
        mix: model.mix_from(&sol.x),
        dispatch: model.dispatch_from(&sol.x),
        parameters: model.parameters.clone(),
        status: sol.status,
        bound: sol.bound,
        gap: sol.gap,
        node_count: sol.node_count,
        max_violation: v.max(),
    })
}
