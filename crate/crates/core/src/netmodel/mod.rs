//! Feeders, damage scenarios, resource catalogs and study horizons.
//!
//! Network quantities (impedances, line capacities) are per-unit on the
//! feeder's declared bases. Loads and resources are entered in MW, MVAr and
//! MWh; the model builders convert at their boundary.

mod forecast;
mod pv;
mod scenario;
mod travel;

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use forecast::{ForecastSpec, ShortageForecast, ShortagePeriod};
pub use pv::PvProfile;
pub use scenario::{DamageScenario, GridSeries, Rounding, ScenarioSpec, TimeUnit, TravelSpec};
pub use travel::gen_travel_matrix;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct BusId(pub String);

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LineId(pub String);

impl BusId {
    pub fn new(s: impl Into<String>) -> Self {
        BusId(s.into())
    }
}

impl LineId {
    pub fn new(s: impl Into<String>) -> Self {
        LineId(s.into())
    }
}

/// Numeric ids compare as numbers, everything else lexically; numbers sort first.
impl Ord for BusId {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self.0.parse::<u64>(), other.0.parse::<u64>()) {
            (Ok(a), Ok(b)) => a.cmp(&b).then_with(|| self.0.cmp(&other.0)),
            (Ok(_), Err(_)) => Ordering::Less,
            (Err(_), Ok(_)) => Ordering::Greater,
            _ => self.0.cmp(&other.0),
        }
    }
}

impl PartialOrd for BusId {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for BusId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl fmt::Display for LineId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for BusId {
    fn from(s: &str) -> Self {
        BusId(s.to_string())
    }
}

impl From<&str> for LineId {
    fn from(s: &str) -> Self {
        LineId(s.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bases {
    pub s_mva: f64,
    pub v_kv: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: BusId,
    pub vmin: f64,
    pub vmax: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub id: LineId,
    #[serde(rename = "from")]
    pub from_bus: BusId,
    #[serde(rename = "to")]
    pub to_bus: BusId,
    pub r: f64,
    pub x: f64,
    pub i2max: f64,
    pub smax: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LoadProfile {
    pub bus: BusId,
    pub p_total: Vec<f64>,
    #[serde(rename = "p_crit")]
    pub p_critical: Vec<f64>,
    pub q_total: Vec<f64>,
    #[serde(rename = "q_crit")]
    pub q_critical: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DerKind {
    DG,
    ESS,
    PV,
}

/// Reactive output bounds as fractions of active output: `k1·p ≤ q ≤ k2·p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(from = "(f64, f64)", into = "(f64, f64)")]
pub struct QPolicy {
    pub k1: f64,
    pub k2: f64,
}

impl Default for QPolicy {
    fn default() -> Self {
        QPolicy { k1: 0.2, k2: 0.6 }
    }
}

impl From<(f64, f64)> for QPolicy {
    fn from((k1, k2): (f64, f64)) -> Self {
        QPolicy { k1, k2 }
    }
}

impl From<QPolicy> for (f64, f64) {
    fn from(q: QPolicy) -> Self {
        (q.k1, q.k2)
    }
}

impl QPolicy {
    fn check(&self, record: &str) -> Result<()> {
        if !(0.0 <= self.k1 && self.k1 <= self.k2 && self.k2 <= 1.0) {
            return Err(Error::validation(
                record,
                format!("q_policy ({}, {}) must satisfy 0 <= k1 <= k2 <= 1", self.k1, self.k2),
            ));
        }
        Ok(())
    }
}

/// Resistances and converter rating used by the storage loss model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StorageLossParams {
    /// Total internal resistance, p.u.
    pub r_e: f64,
    /// Converter resistance, p.u.
    pub r_ct: f64,
    /// Apparent-power rating, p.u.
    pub s_cap: f64,
}

impl StorageLossParams {
    /// Battery-side resistance: the total less the converter share.
    pub fn r_bt(&self) -> f64 {
        self.r_e - self.r_ct
    }
}

fn is_default_policy(q: &QPolicy) -> bool {
    *q == QPolicy::default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerUnit {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub bus: BusId,
    pub kind: DerKind,
    /// Active capacity in MW (nameplate for PV).
    #[serde(default)]
    pub p_cap: f64,
    /// Explicit PV availability per period in MW; overrides nameplate × profile.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_avail: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "is_default_policy")]
    pub q_policy: QPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_cap: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_surplus: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_e: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_ct: Option<f64>,
}

impl DerUnit {
    pub fn label(&self) -> String {
        match &self.id {
            Some(id) => format!("der {id}"),
            None => format!("{:?} at bus {}", self.kind, self.bus),
        }
    }

    /// Available active power per period in MW (PV only; DG returns its capacity).
    pub fn availability(&self, horizon: &StudyHorizon, profile: &PvProfile) -> Result<Vec<f64>> {
        match self.kind {
            DerKind::PV => match &self.p_avail {
                Some(a) => {
                    if a.len() != horizon.n_periods {
                        return Err(Error::Model(format!(
                            "{}: p_avail has {} periods, horizon has {}",
                            self.label(),
                            a.len(),
                            horizon.n_periods
                        )));
                    }
                    Ok(a.clone())
                }
                None => Ok(profile
                    .values(horizon)?
                    .into_iter()
                    .map(|f| f * self.p_cap)
                    .collect()),
            },
            _ => Ok(alloc::vec![self.p_cap; horizon.n_periods]),
        }
    }

    /// Loss-model parameters in p.u. on `s_base`.
    pub fn loss_params(&self, s_base: f64) -> Result<StorageLossParams> {
        let missing = |parameter| Error::MissingParameter {
            record: self.label(),
            parameter,
        };
        Ok(StorageLossParams {
            r_e: self.r_e.ok_or_else(|| missing("r_e"))?,
            r_ct: self.r_ct.ok_or_else(|| missing("r_ct"))?,
            s_cap: self.s_cap.ok_or_else(|| missing("s_cap"))? / s_base,
        })
    }

    pub(crate) fn validate(&self, n_periods: Option<usize>) -> Result<()> {
        let rec = self.label();
        self.q_policy.check(&rec)?;
        if !(self.p_cap >= 0.0) {
            return Err(Error::validation(&rec, "p_cap must be nonnegative"));
        }
        if let Some(a) = &self.p_avail {
            if a.iter().any(|v| !(*v >= 0.0)) {
                return Err(Error::validation(&rec, "p_avail must be nonnegative"));
            }
            if let Some(n) = n_periods {
                if a.len() != n {
                    return Err(Error::validation(
                        &rec,
                        format!("p_avail has {} periods, expected {n}", a.len()),
                    ));
                }
            }
        }
        if self.kind == DerKind::ESS {
            let e_cap = self
                .e_cap
                .ok_or_else(|| Error::validation(&rec, "ESS requires e_cap"))?;
            let s_cap = self
                .s_cap
                .ok_or_else(|| Error::validation(&rec, "ESS requires s_cap"))?;
            let e_surplus = self
                .e_surplus
                .ok_or_else(|| Error::validation(&rec, "ESS requires e_surplus"))?;
            if !(e_cap >= 0.0 && s_cap >= 0.0 && e_surplus >= 0.0) {
                return Err(Error::validation(&rec, "storage ratings must be nonnegative"));
            }
            if e_surplus > e_cap {
                return Err(Error::validation(&rec, "e_surplus exceeds e_cap"));
            }
        }
        if let (Some(re), Some(rct)) = (self.r_e, self.r_ct) {
            if !(rct >= 0.0 && rct <= re) {
                return Err(Error::validation(&rec, "require 0 <= r_ct <= r_e"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum MerKind {
    MDG,
    MESS,
    MPV,
}

/// One purchasable size option of a mobile resource.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MerSpec {
    pub kind: MerKind,
    pub size_index: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_size: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub e_size: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_size: Option<f64>,
    pub cost: f64,
    #[serde(default, skip_serializing_if = "is_default_policy")]
    pub q_policy: QPolicy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_e: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub r_ct: Option<f64>,
}

impl MerSpec {
    pub fn label(&self) -> String {
        format!("{:?}[{}]", self.kind, self.size_index)
    }

    /// Rating that bounds a single unit's output (MW for MDG/MPV, MVA for MESS).
    pub fn unit_rating(&self) -> f64 {
        match self.kind {
            MerKind::MESS => self.s_size.unwrap_or(0.0),
            _ => self.p_size.unwrap_or(0.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let rec = self.label();
        if !(self.cost > 0.0) {
            return Err(Error::validation(&rec, "cost must be positive"));
        }
        self.q_policy.check(&rec)?;
        let ok = match self.kind {
            MerKind::MDG | MerKind::MPV => {
                self.p_size.is_some() && self.e_size.is_none() && self.s_size.is_none()
            }
            MerKind::MESS => self.p_size.is_none() && self.e_size.is_some() && self.s_size.is_some(),
        };
        if !ok {
            return Err(Error::validation(
                &rec,
                "exactly the size fields relevant to the kind must be set",
            ));
        }
        for v in [self.p_size, self.e_size, self.s_size].into_iter().flatten() {
            if !(v > 0.0) {
                return Err(Error::validation(&rec, "sizes must be positive"));
            }
        }
        if let (Some(re), Some(rct)) = (self.r_e, self.r_ct) {
            if !(rct >= 0.0 && rct <= re) {
                return Err(Error::validation(&rec, "require 0 <= r_ct <= r_e"));
            }
        }
        Ok(())
    }
}

pub fn validate_catalog(catalog: &[MerSpec]) -> Result<()> {
    let mut seen = BTreeSet::new();
    for m in catalog {
        m.validate()?;
        if !seen.insert((m.kind, m.size_index)) {
            return Err(Error::validation(m.label(), "duplicate catalog entry"));
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyHorizon {
    pub n_periods: usize,
    #[serde(rename = "dt_hours")]
    pub dt: f64,
}

impl StudyHorizon {
    pub fn validate(&self) -> Result<()> {
        if self.n_periods < 1 {
            return Err(Error::validation("horizon", "n_periods must be at least 1"));
        }
        if !(self.dt > 0.0) {
            return Err(Error::validation("horizon", "dt_hours must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeederModel {
    pub bases: Bases,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    #[serde(default)]
    pub loads: Vec<LoadProfile>,
    #[serde(default)]
    pub ders: Vec<DerUnit>,
    pub horizon: StudyHorizon,
}

impl FeederModel {
    pub fn bus_index(&self, id: &BusId) -> Option<usize> {
        self.buses.iter().position(|b| &b.id == id)
    }

    pub fn line_index(&self, id: &LineId) -> Option<usize> {
        self.lines.iter().position(|l| &l.id == id)
    }

    pub fn load_at(&self, bus: &BusId) -> Option<&LoadProfile> {
        self.loads.iter().find(|l| &l.bus == bus)
    }

    /// Checks every type invariant and cross-reference.
    pub fn validate(&self) -> Result<()> {
        let b = &self.bases;
        if !(b.s_mva > 0.0 && b.v_kv > 0.0) {
            return Err(Error::validation("bases", "s_mva and v_kv must be positive"));
        }
        self.horizon.validate()?;
        let n = self.horizon.n_periods;

        let mut ids = BTreeSet::new();
        for bus in &self.buses {
            let rec = format!("bus {}", bus.id);
            if !ids.insert(bus.id.clone()) {
                return Err(Error::validation(rec, "duplicate id"));
            }
            if !(0.0 < bus.vmin && bus.vmin < bus.vmax) {
                return Err(Error::validation(rec, "require 0 < vmin < vmax"));
            }
        }
        let mut line_ids = BTreeSet::new();
        for line in &self.lines {
            let rec = format!("line {}", line.id);
            if !line_ids.insert(line.id.clone()) {
                return Err(Error::validation(rec, "duplicate id"));
            }
            if line.from_bus == line.to_bus {
                return Err(Error::validation(rec, "from_bus equals to_bus"));
            }
            for end in [&line.from_bus, &line.to_bus] {
                if !ids.contains(end) {
                    return Err(Error::validation(rec, format!("unknown bus {end}")));
                }
            }
            if !(line.r >= 0.0 && line.x >= 0.0) || (line.r == 0.0 && line.x == 0.0) {
                return Err(Error::validation(
                    rec,
                    "r and x must be nonnegative and not both zero",
                ));
            }
            if !(line.i2max > 0.0 && line.smax > 0.0) {
                return Err(Error::validation(rec, "i2max and smax must be positive"));
            }
        }
        let mut load_buses = BTreeSet::new();
        for load in &self.loads {
            let rec = format!("load at bus {}", load.bus);
            if !ids.contains(&load.bus) {
                return Err(Error::validation(rec, "unknown bus"));
            }
            if !load_buses.insert(load.bus.clone()) {
                return Err(Error::validation(rec, "more than one load record for bus"));
            }
            check_series_pair(&rec, "p", &load.p_total, &load.p_critical, n)?;
            check_series_pair(&rec, "q", &load.q_total, &load.q_critical, n)?;
        }
        for der in &self.ders {
            if !ids.contains(&der.bus) {
                return Err(Error::validation(der.label(), "unknown bus"));
            }
            der.validate(Some(n))?;
        }
        Ok(())
    }
}

pub(crate) fn check_series_pair(
    rec: &str,
    what: &str,
    total: &[f64],
    critical: &[f64],
    n: usize,
) -> Result<()> {
    if total.len() != n || critical.len() != n {
        return Err(Error::validation(
            rec,
            format!(
                "{what} series lengths ({}, {}) differ from horizon length {n}",
                total.len(),
                critical.len()
            ),
        ));
    }
    for (t, (&tot, &crit)) in total.iter().zip(critical).enumerate() {
        if !(0.0 <= crit && crit <= tot) {
            return Err(Error::validation(
                rec,
                format!("period {}: require 0 <= {what}_crit <= {what}_total", t + 1),
            ));
        }
    }
    Ok(())
}
