//! Sampling checks of the hull relaxations over every line and storage unit
//! of a feeder.

use distres_core::chr::{
    hull_line_flow, hull_storage_loss_params, soundness_check, Manifold, ManifoldParams, SoundnessReport,
    StorageConeVariant,
};
use distres_core::netmodel::{DerKind, FeederModel, MerKind, MerSpec, StorageLossParams};
use distres_core::{Error, Result};
use serde::{Deserialize, Serialize};

pub const DEFAULT_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineSoundness {
    pub line: String,
    pub report: SoundnessReport,
}

/// Storage results for the resistance-free cone, and for the resistance-scaled
/// cone whenever the first one fails.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageSoundness {
    pub unit: String,
    pub resistance_free: SoundnessReport,
    pub resistance_scaled: Option<SoundnessReport>,
}

impl StorageSoundness {
    pub fn passed(&self) -> bool {
        self.resistance_free.passed() || self.resistance_scaled.as_ref().is_some_and(|r| r.passed())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullSuiteReport {
    pub n_samples: usize,
    pub seed: u64,
    pub lines: Vec<LineSoundness>,
    pub storage: Vec<StorageSoundness>,
}

impl HullSuiteReport {
    pub fn lines_passed(&self) -> bool {
        self.lines.iter().all(|l| l.report.passed())
    }

    pub fn storage_passed(&self) -> bool {
        self.storage.iter().all(StorageSoundness::passed)
    }

    pub fn passed(&self) -> bool {
        self.lines_passed() && self.storage_passed()
    }
}

fn storage_check(
    unit: String,
    params: StorageLossParams,
    vmin: f64,
    vmax: f64,
    n_samples: usize,
    seed: u64,
) -> StorageSoundness {
    let box_ = ManifoldParams {
        vmin,
        vmax,
        smax: params.s_cap,
        i2max: None,
        r_e: params.r_e,
        r_ct: params.r_ct,
    };
    let run = |variant| {
        let hull = hull_storage_loss_params(&params, vmin, vmax, variant);
        soundness_check(&hull, Manifold::StorageLoss, &box_, n_samples, seed)
    };
    let resistance_free = run(StorageConeVariant::ResistanceFree);
    let resistance_scaled = (!resistance_free.passed()).then(|| run(StorageConeVariant::ResistanceScaled));
    StorageSoundness {
        unit,
        resistance_free,
        resistance_scaled,
    }
}

/// Checks every line of `feeder` against its sending bus, every stationary
/// storage unit, and every mobile storage size in `catalog` over the widest
/// voltage band of the feeder. Line `k` uses seed `seed + k`.
pub fn hull_suite(feeder: &FeederModel, catalog: &[MerSpec], n_samples: usize, seed: u64) -> Result<HullSuiteReport> {
    let mut report = HullSuiteReport {
        n_samples,
        seed,
        lines: Vec::new(),
        storage: Vec::new(),
    };
    let mut k = 0u64;
    for line in &feeder.lines {
        let bus = feeder
            .bus_index(&line.from_bus)
            .map(|b| &feeder.buses[b])
            .ok_or_else(|| Error::UnknownLine(line.id.0.clone()))?;
        let hull = hull_line_flow(line, bus);
        let params = ManifoldParams {
            vmin: bus.vmin,
            vmax: bus.vmax,
            smax: line.smax,
            i2max: Some(line.i2max),
            r_e: 0.0,
            r_ct: 0.0,
        };
        report.lines.push(LineSoundness {
            line: line.id.0.clone(),
            report: soundness_check(&hull, Manifold::BranchFlow, &params, n_samples, seed.wrapping_add(k)),
        });
        k += 1;
    }
    let s_base = feeder.bases.s_mva;
    for der in feeder.ders.iter().filter(|d| d.kind == DerKind::ESS) {
        let bus = feeder
            .bus_index(&der.bus)
            .map(|b| &feeder.buses[b])
            .ok_or_else(|| Error::Validation {
                record: der.label(),
                message: "unknown bus".into(),
            })?;
        let params = der.loss_params(s_base)?;
        report
            .storage
            .push(storage_check(der.label(), params, bus.vmin, bus.vmax, n_samples, seed.wrapping_add(k)));
        k += 1;
    }
    let vmin = feeder.buses.iter().map(|b| b.vmin).fold(f64::INFINITY, f64::min);
    let vmax = feeder.buses.iter().map(|b| b.vmax).fold(f64::NEG_INFINITY, f64::max);
    for m in catalog.iter().filter(|m| m.kind == MerKind::MESS) {
        let missing = |parameter| Error::MissingParameter {
            record: m.label(),
            parameter,
        };
        let params = StorageLossParams {
            r_e: m.r_e.ok_or_else(|| missing("r_e"))?,
            r_ct: m.r_ct.ok_or_else(|| missing("r_ct"))?,
            s_cap: m.s_size.ok_or_else(|| missing("s_size"))? / s_base,
        };
        report
            .storage
            .push(storage_check(m.label(), params, vmin, vmax, n_samples, seed.wrapping_add(k)));
        k += 1;
    }
    Ok(report)
}
