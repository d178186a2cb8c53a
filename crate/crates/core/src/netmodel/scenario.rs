use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{gen_travel_matrix, BusId, FeederModel, LineId};
use crate::error::{Error, Result};
use crate::math;

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimeUnit {
    #[default]
    Periods,
    Hours,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rounding {
    #[default]
    Ceil,
    Floor,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TravelSpec {
    Matrix(Vec<Vec<f64>>),
    Seeded { seed: u64, max: u32 },
}

impl Default for TravelSpec {
    fn default() -> Self {
        TravelSpec::Matrix(Vec::new())
    }
}

/// Grid supply per period in MW / MVAr.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSeries {
    pub p: Vec<f64>,
    pub q: Vec<f64>,
}

/// Scenario file contents before quantization to periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub damaged: Vec<LineId>,
    #[serde(default)]
    pub repair_time: BTreeMap<LineId, f64>,
    #[serde(default)]
    pub time_unit: TimeUnit,
    #[serde(default)]
    pub travel_rounding: Rounding,
    #[serde(default)]
    pub travel: TravelSpec,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub depot_travel: BTreeMap<LineId, f64>,
    pub n_crews: usize,
    #[serde(default)]
    pub grid: BTreeMap<BusId, GridSeries>,
}

/// Damage, repair data and crew resources with all times in whole periods.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DamageScenario {
    pub damaged_lines: Vec<LineId>,
    /// Aligned with `damaged_lines`.
    pub repair_time: Vec<u32>,
    /// Square over `damaged_lines`.
    pub travel_time: Vec<Vec<u32>>,
    /// Earliest period index at which a crew can first be at each line.
    pub depot_travel: Vec<u32>,
    pub n_crews: usize,
    pub grid_power: BTreeMap<BusId, GridSeries>,
}

impl DamageScenario {
    pub fn no_damage(n_crews: usize) -> Self {
        DamageScenario {
            damaged_lines: Vec::new(),
            repair_time: Vec::new(),
            travel_time: Vec::new(),
            depot_travel: Vec::new(),
            n_crews,
            grid_power: BTreeMap::new(),
        }
    }

    pub fn is_damaged(&self, line: &LineId) -> bool {
        self.damaged_lines.contains(line)
    }

    pub fn task_index(&self, line: &LineId) -> Option<usize> {
        self.damaged_lines.iter().position(|l| l == line)
    }

    /// Resolves hours, seeded matrices and rounding against the feeder's horizon.
    pub fn from_spec(spec: &ScenarioSpec, feeder: &FeederModel) -> Result<Self> {
        let dt = feeder.horizon.dt;
        let n = spec.damaged.len();
        let mut seen = BTreeSet::new();
        for id in &spec.damaged {
            if feeder.line_index(id).is_none() {
                return Err(Error::UnknownLine(id.0.clone()));
            }
            if !seen.insert(id.clone()) {
                return Err(Error::validation(format!("damaged line {id}"), "listed twice"));
            }
        }
        for id in spec.repair_time.keys().chain(spec.depot_travel.keys()) {
            if feeder.line_index(id).is_none() {
                return Err(Error::UnknownLine(id.0.clone()));
            }
            if !seen.contains(id) {
                return Err(Error::validation(
                    format!("line {id}"),
                    "repair or depot data given for a line that is not damaged",
                ));
            }
        }
        let to_periods = |v: f64| match spec.time_unit {
            TimeUnit::Periods => v,
            TimeUnit::Hours => v / dt,
        };

        let mut repair_time = Vec::with_capacity(n);
        for id in &spec.damaged {
            let rec = format!("repair time of line {id}");
            let v = *spec
                .repair_time
                .get(id)
                .ok_or_else(|| Error::validation(&rec, "missing"))?;
            if !(v > 0.0) {
                return Err(Error::validation(&rec, "must be positive"));
            }
            repair_time.push(math::ceil(to_periods(v) - 1e-9) as u32);
        }

        let raw: Vec<Vec<f64>> = match &spec.travel {
            TravelSpec::Matrix(m) => m.clone(),
            TravelSpec::Seeded { seed, max } => gen_travel_matrix(n, *seed, *max)
                .into_iter()
                .map(|r| r.into_iter().map(f64::from).collect())
                .collect(),
        };
        if raw.len() != n || raw.iter().any(|r| r.len() != n) {
            return Err(Error::Dimension(format!(
                "travel matrix must be {n}x{n} to match the damaged-line count"
            )));
        }
        let quantize = |v: f64| match spec.travel_rounding {
            Rounding::Ceil => math::ceil(to_periods(v) - 1e-9) as u32,
            Rounding::Floor => math::floor(to_periods(v) + 1e-9) as u32,
        };
        let mut travel_time = vec![vec![0u32; n]; n];
        for i in 0..n {
            for j in 0..n {
                let v = raw[i][j];
                if !(v >= 0.0) {
                    return Err(Error::validation("travel matrix", "entries must be nonnegative"));
                }
                if i == j && v != 0.0 {
                    return Err(Error::validation("travel matrix", "diagonal must be zero"));
                }
                travel_time[i][j] = quantize(v);
            }
        }
        let mut depot_travel = vec![0u32; n];
        for (k, id) in spec.damaged.iter().enumerate() {
            if let Some(&v) = spec.depot_travel.get(id) {
                if !(v >= 0.0) {
                    return Err(Error::validation(format!("depot travel of line {id}"), "negative"));
                }
                depot_travel[k] = quantize(v);
            }
        }

        for (bus, g) in &spec.grid {
            let rec = format!("grid supply at bus {bus}");
            if feeder.bus_index(bus).is_none() {
                return Err(Error::validation(&rec, "unknown bus"));
            }
            let np = feeder.horizon.n_periods;
            if g.p.len() != np || g.q.len() != np {
                return Err(Error::validation(&rec, format!("series must have {np} periods")));
            }
            if g.p.iter().chain(&g.q).any(|v| !v.is_finite()) {
                return Err(Error::validation(&rec, "values must be finite"));
            }
        }

        Ok(DamageScenario {
            damaged_lines: spec.damaged.clone(),
            repair_time,
            travel_time,
            depot_travel,
            n_crews: spec.n_crews,
            grid_power: spec.grid.clone(),
        })
    }

    /// Period-denominated spec that resolves back to `self`.
    pub fn to_spec(&self) -> ScenarioSpec {
        let travel = TravelSpec::Matrix(
            self.travel_time
                .iter()
                .map(|r| r.iter().map(|&v| f64::from(v)).collect())
                .collect(),
        );
        ScenarioSpec {
            damaged: self.damaged_lines.clone(),
            repair_time: self
                .damaged_lines
                .iter()
                .cloned()
                .zip(self.repair_time.iter().map(|&v| f64::from(v)))
                .collect(),
            time_unit: TimeUnit::Periods,
            travel_rounding: Rounding::Ceil,
            travel,
            depot_travel: self
                .damaged_lines
                .iter()
                .cloned()
                .zip(self.depot_travel.iter().map(|&v| f64::from(v)))
                .filter(|(_, v)| *v > 0.0)
                .collect(),
            n_crews: self.n_crews,
            grid: self.grid_power.clone(),
        }
    }
}
