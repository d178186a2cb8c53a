use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::{check_series_pair, DerUnit, StudyHorizon};
use crate::error::{Error, Result};

/// Forecast file contents; critical series may be omitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastSpec {
    pub horizon: StudyHorizon,
    pub p_short_total: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p_short_critical: Option<Vec<f64>>,
    pub q_short_total: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_short_critical: Option<Vec<f64>>,
    #[serde(default)]
    pub ders: Vec<DerUnit>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShortagePeriod {
    pub p_short_total: f64,
    pub p_short_critical: f64,
    pub q_short_total: f64,
    pub q_short_critical: f64,
}

/// Predicted energy shortage of the whole area plus the resources expected to survive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShortageForecast {
    pub horizon: StudyHorizon,
    pub periods: Vec<ShortagePeriod>,
    pub ders: Vec<DerUnit>,
    /// Fraction applied to derive missing critical series, if any was applied.
    pub critical_fraction: Option<f64>,
}

impl ShortageForecast {
    pub fn from_spec(spec: &ForecastSpec, default_critical_fraction: f64) -> Result<Self> {
        spec.horizon.validate()?;
        let n = spec.horizon.n_periods;
        if !(0.0..=1.0).contains(&default_critical_fraction) {
            return Err(Error::validation(
                "forecast",
                "critical fraction must lie in [0, 1]",
            ));
        }
        let mut used_default = false;
        let mut derive = |given: &Option<Vec<f64>>, total: &[f64]| match given {
            Some(c) => c.clone(),
            None => {
                used_default = true;
                total.iter().map(|v| v * default_critical_fraction).collect()
            }
        };
        let p_crit = derive(&spec.p_short_critical, &spec.p_short_total);
        let q_crit = derive(&spec.q_short_critical, &spec.q_short_total);
        check_series_pair("forecast", "p_short", &spec.p_short_total, &p_crit, n)?;
        check_series_pair("forecast", "q_short", &spec.q_short_total, &q_crit, n)?;
        for der in &spec.ders {
            der.validate(Some(n))?;
        }
        let periods = (0..n)
            .map(|t| ShortagePeriod {
                p_short_total: spec.p_short_total[t],
                p_short_critical: p_crit[t],
                q_short_total: spec.q_short_total[t],
                q_short_critical: q_crit[t],
            })
            .collect();
        Ok(ShortageForecast {
            horizon: spec.horizon,
            periods,
            ders: spec.ders.clone(),
            critical_fraction: used_default.then_some(default_critical_fraction),
        })
    }

    /// Same forecast with every critical value multiplied by `factor`.
    pub fn scale_critical(&self, factor: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&factor) {
            return Err(Error::Model(format!("scale factor {factor} outside [0, 1]")));
        }
        let mut out = self.clone();
        for p in &mut out.periods {
            p.p_short_critical *= factor;
            p.q_short_critical *= factor;
        }
        Ok(out)
    }

    pub fn peak_critical(&self) -> f64 {
        self.periods
            .iter()
            .map(|p| p.p_short_critical)
            .fold(0.0, f64::max)
    }
}
