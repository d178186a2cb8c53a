use alloc::format;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::StudyHorizon;
use crate::error::{Error, Result};

/// Fraction of PV nameplate available in each period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PvProfile {
    /// Half sine between sunrise and sunset, sampled at each period start.
    HalfSine {
        start_hour: f64,
        sunrise: f64,
        sunset: f64,
    },
    Explicit { values: Vec<f64> },
}

impl Default for PvProfile {
    fn default() -> Self {
        PvProfile::HalfSine {
            start_hour: 8.0,
            sunrise: 6.0,
            sunset: 18.0,
        }
    }
}

impl PvProfile {
    pub fn values(&self, horizon: &StudyHorizon) -> Result<Vec<f64>> {
        match self {
            PvProfile::HalfSine {
                start_hour,
                sunrise,
                sunset,
            } => {
                if !(sunset > sunrise) {
                    return Err(Error::Model("PV profile needs sunset after sunrise".into()));
                }
                Ok((0..horizon.n_periods)
                    .map(|t| {
                        let raw = start_hour + t as f64 * horizon.dt;
                        let h = raw - 24.0 * crate::math::floor(raw / 24.0);
                        if h < *sunrise || h > *sunset {
                            return 0.0;
                        }
                        let s = crate::math::sin(
                            core::f64::consts::PI * (h - sunrise) / (sunset - sunrise),
                        );
                        if s < 1e-12 {
                            0.0
                        } else {
                            s
                        }
                    })
                    .collect())
            }
            PvProfile::Explicit { values } => {
                if values.len() != horizon.n_periods {
                    return Err(Error::Model(format!(
                        "PV profile has {} periods, horizon has {}",
                        values.len(),
                        horizon.n_periods
                    )));
                }
                if values.iter().any(|v| !(0.0..=1.0).contains(v)) {
                    return Err(Error::Model("PV profile values must lie in [0, 1]".into()));
                }
                Ok(values.clone())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_profile_over_eight_four_hour_periods() {
        let h = StudyHorizon { n_periods: 8, dt: 4.0 };
        let v = PvProfile::default().values(&h).unwrap();
        let expect = [0.5, 1.0, 0.5, 0.0, 0.0, 0.0, 0.5, 1.0];
        for (a, b) in v.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{v:?}");
        }
    }

    #[test]
    fn explicit_length_mismatch() {
        let h = StudyHorizon { n_periods: 3, dt: 1.0 };
        let p = PvProfile::Explicit { values: alloc::vec![1.0; 2] };
        assert!(matches!(p.values(&h), Err(Error::Model(_))));
    }
}
