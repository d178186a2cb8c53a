//! JSON and CSV file formats.

use std::fs;
use std::path::Path;

use distres_core::netmodel::{
    validate_catalog, DamageScenario, FeederModel, ForecastSpec, MerSpec, ScenarioSpec, ShortageForecast,
};
use distres_core::postdisaster::EnergySeries;
use distres_core::{Error, Result};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Critical share of the total shortage when a forecast gives none.
pub const DEFAULT_CRITICAL_FRACTION: f64 = 0.6;

pub(crate) fn io_error(path: &Path, e: std::io::Error) -> Error {
    Error::Parse(format!("{}: {e}", path.display()))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| io_error(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = read(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable value");
    s.push('\n');
    s
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &to_json(value))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
        }
    }
    fs::write(path, text).map_err(|e| io_error(path, e))
}

pub fn parse_feeder(text: &str) -> Result<FeederModel> {
    let f: FeederModel = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    f.validate()?;
    Ok(f)
}

pub fn load_feeder(path: &Path) -> Result<FeederModel> {
    parse_feeder(&read(path)?).map_err(|e| match e {
        Error::Parse(m) => Error::Parse(format!("{}: {m}", path.display())),
        other => other,
    })
}

pub fn load_scenario(path: &Path, feeder: &FeederModel) -> Result<DamageScenario> {
    let spec: ScenarioSpec = read_json(path)?;
    DamageScenario::from_spec(&spec, feeder)
}

pub fn load_forecast(path: &Path) -> Result<ShortageForecast> {
    let spec: ForecastSpec = read_json(path)?;
    ShortageForecast::from_spec(&spec, DEFAULT_CRITICAL_FRACTION)
}

pub fn load_catalog(path: &Path) -> Result<Vec<MerSpec>> {
    let cat: Vec<MerSpec> = read_json(path)?;
    validate_catalog(&cat)?;
    Ok(cat)
}

pub const ENERGY_CSV_HEADER: &str = "period,ter_mwh,tes_mwh,unserved_mwh";

pub fn energy_csv(series: &EnergySeries) -> String {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(ENERGY_CSV_HEADER.split(',')).expect("in-memory write");
    for p in &series.periods {
        w.write_record([
            p.period.to_string(),
            format!("{:.9}", p.ter_mwh),
            format!("{:.9}", p.tes_mwh),
            format!("{:.9}", p.ter_mwh - p.tes_mwh),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("flush")).expect("utf-8")
}
