#![allow(dead_code)]

use std::path::PathBuf;

use distres::io::{load_catalog, load_feeder, load_forecast, load_scenario, read_json};
use distres::{ClarabelBackend, WallClock};
use distres_core::netmodel::{DamageScenario, FeederModel, MerSpec, ShortageForecast};
use distres_core::postdisaster::{build_restoration_model, RestorationConfig, RestorationModel};
use distres_core::predisaster::{build_sizing_model, solve_sizing, MerMixDecision, SizingConfig, SizingModel, SizingSolution};
use distres_core::solver::BnBConfig;
use distres_core::supernode::{aggregate, detect_islands, SuperNodeGraph};

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

pub fn feeder(case: &str) -> FeederModel {
    load_feeder(&fixture(&format!("{case}/feeder.json"))).unwrap()
}

pub fn case(name: &str) -> (FeederModel, DamageScenario) {
    let f = feeder(name);
    let s = load_scenario(&fixture(&format!("{name}/scenario.json")), &f).unwrap();
    (f, s)
}

pub fn graph(name: &str) -> (FeederModel, DamageScenario, SuperNodeGraph) {
    let (f, s) = case(name);
    let g = aggregate(&f, &detect_islands(&f, &s), &s).unwrap();
    (f, s, g)
}

pub fn forecast(case: &str) -> ShortageForecast {
    load_forecast(&fixture(&format!("{case}/forecast.json"))).unwrap()
}

pub fn catalog() -> Vec<MerSpec> {
    load_catalog(&fixture("catalog.json")).unwrap()
}

pub fn sizing_model(fc: &ShortageForecast) -> SizingModel {
    build_sizing_model(fc, &catalog(), &fc.horizon, &SizingConfig::default()).unwrap()
}

pub fn size(case: &str) -> (SizingModel, SizingSolution) {
    let m = sizing_model(&forecast(case));
    let s = solve_sizing(&m, &BnBConfig::with_gap(1e-4), &ClarabelBackend::default(), &WallClock::start()).unwrap();
    (m, s)
}

pub fn ieee13_mix() -> MerMixDecision {
    read_json(&fixture("ieee13/mix.json")).unwrap()
}

pub fn restoration(name: &str, mix: &MerMixDecision) -> RestorationModel {
    let (f, s, g) = graph(name);
    build_restoration_model(&g, mix, &s, &f.horizon, &RestorationConfig::default()).unwrap()
}
