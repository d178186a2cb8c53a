#![allow(dead_code)]

use std::path::PathBuf;

use distres_core::netmodel::{DamageScenario, FeederModel, ScenarioSpec};

pub fn fixture(rel: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(rel)
}

pub fn read(rel: &str) -> String {
    std::fs::read_to_string(fixture(rel)).unwrap()
}

pub fn feeder(case: &str) -> FeederModel {
    let f: FeederModel = serde_json::from_str(&read(&format!("{case}/feeder.json"))).unwrap();
    f.validate().unwrap();
    f
}

pub fn scenario_spec(case: &str) -> ScenarioSpec {
    serde_json::from_str(&read(&format!("{case}/scenario.json"))).unwrap()
}

pub fn case(name: &str) -> (FeederModel, DamageScenario) {
    let f = feeder(name);
    let s = DamageScenario::from_spec(&scenario_spec(name), &f).unwrap();
    (f, s)
}
