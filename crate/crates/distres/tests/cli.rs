mod common;

use std::path::{Path, PathBuf};
use std::process::Command;

use distres::cli::{run, PlanFile, ValidationReport};
use distres::manifest::{manifest_path, sha256_hex, RunManifest};
use distres::soundness::HullSuiteReport;
use distres_core::netmodel::{DerKind, MerKind};
use distres_core::predisaster::SizingSolution;
use distres_core::supernode::SuperNodeGraph;

fn fx(rel: &str) -> String {
    common::fixture(rel).display().to_string()
}

fn distres(args: &[&str]) -> i32 {
    run(std::iter::once("distres").chain(args.iter().copied()))
}

fn out(dir: &Path, name: &str) -> String {
    dir.join(name).display().to_string()
}

fn read<T: serde::de::DeserializeOwned>(path: &str) -> T {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

fn manifest(path: &str) -> RunManifest {
    read(&manifest_path(Path::new(path)).display().to_string())
}

#[test]
fn ieee13_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let graph = out(dir.path(), "graph.json");
    let plan = out(dir.path(), "plan.json");
    let report = out(dir.path(), "report.json");
    let csv = out(dir.path(), "ter_tes.csv");

    let scenario = fx("ieee13/scenario.json");
    assert_eq!(distres(&["reduce", "--feeder", &fx("ieee13/feeder.json"), "--scenario", &scenario, "--out", &graph]), 0);
    let g: SuperNodeGraph = read(&graph);
    assert_eq!(g.nodes.len(), 4);
    let m = manifest(&graph);
    assert_eq!(m.command, "reduce");
    assert_eq!(m.inputs["scenario"].sha256, sha256_hex(&std::fs::read(&scenario).unwrap()));
    for key in ["drop_threshold", "seed", "threads", "reduction_report"] {
        assert!(m.parameters.contains_key(key), "{key}");
    }

    assert_eq!(
        distres(&["restore", "--graph", &graph, "--mix", &fx("ieee13/mix.json"), "--scenario", &scenario, "--out", &plan]),
        0
    );
    let pf: PlanFile = read(&plan);
    assert!(pf.plan.energized_at.iter().all(Option::is_some));
    let m = manifest(&plan);
    for key in ["bnb", "schedule_search", "restoration"] {
        assert!(m.parameters.contains_key(key), "{key}");
    }
    assert!(m.parameters["bnb"]["gap"].as_f64().unwrap() > 0.0);

    assert_eq!(distres(&["validate", "--plan", &plan, "--graph", &graph, "--out", &report]), 0);
    let v: ValidationReport = read(&report);
    assert!(v.invariants.passed());

    assert_eq!(distres(&["report", "--plan", &plan, "--out", &csv]), 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("period,ter_mwh,tes_mwh,unserved_mwh"));
    let mut unserved = 0.0;
    let mut rows = 0;
    for line in lines {
        let cols: Vec<f64> = line.split(',').map(|c| c.parse().unwrap()).collect();
        assert!((cols[1] - cols[2] - cols[3]).abs() < 1e-9);
        unserved += cols[3];
        rows += 1;
    }
    assert_eq!(rows, 8);
    assert!((unserved - pf.plan.objective).abs() < 1e-6, "{unserved} vs {}", pf.plan.objective);
}

#[test]
fn outputs_are_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = fx("ieee13/scenario.json");
    let mut files = Vec::new();
    for k in 0..2 {
        let graph = out(dir.path(), &format!("graph{k}.json"));
        let plan = out(dir.path(), &format!("plan{k}.json"));
        assert_eq!(distres(&["reduce", "--feeder", &fx("ieee13/feeder.json"), "--scenario", &scenario, "--out", &graph]), 0);
        assert_eq!(
            distres(&["restore", "--graph", &graph, "--mix", &fx("ieee13/mix.json"), "--scenario", &scenario, "--out", &plan]),
            0
        );
        let travel = out(dir.path(), &format!("travel{k}.json"));
        assert_eq!(distres(&["--seed", "7", "gen-travel", "--n", "5", "--out", &travel]), 0);
        files.push([graph, plan, travel]);
    }
    for (a, b) in files[0].iter().zip(&files[1]) {
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap(), "{a} vs {b}");
    }
    assert_eq!(manifest(&files[0][2]).seeds["travel"], 7);
}

#[test]
fn plan_reproduces_the_small_case_mix() {
    let dir = tempfile::tempdir().unwrap();
    let mix = out(dir.path(), "mix.json");
    assert_eq!(distres(&["plan", "--forecast", &fx("cs1/forecast.json"), "--catalog", &fx("catalog.json"), "--out", &mix]), 0);
    let s: SizingSolution = read(&mix);
    assert_eq!(s.mix.count(MerKind::MDG, 2), 1);
    assert_eq!(s.mix.n_units(), 1);
    let m = manifest(&mix);
    for key in ["default_critical_fraction", "sizing", "bnb", "effective"] {
        assert!(m.parameters.contains_key(key), "{key}");
    }
    assert_eq!(m.parameters["effective"]["critical_fraction"].as_f64(), Some(0.6));
}

#[test]
fn hull_check_reports_every_line_and_storage_size() {
    let dir = tempfile::tempdir().unwrap();
    let report = out(dir.path(), "hull.json");
    let code = distres(&[
        "--seed", "3", "validate", "--check", "hull", "--feeder", &fx("ieee13/feeder.json"), "--catalog",
        &fx("catalog.json"), "--samples", "500", "--out", &report,
    ]);
    assert_eq!(code, 0);
    let r: HullSuiteReport = read(&report);
    let f = common::feeder("ieee13");
    assert_eq!(r.lines.len(), f.lines.len());
    let ess = f.ders.iter().filter(|d| d.kind == DerKind::ESS).count();
    assert_eq!(r.storage.len(), ess + 2);
    assert!(r.passed());
    assert_eq!(manifest(&report).seeds["sampling"], 3);
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bin = env!("CARGO_BIN_EXE_distres");
    let o = Command::new(bin).arg("frobnicate").output().unwrap();
    assert_eq!(o.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&o.stderr);
    assert!(stderr.contains("Usage"), "{stderr}");
    assert!(stderr.lines().last().unwrap().contains("\"exit_code\":1"));

    // Unreadable input.
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{").unwrap();
    let g = out(dir.path(), "g.json");
    let bad = bad.display().to_string();
    assert_eq!(distres(&["reduce", "--feeder", &bad, "--scenario", &fx("ieee13/scenario.json"), "--out", &g]), 1);

    // Unknown damaged line.
    let scen = dir.path().join("scen.json");
    let mut spec: serde_json::Value = read(&fx("ieee13/scenario.json"));
    spec["damaged"][0] = "nowhere".into();
    std::fs::write(&scen, spec.to_string()).unwrap();
    let scen = scen.display().to_string();
    assert_eq!(distres(&["reduce", "--feeder", &fx("ieee13/feeder.json"), "--scenario", &scen, "--out", &g]), 1);

    // Two buses of one island whose voltage bands do not overlap.
    let feeder = dir.path().join("feeder.json");
    let mut f: serde_json::Value = read(&fx("ieee13/feeder.json"));
    let buses = f["buses"].as_array_mut().unwrap();
    let i = buses.iter().position(|b| b["id"] == "633").unwrap();
    buses[i]["vmin"] = 0.8.into();
    buses[i]["vmax"] = 0.85.into();
    std::fs::write(&feeder, f.to_string()).unwrap();
    let feeder = feeder.display().to_string();
    assert_eq!(distres(&["reduce", "--feeder", &feeder, "--scenario", &fx("ieee13/scenario.json"), "--out", &g]), 2);

    assert_eq!(distres(&["--gap", "0", "gen-travel", "--n", "2", "--out", &g]), 1);
    assert_eq!(distres(&["--time-limit", "soon", "gen-travel", "--n", "2", "--out", &g]), 1);
}

#[test]
fn limits_return_the_incumbent() {
    let dir = tempfile::tempdir().unwrap();
    let graph = out(dir.path(), "graph.json");
    let mix = out(dir.path(), "mix.json");
    let plan: PathBuf = dir.path().join("plan.json");
    let scenario = fx("cs1/scenario.json");
    assert_eq!(distres(&["reduce", "--feeder", &fx("cs1/feeder.json"), "--scenario", &scenario, "--out", &graph]), 0);
    assert_eq!(distres(&["plan", "--forecast", &fx("cs1/forecast.json"), "--catalog", &fx("catalog.json"), "--out", &mix]), 0);
    let code = distres(&[
        "--node-limit", "2", "--time-limit", "5s", "restore", "--graph", &graph, "--mix", &mix, "--scenario", &scenario,
        "--out", &plan.display().to_string(),
    ]);
    assert_eq!(code, 3);
    let pf: PlanFile = read(&plan.display().to_string());
    assert!(pf.plan.gap > 1e-3);
}
