//! The `distres` command line.
//!
//! Exit codes: 0 success, 1 invalid input or usage, 2 infeasible, 3 limit
//! reached with an incumbent (outputs are still written), 4 internal failure.
//! Errors are reported on stderr as one JSON object per line.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use distres_core::netmodel::{gen_travel_matrix, DamageScenario, Line, PvProfile, ScenarioSpec, ShortageForecast};
use distres_core::oracle::{check_nonconvex_feasibility, FeasibilityReport};
use distres_core::postdisaster::{
    build_restoration_model, restoration_bnb_config, solve_restoration_with, verify_plan, InvariantReport, RestorationConfig,
    RestorationPlan, ScheduleSearch,
};
use distres_core::predisaster::{build_sizing_model, solve_sizing, MerMixDecision, SizingConfig};
use distres_core::solver::{BnBConfig, Clock, MipStatus};
use distres_core::supernode::{aggregate, detect_islands, justify_reduction, SuperNodeGraph, DEFAULT_DROP_THRESHOLD};
use distres_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::backend::ClarabelBackend;
use crate::io::{
    energy_csv, load_catalog, load_feeder, load_scenario, read_json, write_json, write_text,
    DEFAULT_CRITICAL_FRACTION,
};
use crate::manifest::RunManifest;
use crate::soundness::{hull_suite, DEFAULT_SAMPLES};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_LIMIT: i32 = 3;
pub const EXIT_INTERNAL: i32 = 4;

/// Seconds since construction.
#[derive(Debug, Clone, Copy)]
pub struct WallClock(pub Instant);

impl WallClock {
    pub fn start() -> Self {
        WallClock(Instant::now())
    }
}

impl Clock for WallClock {
    fn elapsed(&self) -> f64 {
        self.0.elapsed().as_secs_f64()
    }
}

#[derive(Debug, Parser)]
#[command(name = "distres", version, about = "Emergency resource sizing and restoration planning for distribution feeders")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Args)]
struct Global {
    /// Seed for travel matrices and soundness sampling.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Relative optimality gap.
    #[arg(long, global = true, default_value_t = 1e-3)]
    gap: f64,
    /// Wall-clock limit, e.g. `300`, `300s` or `5m`.
    #[arg(long, global = true, value_parser = parse_seconds)]
    time_limit: Option<f64>,
    #[arg(long, global = true, default_value_t = 1_000_000)]
    node_limit: usize,
    /// Write the subproblem of a node the backend fails on to this file.
    #[arg(long, global = true)]
    dump_node: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Size the mobile resource fleet from a shortage forecast.
    Plan {
        #[arg(long)]
        forecast: PathBuf,
        #[arg(long)]
        catalog: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Critical share applied when the forecast gives no critical series.
        #[arg(long, default_value_t = DEFAULT_CRITICAL_FRACTION)]
        critical_fraction: f64,
        /// PV profile as JSON; defaults to a half sine over daylight.
        #[arg(long)]
        pv_profile: Option<PathBuf>,
    },
    /// Contract the damaged feeder into a graph of islands.
    Reduce {
        #[arg(long)]
        feeder: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Voltage drop (p.u.) above which an island is flagged.
        #[arg(long, default_value_t = DEFAULT_DROP_THRESHOLD)]
        drop_threshold: f64,
    },
    /// Schedule crews and place mobile units over a reduced graph.
    Restore {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        mix: PathBuf,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        pv_profile: Option<PathBuf>,
    },
    /// Check a plan, or check the hull relaxations of a feeder.
    Validate {
        #[arg(long, required_unless_present = "check")]
        plan: Option<PathBuf>,
        #[arg(long, required_unless_present = "check")]
        graph: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_enum)]
        check: Option<Check>,
        /// Feeder whose lines and storage are sampled by `--check hull`.
        #[arg(long, required_if_eq("check", "hull"))]
        feeder: Option<PathBuf>,
        /// Catalog whose mobile storage sizes are sampled by `--check hull`.
        #[arg(long)]
        catalog: Option<PathBuf>,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
        /// Residual tolerance of the exact branch-flow and loss equations.
        #[arg(long, default_value_t = 1e-6)]
        tolerance: f64,
    },
    /// Per-period energy CSV of a plan.
    Report {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Seeded travel-time matrix between damaged lines.
    GenTravel {
        #[arg(long)]
        n: usize,
        /// Largest travel time in periods.
        #[arg(long, default_value_t = 5)]
        max: u32,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
enum Check {
    Hull,
}

/// Restoration plan as written by `restore`, carrying the inputs needed to
/// rebuild its model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanFile {
    #[serde(flatten)]
    pub plan: RestorationPlan,
    pub inputs: PlanInputs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanInputs {
    pub mix: MerMixDecision,
    pub scenario: DamageScenario,
    pub config: RestorationConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub invariants: InvariantReport,
    pub nonconvex: FeasibilityReport,
}

/// Accepts both the `plan` output and a bare mix.
#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum MixInput {
    Sized { mix: MerMixDecision },
    Bare(MerMixDecision),
}

impl MixInput {
    fn into_mix(self) -> MerMixDecision {
        match self {
            MixInput::Sized { mix } | MixInput::Bare(mix) => mix,
        }
    }
}

#[derive(Serialize)]
struct Diagnostic<'a> {
    level: &'a str,
    kind: &'a str,
    message: String,
    exit_code: i32,
}

fn emit(level: &str, kind: &str, message: String, exit_code: i32) {
    let d = Diagnostic {
        level,
        kind,
        message,
        exit_code,
    };
    eprintln!("{}", serde_json::to_string(&d).expect("diagnostic"));
}

fn parse_seconds(s: &str) -> std::result::Result<f64, String> {
    let t = s.trim();
    let (num, scale) = if let Some(v) = t.strip_suffix("ms") {
        (v, 1e-3)
    } else if let Some(v) = t.strip_suffix('s') {
        (v, 1.0)
    } else if let Some(v) = t.strip_suffix('m') {
        (v, 60.0)
    } else if let Some(v) = t.strip_suffix('h') {
        (v, 3600.0)
    } else {
        (t, 1.0)
    };
    match num.trim().parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v * scale),
        _ => Err(format!("`{s}` is not a positive duration")),
    }
}

fn error_kind(e: &Error) -> (&'static str, i32) {
    match e {
        Error::Parse(_) => ("parse", EXIT_INVALID),
        Error::Validation { .. } => ("validation", EXIT_INVALID),
        Error::UnknownLine(_) => ("unknown_line", EXIT_INVALID),
        Error::Dimension(_) => ("dimension", EXIT_INVALID),
        Error::MissingParameter { .. } => ("missing_parameter", EXIT_INVALID),
        Error::Model(_) => ("model", EXIT_INVALID),
        Error::TooLarge(_) => ("too_large", EXIT_INVALID),
        Error::InfeasibleBounds { .. } => ("infeasible", EXIT_INFEASIBLE),
        Error::Infeasible(_) => ("infeasible", EXIT_INFEASIBLE),
        Error::SolverFailure(_) => ("solver_failure", EXIT_INTERNAL),
        Error::NumericalFailure { .. } => ("numerical_failure", EXIT_INTERNAL),
    }
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    let _ = e.print();
                    EXIT_OK
                }
                _ => {
                    eprint!("{}", e.render());
                    emit("error", "usage", e.kind().to_string(), EXIT_INVALID);
                    EXIT_INVALID
                }
            };
        }
    };
    let g = &cli.global;
    if !(g.gap > 0.0) || g.threads == 0 {
        emit("error", "usage", "--gap must be positive and --threads at least 1".into(), EXIT_INVALID);
        return EXIT_INVALID;
    }
    match dispatch(&cli) {
        Ok(code) => code,
        Err(e) => {
            let (kind, code) = error_kind(&e);
            if let (Error::NumericalFailure { node: Some(p), .. }, Some(path)) = (&e, &g.dump_node) {
                if let Err(w) = write_json(path, p.as_ref()) {
                    emit("warning", "dump_node", w.to_string(), code);
                }
            }
            emit("error", kind, e.to_string(), code);
            code
        }
    }
}

fn bnb_config(g: &Global, base: BnBConfig) -> BnBConfig {
    BnBConfig {
        gap: g.gap,
        node_limit: g.node_limit,
        time_limit: g.time_limit,
        threads: g.threads,
        ..base
    }
}

fn global_params(m: &mut RunManifest, g: &Global) {
    m.param("seed", g.seed);
    m.param("threads", g.threads);
    m.param("dump_node", g.dump_node.as_ref().map(|p| p.display().to_string()));
}

fn pv_profile(path: Option<&Path>, m: &mut RunManifest) -> Result<PvProfile> {
    match path {
        Some(p) => {
            m.input("pv_profile", p)?;
            read_json(p)
        }
        None => Ok(PvProfile::default()),
    }
}

fn finish(mut m: RunManifest, out: &Path, clock: &WallClock, g: &Global) -> Result<()> {
    global_params(&mut m, g);
    m.output(out);
    m.wall_time_s = clock.elapsed();
    m.write_beside(out)?;
    Ok(())
}

fn status_code(status: MipStatus) -> i32 {
    match status {
        MipStatus::Feasible => {
            emit(
                "warning",
                "limit",
                "limit reached before the gap closed; the best plan found was written".into(),
                EXIT_LIMIT,
            );
            EXIT_LIMIT
        }
        _ => EXIT_OK,
    }
}

/// Resolves a scenario file against a reduced graph. Grid supply already sits
/// on the graph's nodes, so the file's grid entries are not re-read.
pub fn scenario_for_graph(spec: &ScenarioSpec, graph: &SuperNodeGraph) -> Result<DamageScenario> {
    let (mut feeder, _) = graph.to_feeder();
    for r in &graph.internal_repairs {
        let node = feeder.buses[r.node].id.clone();
        feeder.lines.push(Line {
            id: r.line.clone(),
            from_bus: node.clone(),
            to_bus: node,
            r: 0.0,
            x: 0.0,
            i2max: 0.0,
            smax: 0.0,
        });
    }
    let mut spec = spec.clone();
    spec.grid.clear();
    DamageScenario::from_spec(&spec, &feeder)
}

fn dispatch(cli: &Cli) -> Result<i32> {
    let g = &cli.global;
    let clock = WallClock::start();
    match &cli.command {
        Command::Plan {
            forecast,
            catalog,
            out,
            critical_fraction,
            pv_profile: pv,
        } => {
            let mut m = RunManifest::new("plan");
            m.input("forecast", forecast)?;
            m.input("catalog", catalog)?;
            let spec = read_json(forecast)?;
            let fc = ShortageForecast::from_spec(&spec, *critical_fraction)?;
            let cat = load_catalog(catalog)?;
            let config = SizingConfig {
                pv_profile: pv_profile(pv.as_deref(), &mut m)?,
                ..SizingConfig::default()
            };
            let bnb = bnb_config(g, BnBConfig::default());
            let model = build_sizing_model(&fc, &cat, &fc.horizon, &config)?;
            let backend = ClarabelBackend::new(g.threads);
            let sol = solve_sizing(&model, &bnb, &backend, &clock)?;
            m.param("default_critical_fraction", critical_fraction);
            m.param("sizing", &config);
            m.param("bnb", &bnb);
            m.param("effective", &sol.parameters);
            write_json(out, &sol)?;
            finish(m, out, &clock, g)?;
            Ok(status_code(sol.status))
        }
        Command::Reduce {
            feeder,
            scenario,
            out,
            drop_threshold,
        } => {
            let mut m = RunManifest::new("reduce");
            m.input("feeder", feeder)?;
            m.input("scenario", scenario)?;
            let f = load_feeder(feeder)?;
            let sc = load_scenario(scenario, &f)?;
            let islands = detect_islands(&f, &sc);
            let graph = aggregate(&f, &islands, &sc)?;
            let report = justify_reduction(&f, &islands, *drop_threshold);
            if report.any_flagged() {
                emit(
                    "warning",
                    "reduction",
                    format!("an island's internal voltage drop exceeds {drop_threshold} p.u."),
                    EXIT_OK,
                );
            }
            m.param("drop_threshold", drop_threshold);
            m.param("n_islands", islands.len());
            m.param("reduction_report", &report);
            write_json(out, &graph)?;
            finish(m, out, &clock, g)?;
            Ok(EXIT_OK)
        }
        Command::Restore {
            graph,
            mix,
            scenario,
            out,
            pv_profile: pv,
        } => {
            let mut m = RunManifest::new("restore");
            m.input("graph", graph)?;
            m.input("mix", mix)?;
            m.input("scenario", scenario)?;
            let gr: SuperNodeGraph = read_json(graph)?;
            let mx = read_json::<MixInput>(mix)?.into_mix();
            mx.check()?;
            let spec: ScenarioSpec = read_json(scenario)?;
            if let distres_core::netmodel::TravelSpec::Seeded { seed, .. } = &spec.travel {
                m.seed("travel", *seed);
            }
            let sc = scenario_for_graph(&spec, &gr)?;
            let config = RestorationConfig {
                pv_profile: pv_profile(pv.as_deref(), &mut m)?,
                ..RestorationConfig::default()
            };
            let model = build_restoration_model(&gr, &mx, &sc, &gr.horizon, &config)?;
            let bnb = bnb_config(g, restoration_bnb_config());
            let search = ScheduleSearch {
                time_budget: bnb.time_limit.map(|t| 0.3 * t),
                ..ScheduleSearch::default()
            };
            let backend = ClarabelBackend::new(g.threads);
            let plan = solve_restoration_with(&model, &bnb, &search, &backend, &clock)?;
            m.param("bnb", &bnb);
            m.param("schedule_search", search);
            m.param("restoration", &config);
            let code = status_code(plan.status);
            let file = PlanFile {
                plan,
                inputs: PlanInputs {
                    mix: mx,
                    scenario: sc,
                    config,
                },
            };
            write_json(out, &file)?;
            finish(m, out, &clock, g)?;
            Ok(code)
        }
        Command::Validate {
            plan,
            graph,
            out,
            check,
            feeder,
            catalog,
            samples,
            tolerance,
        } => {
            let mut m = RunManifest::new("validate");
            if *check == Some(Check::Hull) {
                let feeder = feeder.as_deref().expect("required by the parser");
                m.input("feeder", feeder)?;
                let f = load_feeder(feeder)?;
                let cat = match catalog {
                    Some(c) => {
                        m.input("catalog", c)?;
                        load_catalog(c)?
                    }
                    None => Vec::new(),
                };
                m.seed("sampling", g.seed);
                m.param("check", Check::Hull);
                m.param("samples", samples);
                let report = hull_suite(&f, &cat, *samples, g.seed)?;
                write_json(out, &report)?;
                finish(m, out, &clock, g)?;
                return Ok(if report.passed() { EXIT_OK } else { EXIT_INVALID });
            }
            let (plan, graph) = (plan.as_deref().expect("required"), graph.as_deref().expect("required"));
            m.input("plan", plan)?;
            m.input("graph", graph)?;
            let pf: PlanFile = read_json(plan)?;
            let gr: SuperNodeGraph = read_json(graph)?;
            let i = &pf.inputs;
            let model = build_restoration_model(&gr, &i.mix, &i.scenario, &gr.horizon, &i.config)?;
            let invariants = verify_plan(&pf.plan, &model);
            let nonconvex = check_nonconvex_feasibility(&pf.plan, &model, *tolerance)?;
            m.param("tolerance", tolerance);
            let ok = invariants.passed();
            if !ok {
                let names: Vec<_> = invariants.failures().map(|c| c.name.clone()).collect();
                emit("error", "invariant", format!("failed: {}", names.join(", ")), EXIT_INVALID);
            }
            write_json(out, &ValidationReport { invariants, nonconvex })?;
            finish(m, out, &clock, g)?;
            Ok(if ok { EXIT_OK } else { EXIT_INVALID })
        }
        Command::Report { plan, out } => {
            let mut m = RunManifest::new("report");
            m.input("plan", plan)?;
            let pf: PlanFile = read_json(plan)?;
            write_text(out, &energy_csv(&pf.plan.energy))?;
            finish(m, out, &clock, g)?;
            Ok(EXIT_OK)
        }
        Command::GenTravel { n, max, out } => {
            let mut m = RunManifest::new("gen-travel");
            m.seed("travel", g.seed);
            m.param("n", n);
            m.param("max", max);
            write_json(out, &gen_travel_matrix(*n, g.seed, *max))?;
            finish(m, out, &clock, g)?;
            Ok(EXIT_OK)
        }
    }
}
