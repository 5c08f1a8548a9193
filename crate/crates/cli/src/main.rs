//! `v2g`: generate instances and scenarios, solve the siting model, run
//! penetration sweeps and turn them into plot-ready tables.
//!
//! Exit status: 0 on success, 1 when a solver stops at a limit without reaching
//! the gap target (or an external solution fails verification), 2 on any input
//! or I/O error.

mod io;
mod report;

use std::collections::HashMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use v2g_core::experiments::{
    compute_metrics, generate_miami_like_instance, generate_rts_like_instance, run_cell, transport_optimal_by_seed,
    ExperimentPlan, InstanceKnobs, Metrics, SweepResult, CSV_HEADER,
};
use v2g_core::formulation::FeasibilityViolation;
use v2g_core::{
    assign_renewables, build_extensive_form, check_solution_feasibility, sample_scenario_set, solve_model,
    validate_instance, Instance, MilpModel, ModelConfig, SamplingOptions, ScenarioSet, SitingSolution,
};
use v2g_milp::mps::{write_mps, NameTable};
use v2g_milp::{MilpOptions, MilpStatus};

use crate::io::{default_output, read_json, write_atomic, write_json, RunManifest};

const AFTER_HELP: &str = "\
Outputs default to $V2G_OUT_DIR (or the current directory) when --out is omitted.
Every artifact gets a sibling <artifact>.manifest.json recording the command line,
resolved configuration, seeds and wall-clock time.
Exit status: 0 success, 1 solver limit or failed verification, 2 input or I/O error.";

#[derive(Parser)]
#[command(name = "v2g", version, about = "Two-stage stochastic siting of battery-exchange stations", after_help = AFTER_HELP)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic case-study instance as JSON.
    GenInstance(GenInstance),
    /// Sample a scenario set for one renewable penetration level.
    GenScenarios(GenScenarios),
    /// Solve the extensive form (or verify an external solution).
    Solve(Solve),
    /// Run every (case, level, seed) cell of an experiment plan.
    Sweep(Sweep),
    /// Write the extensive form as fixed-format MPS plus a name table.
    ExportMps(ExportMps),
    /// Aggregate a sweep directory into summary and per-figure CSV tables.
    Report(Report),
}

#[derive(Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum City {
    /// RTS-79-based city: 25 buses, 38 lines, 28 candidates, 10 routes.
    Rts,
    /// Miami-like surrogate: 200 buses, 275 lines, 316 candidates, 100 routes.
    Miami,
}

/// Overrides for the unpublished cost and sizing parameters.
#[derive(Args)]
struct KnobArgs {
    /// JSON file with any subset of the knobs below; flags override it.
    #[arg(long)]
    knobs: Option<PathBuf>,
    /// MW delivered per discharged battery [default: 0.01].
    #[arg(long)]
    battery_power: Option<f64>,
    /// Fixed cost of opening a station [default: 2000].
    #[arg(long)]
    fixed_cost: Option<f64>,
    /// Cost per stocked battery [default: 2].
    #[arg(long)]
    per_battery_cost: Option<f64>,
    /// Minimum stock of an open station [default: 0].
    #[arg(long)]
    min_batteries: Option<f64>,
    /// Station capacity as a fraction of the expected city-wide demand [default: 0.25].
    #[arg(long)]
    max_batteries_fraction: Option<f64>,
    /// Penalty per unserved battery request [default: 50].
    #[arg(long)]
    unmet_penalty: Option<f64>,
    /// Penalty per MW of shed load [default: 1000].
    #[arg(long)]
    shed_penalty: Option<f64>,
    /// Cost per unit of detour distance [default: 1].
    #[arg(long)]
    detour_unit_cost: Option<f64>,
    /// Allow the large nuclear-type RTS units to become renewable [default: false].
    #[arg(long)]
    nuclear_eligible: bool,
    /// Count requests as population x vehicle ratio x PHEV ratio, without the 10% exchange fraction [default: false].
    #[arg(long)]
    omit_exchange_fraction: bool,
}

impl KnobArgs {
    fn resolve(&self) -> Result<InstanceKnobs> {
        let mut k: InstanceKnobs = match &self.knobs {
            Some(p) => read_json(p)?,
            None => InstanceKnobs::default(),
        };
        let set = |dst: &mut f64, v: Option<f64>| {
            if let Some(v) = v {
                *dst = v;
            }
        };
        set(&mut k.battery_power, self.battery_power);
        set(&mut k.fixed_cost, self.fixed_cost);
        set(&mut k.per_battery_cost, self.per_battery_cost);
        set(&mut k.min_batteries, self.min_batteries);
        set(&mut k.max_batteries_fraction, self.max_batteries_fraction);
        set(&mut k.unmet_penalty, self.unmet_penalty);
        set(&mut k.shed_penalty, self.shed_penalty);
        set(&mut k.detour_unit_cost, self.detour_unit_cost);
        k.nuclear_eligible |= self.nuclear_eligible;
        k.omit_exchange_fraction |= self.omit_exchange_fraction;
        Ok(k)
    }
}

#[derive(Args)]
struct GenInstance {
    #[arg(value_enum)]
    city: City,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Output file [default: $V2G_OUT_DIR/instance.json].
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    knobs: KnobArgs,
}

#[derive(Args)]
struct GenScenarios {
    #[arg(long)]
    instance: PathBuf,
    /// Probability that each eligible generator is renewable.
    #[arg(long)]
    penetration: f64,
    /// Number of scenarios.
    #[arg(long, default_value_t = 100)]
    n: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    /// Probabilities of renewable capacity factors 0, 0.5 and 1.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0])]
    capacity_factor_probs: Vec<f64>,
    /// Multiply generation costs by independent U[0.9, 1.1] factors.
    #[arg(long)]
    cost_jitter: bool,
    /// Output file [default: $V2G_OUT_DIR/scenarios.json].
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Model variant flags shared by `solve` and `export-mps`.
#[derive(Args, Serialize)]
struct ModelArgs {
    #[arg(long)]
    instance: PathBuf,
    #[arg(long)]
    scenarios: PathBuf,
    /// Open at most K stations.
    #[arg(long, conflicts_with = "fixed_siting")]
    budget: Option<usize>,
    /// JSON array of 0/1 open flags to pin the siting to.
    #[arg(long)]
    fixed_siting: Option<PathBuf>,
    /// Generation-expansion mode: unmet battery demand is free.
    #[arg(long)]
    ge: bool,
    /// Multiply every bus shedding penalty by this factor.
    #[arg(long, default_value_t = 1.0)]
    shed_multiplier: f64,
    /// Bus whose angle is fixed to zero in its island [default: lowest-id generator bus].
    #[arg(long)]
    reference_bus: Option<usize>,
    /// Declare battery stocks integer as well as the siting.
    #[arg(long)]
    integer_stock: bool,
}

struct Loaded {
    inst: Instance,
    set: ScenarioSet,
    cfg: ModelConfig,
}

impl ModelArgs {
    fn load(&self) -> Result<Loaded> {
        let mut inst: Instance = read_json(&self.instance)?;
        let report = validate_instance(&inst);
        if !report.is_valid() {
            bail!("invalid instance {}:\n{report}", self.instance.display());
        }
        if !(self.shed_multiplier.is_finite() && self.shed_multiplier > 0.0) {
            bail!("--shed-multiplier must be positive");
        }
        for b in &mut inst.buses {
            b.shed_penalty *= self.shed_multiplier;
        }
        let set: ScenarioSet = read_json(&self.scenarios)?;
        let fixed_siting = self.fixed_siting.as_deref().map(read_json::<Vec<f64>>).transpose()?;
        let cfg = ModelConfig {
            ge_mode: self.ge,
            station_budget: self.budget,
            fixed_siting,
            reference_bus: self.reference_bus,
            integer_stock: self.integer_stock,
            ..ModelConfig::default()
        };
        Ok(Loaded { inst, set, cfg })
    }

    fn build(&self) -> Result<(Loaded, MilpModel)> {
        let loaded = self.load()?;
        let model = build_extensive_form(&loaded.inst, &loaded.set, &loaded.cfg)?;
        Ok((loaded, model))
    }
}

#[derive(Clone, Copy, ValueEnum, Serialize, PartialEq)]
#[serde(rename_all = "lowercase")]
enum SolverKind {
    /// Built-in simplex and branch-and-bound (sequential, fully deterministic).
    Internal,
    /// Verify a solution produced elsewhere from an exported MPS file.
    External,
}

#[derive(Args)]
struct Solve {
    #[command(flatten)]
    model: ModelArgs,
    /// Relative optimality gap target.
    #[arg(long, default_value_t = 0.01)]
    gap: f64,
    #[arg(long, default_value_t = 100_000)]
    node_limit: u64,
    /// Simplex iterations allowed across the whole search.
    #[arg(long, default_value_t = 1_000_000)]
    iteration_limit: u64,
    #[arg(long, value_enum, default_value_t = SolverKind::Internal)]
    solver: SolverKind,
    /// `column_name value` lines from an external solver (MPS or descriptive names).
    #[arg(long, required_if_eq("solver", "external"))]
    solution_file: Option<PathBuf>,
    /// Output file [default: $V2G_OUT_DIR/solution.json].
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Sweep {
    #[arg(long)]
    instance: PathBuf,
    /// Experiment plan JSON (cases, levels, scenarios, seeds, gap, limits, sampling).
    #[arg(long)]
    plan: PathBuf,
    /// Output directory [default: $V2G_OUT_DIR/sweep].
    #[arg(long)]
    out_dir: Option<PathBuf>,
    /// Cells solved concurrently; results are identical to a sequential run.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct ExportMps {
    #[command(flatten)]
    model: ModelArgs,
    /// Output file [default: $V2G_OUT_DIR/model.mps]; the name table goes to <out>.names.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct Report {
    /// Sweep output directory (reads plan.json and cells.json).
    #[arg(long)]
    sweep: PathBuf,
    /// Summary CSV; figure tables are written next to it as <stem>.<group>_<metric>.csv.
    #[arg(long)]
    out: PathBuf,
}

/// A failure with its exit status.
enum Failure {
    Limit(String),
    Input(anyhow::Error),
}

impl<E: Into<anyhow::Error>> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Input(e.into())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.command {
        Command::GenInstance(a) => gen_instance(a),
        Command::GenScenarios(a) => gen_scenarios(a),
        Command::Solve(a) => solve(a),
        Command::Sweep(a) => sweep(a),
        Command::ExportMps(a) => export_mps(a),
        Command::Report(a) => report(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Limit(msg)) => {
            eprintln!("{msg}");
            ExitCode::from(1)
        }
        Err(Failure::Input(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn gen_instance(a: GenInstance) -> Result<(), Failure> {
    let start = Instant::now();
    let knobs = a.knobs.resolve()?;
    let inst = match a.city {
        City::Rts => generate_rts_like_instance(a.seed, &knobs),
        City::Miami => generate_miami_like_instance(a.seed, &knobs),
    };
    let out = a.out.unwrap_or_else(|| default_output("instance.json"));
    write_json(&out, &inst)?;
    #[derive(Serialize)]
    struct Config<'a> {
        city: City,
        knobs: &'a InstanceKnobs,
    }
    RunManifest::new(Config { city: a.city, knobs: &knobs }, vec![a.seed], vec![out.clone()], start)?
        .write_beside(&out)?;
    println!("wrote {}", out.display());
    Ok(())
}

fn gen_scenarios(a: GenScenarios) -> Result<(), Failure> {
    let start = Instant::now();
    let inst: Instance = read_json(&a.instance)?;
    let report = validate_instance(&inst);
    if !report.is_valid() {
        return Err(anyhow!("invalid instance {}:\n{report}", a.instance.display()).into());
    }
    let probs: [f64; 3] = a.capacity_factor_probs.as_slice().try_into().context("need three capacity factor probabilities")?;
    let sampling = SamplingOptions { capacity_factor_probs: probs, cost_jitter: a.cost_jitter };
    let assignment = assign_renewables(&inst.generators, a.penetration, a.seed)?;
    let set = sample_scenario_set(&inst, &assignment, a.n, a.seed, &sampling)?;
    let out = a.out.unwrap_or_else(|| default_output("scenarios.json"));
    write_json(&out, &set)?;
    #[derive(Serialize)]
    struct Config<'a> {
        instance: &'a Path,
        penetration: f64,
        n: usize,
        sampling: SamplingOptions,
    }
    let cfg = Config { instance: &a.instance, penetration: a.penetration, n: a.n, sampling };
    RunManifest::new(cfg, vec![a.seed], vec![out.clone()], start)?.write_beside(&out)?;
    println!("wrote {} ({} scenarios)", out.display(), set.scenarios.len());
    Ok(())
}

/// Solution artifact of `solve`.
#[derive(Serialize)]
struct SolveReport {
    solver: SolverKind,
    status: Option<MilpStatus>,
    objective: Option<f64>,
    bound: Option<f64>,
    gap: Option<f64>,
    nodes: u64,
    lp_iterations: u64,
    metrics: Option<Metrics>,
    violations: Vec<FeasibilityViolation>,
    config: ModelConfig,
    solution: Option<SitingSolution>,
}

fn solve(a: Solve) -> Result<(), Failure> {
    let start = Instant::now();
    if !(a.gap.is_finite() && a.gap >= 0.0) {
        return Err(anyhow!("--gap must be a nonnegative number").into());
    }
    let (Loaded { inst, set, cfg }, model) = a.model.build()?;
    let report = match a.solver {
        SolverKind::Internal => {
            let opts = MilpOptions {
                gap_target: a.gap,
                node_limit: a.node_limit,
                iteration_limit: a.iteration_limit,
                ..MilpOptions::default()
            };
            let out = solve_model(&model, &opts)?;
            let metrics = out.solution.as_ref().zip(out.objective).map(|(s, o)| compute_metrics(s, &set, o));
            let violations = out
                .solution
                .as_ref()
                .map(|s| check_solution_feasibility(&inst, &set, &cfg, s, 1e-6))
                .unwrap_or_default();
            SolveReport {
                solver: a.solver,
                status: Some(out.status),
                objective: out.objective,
                bound: Some(out.bound),
                gap: out.gap,
                nodes: out.nodes,
                lp_iterations: out.lp_iterations,
                metrics,
                violations,
                config: cfg,
                solution: out.solution,
            }
        }
        SolverKind::External => {
            let path = a.solution_file.as_deref().context("--solution-file is required with --solver external")?;
            let cols = read_external_solution(path, &model)?;
            let sol = SitingSolution::from_columns(&model.registry, &cols);
            let objective = model.problem.lp.objective_value(&cols);
            let violations = check_solution_feasibility(&inst, &set, &cfg, &sol, 1e-6);
            SolveReport {
                solver: a.solver,
                status: None,
                objective: Some(objective),
                bound: None,
                gap: None,
                nodes: 0,
                lp_iterations: 0,
                metrics: Some(compute_metrics(&sol, &set, objective)),
                violations,
                config: cfg,
                solution: Some(sol),
            }
        }
    };
    let out = a.out.unwrap_or_else(|| default_output("solution.json"));
    write_json(&out, &report)?;
    #[derive(Serialize)]
    struct Config<'a> {
        model: &'a ModelArgs,
        gap: f64,
        node_limit: u64,
        iteration_limit: u64,
        solver: SolverKind,
        solution_file: &'a Option<PathBuf>,
    }
    let cfg = Config {
        model: &a.model,
        gap: a.gap,
        node_limit: a.node_limit,
        iteration_limit: a.iteration_limit,
        solver: a.solver,
        solution_file: &a.solution_file,
    };
    RunManifest::new(cfg, vec![set.seed], vec![out.clone()], start)?.write_beside(&out)?;

    let gap = report.gap.map_or("n/a".to_string(), |g| format!("{g:.6}"));
    let objective = report.objective.map_or("n/a".to_string(), |o| format!("{o:.6}"));
    if !report.violations.is_empty() {
        return Err(Failure::Limit(format!(
            "solution violates {} constraints (first: {} by {:e}); wrote {}",
            report.violations.len(),
            report.violations[0].location,
            report.violations[0].amount,
            out.display()
        )));
    }
    match report.status {
        Some(MilpStatus::GapReached) | None => {
            println!("objective {objective} gap {gap}; wrote {}", out.display());
            Ok(())
        }
        Some(status) => Err(Failure::Limit(format!(
            "stopped with {status:?}: objective {objective}, achieved gap {gap}; wrote {}",
            out.display()
        ))),
    }
}

/// Parses `name value` lines; unnamed columns are zero.
fn read_external_solution(path: &Path, model: &MilpModel) -> Result<Vec<f64>> {
    let names = NameTable::new(&model.registry.column_names(), &model.row_names());
    let lookup: HashMap<&str, usize> = names.column_lookup();
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut cols = vec![0.0; model.problem.lp.num_cols()];
    for (k, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.split_whitespace();
        let (Some(name), Some(value), None) = (parts.next(), parts.next(), parts.next()) else {
            bail!("{}:{}: expected `column_name value`", path.display(), k + 1);
        };
        let &j = lookup.get(name).with_context(|| format!("{}:{}: unknown column `{name}`", path.display(), k + 1))?;
        cols[j] = value.parse().with_context(|| format!("{}:{}: bad value `{value}`", path.display(), k + 1))?;
    }
    Ok(cols)
}

fn sweep(a: Sweep) -> Result<(), Failure> {
    let start = Instant::now();
    if a.jobs == 0 {
        return Err(anyhow!("--jobs must be at least 1").into());
    }
    let inst: Instance = read_json(&a.instance)?;
    let report = validate_instance(&inst);
    if !report.is_valid() {
        return Err(anyhow!("invalid instance {}:\n{report}", a.instance.display()).into());
    }
    let plan: ExperimentPlan = read_json(&a.plan)?;
    plan.validate()?;
    let dir = a.out_dir.unwrap_or_else(|| default_output("sweep"));
    fs::create_dir_all(&dir).with_context(|| format!("cannot create {}", dir.display()))?;

    let pool = rayon::ThreadPoolBuilder::new().num_threads(a.jobs).build()?;
    let cells = plan.cells();
    let result = pool.install(|| -> Result<SweepResult> {
        let fixed = transport_optimal_by_seed(&inst, &plan)?;
        let cells = cells
            .par_iter()
            .map(|&cell| {
                let x = fixed.iter().find(|(s, _)| *s == cell.seed).map(|(_, x)| x.as_slice());
                let res = run_cell(&inst, &plan, cell, x);
                eprintln!(
                    "{} level {:.1} seed {}: {}",
                    res.case,
                    res.level,
                    res.seed,
                    res.error.as_deref().unwrap_or(&format!("{:?} in {} ms", res.status, res.wall_ms))
                );
                res
            })
            .collect();
        Ok(SweepResult { cells })
    })?;

    let csv_path = dir.join("sweep.csv");
    let cells_path = dir.join("cells.json");
    let plan_path = dir.join("plan.json");
    write_atomic(&csv_path, result.to_csv().as_bytes())?;
    write_json(&cells_path, &result)?;
    write_json(&plan_path, &plan)?;
    let manifest = RunManifest::new(&plan, plan.seeds.clone(), vec![csv_path.clone(), cells_path, plan_path], start)?;
    write_json(&dir.join("manifest.json"), &manifest)?;

    let unfinished = result.cells.iter().filter(|c| c.status != Some(MilpStatus::GapReached)).count();
    println!("wrote {} ({} cells, header {CSV_HEADER})", csv_path.display(), result.cells.len());
    if unfinished > 0 {
        return Err(Failure::Limit(format!("{unfinished} cells did not reach the gap target")));
    }
    Ok(())
}

fn export_mps(a: ExportMps) -> Result<(), Failure> {
    let start = Instant::now();
    let (_, model) = a.model.build()?;
    let out = a.out.unwrap_or_else(|| default_output("model.mps"));
    let mut bytes = Vec::new();
    write_mps(&model.problem, "V2G", &mut bytes)?;
    write_atomic(&out, &bytes)?;
    let mut names_path = out.as_os_str().to_owned();
    names_path.push(".names");
    let names_path = PathBuf::from(names_path);
    let mut table = Vec::new();
    NameTable::new(&model.registry.column_names(), &model.row_names()).write(&mut table)?;
    write_atomic(&names_path, &table)?;
    RunManifest::new(&a.model, vec![], vec![out.clone(), names_path.clone()], start)?.write_beside(&out)?;
    println!(
        "wrote {} ({} columns, {} rows) and {}",
        out.display(),
        model.problem.lp.num_cols(),
        model.problem.lp.num_rows(),
        names_path.display()
    );
    Ok(())
}

fn report(a: Report) -> Result<(), Failure> {
    let plan: ExperimentPlan = read_json(&a.sweep.join("plan.json"))?;
    let sweep: SweepResult = read_json(&a.sweep.join("cells.json"))?;
    let rep = report::build(&plan, &sweep);
    write_atomic(&a.out, rep.summary.as_bytes())?;
    let stem = a.out.file_stem().and_then(|s| s.to_str()).unwrap_or("report").to_string();
    let dir = a.out.parent().map(Path::to_path_buf).unwrap_or_default();
    for (name, csv) in &rep.figures {
        write_atomic(&dir.join(format!("{stem}.{name}.csv")), csv.as_bytes())?;
    }
    println!("wrote {} and {} figure tables", a.out.display(), rep.figures.len());
    Ok(())
}
