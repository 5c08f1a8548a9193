//! Renewable-penetration sweeps over generation-expansion and V2G cases.

mod instances;

use std::time::Instant;

use serde::{Deserialize, Serialize};
use v2g_milp::{MilpOptions, MilpStatus};

pub use instances::{
    generate_miami_like_instance, generate_rts_like_instance, InstanceKnobs, MIAMI_POPULATION, MIAMI_TOTAL_CAPACITY,
    MIAMI_TOTAL_LOAD, RTS_POPULATION, RTS_TOTAL_CAPACITY, RTS_TOTAL_LOAD,
};

use crate::formulation::{ModelConfig, SitingSolution};
use crate::model::Instance;
use crate::scenario::{assign_renewables, sample_scenario_set, SamplingOptions, ScenarioSet};
use crate::solve::{solve_extensive_form, SolveOutcome};
use crate::Error;

/// How one case configures the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CaseKind {
    /// Unmet-demand penalties zeroed; shedding penalties scaled; optional station budget.
    Ge { shed_multiplier: f64, budget: Option<usize> },
    /// Siting fixed to the transport-only optimum.
    V2gFixed,
    /// Free siting with at most `budget` stations (unlimited when absent).
    V2gBudget { budget: Option<usize> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Case {
    pub name: String,
    #[serde(flatten)]
    pub kind: CaseKind,
}

/// Cases, penetration levels, scenario count and replication seeds of a sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentPlan {
    pub cases: Vec<Case>,
    pub levels: Vec<f64>,
    pub scenarios: usize,
    pub seeds: Vec<u64>,
    pub gap: f64,
    pub node_limit: u64,
    pub iteration_limit: u64,
    pub sampling: SamplingOptions,
}

/// The eleven levels 0.0, 0.1, ..., 1.0.
pub fn default_levels() -> Vec<f64> {
    (0..=10).map(|k| k as f64 / 10.0).collect()
}

impl Default for ExperimentPlan {
    fn default() -> Self {
        ExperimentPlan {
            cases: Vec::new(),
            levels: default_levels(),
            scenarios: 100,
            seeds: vec![1],
            gap: 0.01,
            node_limit: 100_000,
            iteration_limit: 1_000_000,
            sampling: SamplingOptions::default(),
        }
    }
}

impl ExperimentPlan {
    /// GE-1..5 and V2G-1..5 with the given V2G budgets and GE shedding multipliers.
    pub fn standard(budgets: [usize; 4], shed_multipliers: [f64; 4]) -> Self {
        let mut cases = vec![Case { name: "GE-1".into(), kind: CaseKind::Ge { shed_multiplier: 1.0, budget: Some(0) } }];
        for (k, m) in shed_multipliers.into_iter().enumerate() {
            cases.push(Case { name: format!("GE-{}", k + 2), kind: CaseKind::Ge { shed_multiplier: m, budget: None } });
        }
        cases.push(Case { name: "V2G-1".into(), kind: CaseKind::V2gFixed });
        for (k, b) in budgets.into_iter().enumerate() {
            cases.push(Case { name: format!("V2G-{}", k + 2), kind: CaseKind::V2gBudget { budget: Some(b) } });
        }
        ExperimentPlan { cases, ..ExperimentPlan::default() }
    }

    /// The synthetic-city protocol: budgets 6, 8, 10, 12 and shedding multipliers 2, 5, 10, 20.
    pub fn rts() -> Self {
        Self::standard([6, 8, 10, 12], [2.0, 5.0, 10.0, 20.0])
    }

    pub fn validate(&self) -> Result<(), Error> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.scenarios == 0 {
            return bad("plan needs at least one scenario".into());
        }
        if self.seeds.is_empty() {
            return bad("plan needs at least one seed".into());
        }
        for &l in &self.levels {
            let on_grid = (l * 10.0 - (l * 10.0).round()).abs() < 1e-9;
            if !(0.0..=1.0).contains(&l) || !on_grid {
                return bad(format!("level {l} is not one of 0.0, 0.1, ..., 1.0"));
            }
        }
        for c in &self.cases {
            match c.kind {
                CaseKind::Ge { shed_multiplier, .. } if !(shed_multiplier.is_finite() && shed_multiplier > 0.0) => {
                    return bad(format!("case {}: shed multiplier must be positive", c.name));
                }
                CaseKind::V2gBudget { budget: Some(0) } => {
                    return bad(format!("case {}: V2G budgets must be positive", c.name));
                }
                _ => {}
            }
        }
        self.sampling.validate()
    }

    pub fn milp_options(&self) -> MilpOptions {
        MilpOptions {
            gap_target: self.gap,
            node_limit: self.node_limit,
            iteration_limit: self.iteration_limit,
            ..MilpOptions::default()
        }
    }

    /// Every `(case, level, seed)` cell in a stable order.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        for case in 0..self.cases.len() {
            for &seed in &self.seeds {
                for &level in &self.levels {
                    out.push(Cell { case, level, seed });
                }
            }
        }
        out
    }
}

/// Coordinates of one sweep job.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    /// Index into [`ExperimentPlan::cases`].
    pub case: usize,
    pub level: f64,
    pub seed: u64,
}

/// Performance measures of a solved cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub load_shed_fraction: f64,
    pub unmet_battery_fraction: f64,
    pub opened_stations: usize,
    pub objective: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        (num / den).clamp(0.0, 1.0)
    } else {
        0.0
    }
}

/// Probability-weighted shed and unmet fractions, and the opened-station count.
pub fn compute_metrics(sol: &SitingSolution, set: &ScenarioSet, objective: f64) -> Metrics {
    let (mut shed, mut load, mut unmet, mut demand) = (0.0, 0.0, 0.0, 0.0);
    for (scen, r) in set.scenarios.iter().zip(&sol.scenarios) {
        let p = scen.probability;
        shed += p * r.delta.iter().sum::<f64>();
        load += p * scen.bus_loads.iter().sum::<f64>();
        unmet += p * r.q.iter().sum::<f64>();
        demand += p * scen.route_demands.iter().map(|&d| d as f64).sum::<f64>();
    }
    Metrics {
        load_shed_fraction: ratio(shed, load),
        unmet_battery_fraction: ratio(unmet, demand),
        opened_stations: sol.opened(),
        objective,
    }
}

/// Transport-only optimal siting: grid removed, all demands served where worthwhile.
pub fn find_transport_optimal_siting(
    inst: &Instance,
    set: &ScenarioSet,
    opts: &MilpOptions,
) -> Result<(Vec<f64>, usize), Error> {
    let cfg = ModelConfig { include_grid: false, ..ModelConfig::default() };
    let out = solve_extensive_form(inst, set, &cfg, opts)?;
    let sol = out
        .solution
        .ok_or_else(|| Error::InvalidInput(format!("transport-only model ended with {:?} and no solution", out.status)))?;
    let x: Vec<f64> = sol.x.iter().map(|v| v.round()).collect();
    let opened = x.iter().filter(|&&v| v == 1.0).count();
    Ok((x, opened))
}

/// Scenario set used by every case at a given `(level, seed)`.
pub fn cell_scenarios(inst: &Instance, plan: &ExperimentPlan, level: f64, seed: u64) -> Result<ScenarioSet, Error> {
    let assignment = assign_renewables(&inst.generators, level, seed)?;
    sample_scenario_set(inst, &assignment, plan.scenarios, seed, &plan.sampling)
}

/// Model configuration and (possibly modified) instance of a case.
pub fn case_setup(inst: &Instance, kind: &CaseKind, fixed: Option<&[f64]>) -> Result<(Instance, ModelConfig), Error> {
    let mut inst = inst.clone();
    let cfg = match *kind {
        CaseKind::Ge { shed_multiplier, budget } => {
            for b in &mut inst.buses {
                b.shed_penalty *= shed_multiplier;
            }
            ModelConfig { ge_mode: true, station_budget: budget, ..ModelConfig::default() }
        }
        CaseKind::V2gFixed => {
            let x = fixed.ok_or_else(|| Error::InvalidInput("fixed-siting case needs a transport-optimal siting".into()))?;
            ModelConfig { fixed_siting: Some(x.to_vec()), ..ModelConfig::default() }
        }
        CaseKind::V2gBudget { budget } => ModelConfig { station_budget: budget, ..ModelConfig::default() },
    };
    Ok((inst, cfg))
}

/// Outcome of one sweep cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub case: String,
    pub level: f64,
    pub seed: u64,
    pub status: Option<MilpStatus>,
    pub metrics: Option<Metrics>,
    pub gap: Option<f64>,
    pub nodes: u64,
    pub wall_ms: u64,
    pub error: Option<String>,
}

/// Solves one cell. `fixed` is the transport-optimal siting for the cell's seed,
/// needed only by [`CaseKind::V2gFixed`]. Failures are captured in the result.
pub fn run_cell(inst: &Instance, plan: &ExperimentPlan, cell: Cell, fixed: Option<&[f64]>) -> CellResult {
    let start = Instant::now();
    let case = &plan.cases[cell.case];
    let attempt = || -> Result<(SolveOutcome, ScenarioSet), Error> {
        let set = cell_scenarios(inst, plan, cell.level, cell.seed)?;
        let (inst, cfg) = case_setup(inst, &case.kind, fixed)?;
        let out = solve_extensive_form(&inst, &set, &cfg, &plan.milp_options())?;
        Ok((out, set))
    };
    let mut res = CellResult {
        case: case.name.clone(),
        level: cell.level,
        seed: cell.seed,
        status: None,
        metrics: None,
        gap: None,
        nodes: 0,
        wall_ms: 0,
        error: None,
    };
    match attempt() {
        Ok((out, set)) => {
            res.status = Some(out.status);
            res.gap = out.gap;
            res.nodes = out.nodes;
            match (&out.solution, out.objective) {
                (Some(sol), Some(obj)) => res.metrics = Some(compute_metrics(sol, &set, obj)),
                _ => res.error = Some(format!("no solution ({:?})", out.status)),
            }
        }
        Err(e) => res.error = Some(e.to_string()),
    }
    res.wall_ms = start.elapsed().as_millis() as u64;
    res
}

/// Results of a whole sweep in [`ExperimentPlan::cells`] order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub cells: Vec<CellResult>,
}

pub const CSV_HEADER: &str = "case,level,seed,load_shed_frac,unmet_frac,opened,objective,gap,nodes,wall_ms";

impl SweepResult {
    /// CSV with one row per cell; metric fields are empty for failed cells.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for c in &self.cells {
            let (shed, unmet, opened, obj) = match &c.metrics {
                Some(m) => (
                    m.load_shed_fraction.to_string(),
                    m.unmet_battery_fraction.to_string(),
                    m.opened_stations.to_string(),
                    m.objective.to_string(),
                ),
                None => Default::default(),
            };
            let gap = c.gap.map(|g| g.to_string()).unwrap_or_default();
            out.push_str(&format!(
                "{},{:.1},{},{shed},{unmet},{opened},{obj},{gap},{},{}\n",
                c.case, c.level, c.seed, c.nodes, c.wall_ms
            ));
        }
        out
    }
}

/// Transport-optimal siting for each plan seed (only computed if a fixed case exists).
pub fn transport_optimal_by_seed(inst: &Instance, plan: &ExperimentPlan) -> Result<Vec<(u64, Vec<f64>)>, Error> {
    if !plan.cases.iter().any(|c| c.kind == CaseKind::V2gFixed) {
        return Ok(Vec::new());
    }
    plan.seeds
        .iter()
        .map(|&seed| {
            // Route demands do not depend on the penetration level, so level 0 suffices.
            let set = cell_scenarios(inst, plan, 0.0, seed)?;
            let (x, _) = find_transport_optimal_siting(inst, &set, &plan.milp_options())?;
            Ok((seed, x))
        })
        .collect()
}

/// Runs every cell of `plan` sequentially.
pub fn run_penetration_sweep(inst: &Instance, plan: &ExperimentPlan) -> Result<SweepResult, Error> {
    plan.validate()?;
    let fixed = transport_optimal_by_seed(inst, plan)?;
    let cells = plan
        .cells()
        .into_iter()
        .map(|cell| {
            let x = fixed.iter().find(|(s, _)| *s == cell.seed).map(|(_, x)| x.as_slice());
            run_cell(inst, plan, cell, x)
        })
        .collect();
    Ok(SweepResult { cells })
}
