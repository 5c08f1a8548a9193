//! Solving assembled models and reading back structured solutions.

use serde::{Deserialize, Serialize};
use v2g_milp::{solve_milp, MilpOptions, MilpStatus};

use crate::formulation::{build_extensive_form, MilpModel, ModelConfig, SitingSolution};
use crate::model::Instance;
use crate::scenario::ScenarioSet;
use crate::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    pub status: MilpStatus,
    pub objective: Option<f64>,
    pub bound: f64,
    pub gap: Option<f64>,
    pub nodes: u64,
    pub lp_iterations: u64,
    pub solution: Option<SitingSolution>,
}

impl SolveOutcome {
    /// True when the gap target was met.
    pub fn reached_gap(&self) -> bool {
        self.status == MilpStatus::GapReached
    }
}

pub fn solve_model(model: &MilpModel, opts: &MilpOptions) -> Result<SolveOutcome, Error> {
    let sol = solve_milp(&model.problem, opts)?;
    let solution = sol.x.as_ref().map(|x| SitingSolution::from_columns(&model.registry, x));
    Ok(SolveOutcome {
        status: sol.status,
        objective: sol.objective,
        bound: sol.bound,
        gap: sol.gap,
        nodes: sol.nodes,
        lp_iterations: sol.lp_iterations,
        solution,
    })
}

/// Builds and solves the extensive form in one call.
pub fn solve_extensive_form(
    inst: &Instance,
    set: &ScenarioSet,
    cfg: &ModelConfig,
    opts: &MilpOptions,
) -> Result<SolveOutcome, Error> {
    let model = build_extensive_form(inst, set, cfg)?;
    solve_model(&model, opts)
}
