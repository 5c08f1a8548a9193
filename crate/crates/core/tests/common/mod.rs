#![allow(dead_code)]

use v2g_core::toy::{corridor, radial, ring};
use v2g_core::{assign_renewables, sample_scenario_set, Instance, SamplingOptions, ScenarioSet};
use v2g_milp::MilpOptions;

pub fn toys() -> Vec<(&'static str, Instance)> {
    vec![("corridor", corridor()), ("ring", ring()), ("radial", radial())]
}

pub fn scenarios(inst: &Instance, n: usize, level: f64, seed: u64) -> ScenarioSet {
    let assignment = assign_renewables(&inst.generators, level, seed).unwrap();
    sample_scenario_set(inst, &assignment, n, seed, &SamplingOptions::default()).unwrap()
}

/// Options that close the gap completely, for comparisons against exact oracles.
pub fn exact() -> MilpOptions {
    MilpOptions { gap_target: 1e-9, ..MilpOptions::default() }
}

pub fn rel_close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1.0)
}
