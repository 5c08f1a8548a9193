//! Two-stage stochastic siting of battery-exchange stations that serve both a
//! road network and a power grid with intermittent renewable generation.
//!
//! The crate covers the domain model ([`model`]), Monte Carlo scenario sampling
//! ([`scenario`]), the extensive-form MILP ([`formulation`]), solving
//! ([`solve`]), synthetic case-study instances and sweeps ([`experiments`]) and
//! small fixtures ([`toy`]).

pub mod experiments;
pub mod formulation;
pub mod model;
pub mod scenario;
pub mod solve;
pub mod toy;

use thiserror::Error;

pub use formulation::{
    build_extensive_form, build_second_stage_lp, check_solution_feasibility, FeasibilityViolation, MilpModel,
    ModelConfig, Recourse, Registry, RowKey, SecondStageLp, SitingSolution, VarKey,
};
pub use model::{
    detour_cost, map_station_to_bus, validate_instance, Bus, CandidateStation, Generator, Instance, Line, Params,
    Route, TransportNetwork, ValidationReport,
};
pub use scenario::{
    allocate_route_demands, assign_renewables, sample_scenario, sample_scenario_set, total_battery_demand,
    RenewableAssignment, SamplingOptions, Scenario, ScenarioSet,
};
pub use solve::{solve_extensive_form, solve_model, SolveOutcome};

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid instance:\n{0}")]
    InvalidInstance(ValidationReport),
    #[error("{0}")]
    InvalidInput(String),
    #[error("scenario set is empty")]
    EmptyScenarioSet,
    #[error("fixed siting for station {station} is {value}, expected 0 or 1")]
    FractionalSiting { station: usize, value: f64 },
    #[error("stock {value} at station {station} violates its min/max battery bounds")]
    StockOutOfBounds { station: usize, value: f64 },
    #[error("station {station} cannot be reached from route {route}")]
    Unreachable { route: usize, station: usize },
    #[error("route {0} has an empty node path")]
    EmptyRoute(usize),
    #[error("no buses to map onto")]
    NoBuses,
    #[error(transparent)]
    Problem(#[from] v2g_milp::ProblemError),
}
