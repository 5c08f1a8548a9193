//! Seeded Monte Carlo scenarios: renewable placement, loads, capacities and demands.
//!
//! All randomness comes from ChaCha8 keyed with `ChaCha8Rng::seed_from_u64(seed)`.
//! Stream 0 drives the renewable assignment and stream `1 + ω` drives scenario `ω`,
//! so scenarios can be generated in any order (or in parallel) with identical output.
//! Uniform variates are `(next_u64() >> 11) * 2^-53`.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::model::{Generator, Instance, Route};
use crate::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RenewableAssignment {
    pub penetration: f64,
    pub renewable_flags: Vec<bool>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub id: usize,
    pub route_demands: Vec<u64>,
    pub bus_loads: Vec<f64>,
    pub gen_capacities: Vec<f64>,
    pub gen_costs: Vec<f64>,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub assignment: RenewableAssignment,
    pub seed: u64,
    pub scenarios: Vec<Scenario>,
}

impl ScenarioSet {
    /// Sum of scenario probabilities.
    ///
    /// A set whose probabilities are all the float image of `1/n` is treated as
    /// the exact rational sum `n * (1/n) = 1`; `fl(1/49) * 49` is not 1 in
    /// binary, so no summation order could recover it. Other sets are summed
    /// with Neumaier compensation.
    pub fn total_probability(&self) -> f64 {
        let n = self.scenarios.len();
        if n > 0 && self.scenarios.iter().all(|s| s.probability == 1.0 / n as f64) {
            return 1.0;
        }
        compensated_sum(self.scenarios.iter().map(|s| s.probability))
    }
}

/// Neumaier's compensated summation.
pub fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

/// Distributional knobs for scenario sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingOptions {
    /// Probabilities of the renewable capacity factors 0, 0.5 and 1.
    pub capacity_factor_probs: [f64; 3],
    /// Multiply each generation cost by an independent U[0.9, 1.1] factor.
    pub cost_jitter: bool,
}

impl Default for SamplingOptions {
    fn default() -> Self {
        SamplingOptions { capacity_factor_probs: [1.0 / 3.0; 3], cost_jitter: false }
    }
}

impl SamplingOptions {
    pub fn validate(&self) -> Result<(), Error> {
        let p = self.capacity_factor_probs;
        let ok = p.iter().all(|v| v.is_finite() && *v >= 0.0) && (p.iter().sum::<f64>() - 1.0).abs() <= 1e-9;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("capacity factor probabilities {p:?} must be nonnegative and sum to 1")))
        }
    }
}

/// Uniform variate on [0, 1) with 53 random bits.
pub fn uniform01(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Flags each eligible generator as renewable with probability `penetration`.
///
/// One variate is drawn per generator regardless of eligibility, so with a fixed
/// seed the renewable sets are nested as penetration grows.
pub fn assign_renewables(generators: &[Generator], penetration: f64, seed: u64) -> Result<RenewableAssignment, Error> {
    if !(0.0..=1.0).contains(&penetration) {
        return Err(Error::InvalidInput(format!("penetration {penetration} outside [0, 1]")));
    }
    let mut rng = stream(seed, 0);
    let renewable_flags = generators
        .iter()
        .map(|g| {
            let u = uniform01(&mut rng);
            g.renewable_eligible && u < penetration
        })
        .collect();
    Ok(RenewableAssignment { penetration, renewable_flags, seed })
}

/// Draws one scenario (id 0, probability 1) from `rng`.
///
/// Draw order: bus loads, then one capacity factor per generator (renewable or
/// not), then route demands, then optional cost jitter.
pub fn sample_scenario(
    inst: &Instance,
    assignment: &RenewableAssignment,
    rng: &mut impl RngCore,
    opts: &SamplingOptions,
) -> Result<Scenario, Error> {
    if assignment.renewable_flags.len() != inst.generators.len() {
        return Err(Error::InvalidInput(format!(
            "assignment has {} flags for {} generators",
            assignment.renewable_flags.len(),
            inst.generators.len()
        )));
    }
    let bus_loads = inst.buses.iter().map(|b| b.peak_load * (0.5 + 0.5 * uniform01(rng))).collect();
    let [p0, p_half, _] = opts.capacity_factor_probs;
    let gen_capacities = inst
        .generators
        .iter()
        .zip(&assignment.renewable_flags)
        .map(|(g, &renewable)| {
            let u = uniform01(rng);
            let factor = if u < p0 {
                0.0
            } else if u < p0 + p_half {
                0.5
            } else {
                1.0
            };
            if renewable {
                factor * g.max_capacity
            } else {
                g.max_capacity
            }
        })
        .collect();
    let route_demands = inst
        .routes
        .iter()
        .map(|r| round_half_up(r.avg_demand * (0.5 + uniform01(rng))))
        .collect();
    let gen_costs = inst
        .generators
        .iter()
        .map(|g| if opts.cost_jitter { g.unit_cost * (0.9 + 0.2 * uniform01(rng)) } else { g.unit_cost })
        .collect();
    Ok(Scenario { id: 0, route_demands, bus_loads, gen_capacities, gen_costs, probability: 1.0 })
}

fn round_half_up(v: f64) -> u64 {
    (v + 0.5).floor().max(0.0) as u64
}

/// `n` independent scenarios with probability `1/n` each.
pub fn sample_scenario_set(
    inst: &Instance,
    assignment: &RenewableAssignment,
    n: usize,
    seed: u64,
    opts: &SamplingOptions,
) -> Result<ScenarioSet, Error> {
    if n == 0 {
        return Err(Error::EmptyScenarioSet);
    }
    opts.validate()?;
    let probability = 1.0 / n as f64;
    let scenarios = (0..n)
        .map(|id| {
            let mut rng = stream(seed, 1 + id as u64);
            let mut s = sample_scenario(inst, assignment, &mut rng, opts)?;
            s.id = id;
            s.probability = probability;
            Ok(s)
        })
        .collect::<Result<_, Error>>()?;
    Ok(ScenarioSet { assignment: assignment.clone(), seed, scenarios })
}

/// Expected battery-exchange requests per scenario,
/// `round(population * vehicle_ratio * phev_ratio * exchange_fraction)`, halves rounded up.
pub fn total_battery_demand(population: u64, vehicle_ratio: f64, phev_ratio: f64, exchange_fraction: f64) -> u64 {
    let v = population as f64 * vehicle_ratio * phev_ratio * exchange_fraction;
    // Decimal ratios such as 0.78 are inexact in binary; nudge so exact halves round up.
    round_half_up(v + v.abs() * 1e-12)
}

/// Splits `total` across routes in proportion to their weights.
pub fn allocate_route_demands(total: f64, routes: &[Route]) -> Result<Vec<f64>, Error> {
    let sum: f64 = routes.iter().map(|r| r.weight).sum();
    if !(sum > 0.0) || routes.iter().any(|r| !(r.weight >= 0.0)) {
        return Err(Error::InvalidInput("route weights must be nonnegative with a positive sum".into()));
    }
    Ok(routes.iter().map(|r| total * r.weight / sum).collect())
}
