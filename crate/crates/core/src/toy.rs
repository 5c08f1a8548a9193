//! Small hand-built and seeded instances for tests, examples and smoke runs.

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::model::{map_station_to_bus, Bus, CandidateStation, Generator, Instance, Line, Params, Route, TransportNetwork};
use crate::scenario::{uniform01, RenewableAssignment, Scenario, ScenarioSet};

/// Unit-spaced `width × height` lattice; node `(c, r)` has id `r * width + c`.
pub fn lattice(width: usize, height: usize) -> TransportNetwork {
    let mut nodes = Vec::with_capacity(width * height);
    let mut edges = Vec::new();
    for r in 0..height {
        for c in 0..width {
            let id = r * width + c;
            nodes.push([c as f64, r as f64]);
            if c + 1 < width {
                edges.push((id, id + 1, 1.0));
            }
            if r + 1 < height {
                edges.push((id, id + width, 1.0));
            }
        }
    }
    TransportNetwork { nodes, edges }
}

/// Monotone lattice path: along the row of `from`, then along the column of `to`.
pub fn lattice_path(width: usize, from: usize, to: usize) -> Vec<usize> {
    let (mut c, mut r) = (from % width, from / width);
    let (tc, tr) = (to % width, to / width);
    let mut path = vec![from];
    while c != tc {
        c = if c < tc { c + 1 } else { c - 1 };
        path.push(r * width + c);
    }
    while r != tr {
        r = if r < tr { r + 1 } else { r - 1 };
        path.push(r * width + c);
    }
    path
}

/// Cost knobs shared by the hand-built toys.
struct Costs {
    fixed: f64,
    per_battery: f64,
    max_batteries: f64,
    unmet: f64,
    shed: f64,
    battery_power: f64,
}

struct Layout<'a> {
    width: usize,
    height: usize,
    buses: &'a [([f64; 2], f64)],
    lines: &'a [(usize, usize, f64, f64)],
    gens: &'a [(usize, f64, f64, bool)],
    stations: &'a [usize],
    routes: &'a [(usize, usize, f64)],
}

fn assemble(lay: Layout<'_>, costs: Costs) -> Instance {
    let transport = lattice(lay.width, lay.height);
    let buses: Vec<Bus> = lay
        .buses
        .iter()
        .enumerate()
        .map(|(id, &(coords, peak_load))| Bus { id, coords, peak_load, shed_penalty: costs.shed })
        .collect();
    let lines = lay
        .lines
        .iter()
        .map(|&(from_bus, to_bus, reactance, capacity)| Line { from_bus, to_bus, reactance, capacity })
        .collect();
    let generators = lay
        .gens
        .iter()
        .enumerate()
        .map(|(id, &(bus, max_capacity, unit_cost, renewable_eligible))| Generator {
            id,
            bus,
            max_capacity,
            unit_cost,
            renewable_eligible,
        })
        .collect();
    let stations = lay
        .stations
        .iter()
        .enumerate()
        .map(|(id, &node)| CandidateStation {
            id,
            transport_node: node,
            grid_bus: map_station_to_bus(transport.nodes[node], &buses).expect("toys have buses"),
            fixed_cost: costs.fixed,
            per_battery_cost: costs.per_battery,
            min_batteries: 0.0,
            max_batteries: costs.max_batteries,
        })
        .collect();
    let routes = lay
        .routes
        .iter()
        .enumerate()
        .map(|(id, &(from, to, avg_demand))| Route {
            id,
            node_path: lattice_path(lay.width, from, to),
            avg_demand,
            unmet_penalty: costs.unmet,
            weight: 1.0,
        })
        .collect();
    Instance {
        buses,
        lines,
        generators,
        transport,
        routes,
        stations,
        params: Params { battery_power: costs.battery_power, ..Params::default() },
    }
}

/// Three buses on a triangle of unit-reactance lines, a generator at bus 0 and
/// 3 MW of load at bus 2. No transport side.
pub fn three_bus_triangle() -> Instance {
    assemble(
        Layout {
            width: 1,
            height: 1,
            buses: &[([0.0, 0.0], 0.0), ([1.0, 0.0], 0.0), ([0.5, 1.0], 3.0)],
            lines: &[(0, 1, 1.0, 10.0), (1, 2, 1.0, 10.0), (0, 2, 1.0, 10.0)],
            gens: &[(0, 10.0, 1.0, false)],
            stations: &[],
            routes: &[],
        },
        Costs { fixed: 0.0, per_battery: 0.0, max_batteries: 0.0, unmet: 0.0, shed: 100.0, battery_power: 0.01 },
    )
}

/// Three buses along a 5×3 road lattice, four candidates, two crossing routes.
pub fn corridor() -> Instance {
    assemble(
        Layout {
            width: 5,
            height: 3,
            buses: &[([0.0, 1.0], 20.0), ([2.0, 1.0], 30.0), ([4.0, 1.0], 40.0)],
            lines: &[(0, 1, 0.1, 30.0), (1, 2, 0.1, 30.0), (0, 2, 0.2, 20.0)],
            gens: &[(0, 60.0, 20.0, true), (2, 40.0, 30.0, true), (1, 10.0, 50.0, false)],
            stations: &[1, 7, 13, 9],
            routes: &[(5, 9, 30.0), (2, 12, 20.0)],
        },
        Costs { fixed: 40.0, per_battery: 1.0, max_batteries: 60.0, unmet: 15.0, shed: 200.0, battery_power: 0.5 },
    )
}

/// Four buses on a ring around a 4×4 lattice with a weak tie line.
pub fn ring() -> Instance {
    assemble(
        Layout {
            width: 4,
            height: 4,
            buses: &[([0.0, 0.0], 25.0), ([3.0, 0.0], 15.0), ([3.0, 3.0], 35.0), ([0.0, 3.0], 10.0)],
            lines: &[(0, 1, 0.1, 40.0), (1, 2, 0.1, 25.0), (2, 3, 0.1, 40.0), (3, 0, 0.1, 40.0), (0, 2, 0.3, 10.0)],
            gens: &[(0, 50.0, 15.0, true), (3, 40.0, 25.0, true), (1, 20.0, 40.0, false)],
            stations: &[5, 10, 3, 12],
            routes: &[(0, 15, 25.0), (12, 3, 25.0), (4, 7, 10.0)],
        },
        Costs { fixed: 60.0, per_battery: 0.5, max_batteries: 80.0, unmet: 12.0, shed: 150.0, battery_power: 0.4 },
    )
}

/// Two buses, one long line, three candidates on a 6×2 lattice.
pub fn radial() -> Instance {
    assemble(
        Layout {
            width: 6,
            height: 2,
            buses: &[([0.0, 0.0], 10.0), ([5.0, 1.0], 45.0)],
            lines: &[(0, 1, 0.2, 25.0)],
            gens: &[(0, 70.0, 10.0, true), (1, 15.0, 45.0, true)],
            stations: &[2, 10, 11],
            routes: &[(0, 5, 20.0), (6, 11, 35.0)],
        },
        Costs { fixed: 30.0, per_battery: 2.0, max_batteries: 50.0, unmet: 20.0, shed: 300.0, battery_power: 0.6 },
    )
}

/// Scenario set with explicit values; probabilities `1/n`.
pub fn scenario_set(scenarios: Vec<(Vec<u64>, Vec<f64>, Vec<f64>, Vec<f64>)>) -> ScenarioSet {
    let n = scenarios.len();
    let gens = scenarios.first().map_or(0, |s| s.2.len());
    ScenarioSet {
        assignment: RenewableAssignment { penetration: 0.0, renewable_flags: vec![false; gens], seed: 0 },
        seed: 0,
        scenarios: scenarios
            .into_iter()
            .enumerate()
            .map(|(id, (route_demands, bus_loads, gen_capacities, gen_costs))| Scenario {
                id,
                route_demands,
                bus_loads,
                gen_capacities,
                gen_costs,
                probability: 1.0 / n as f64,
            })
            .collect(),
    }
}

fn below(rng: &mut ChaCha8Rng, n: usize) -> usize {
    (rng.next_u64() % n as u64) as usize
}

fn between(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * uniform01(rng)
}

/// Seeded tiny instance: 2-5 buses, at most 6 lines, 1-4 candidates, 1-3 routes.
pub fn random_tiny(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (width, height) = (4, 3);
    let transport = lattice(width, height);
    let nb = 2 + below(&mut rng, 4);
    let buses: Vec<Bus> = (0..nb)
        .map(|id| Bus {
            id,
            coords: [between(&mut rng, 0.0, 3.0), between(&mut rng, 0.0, 2.0)],
            peak_load: between(&mut rng, 0.0, 30.0),
            shed_penalty: between(&mut rng, 50.0, 200.0),
        })
        .collect();
    let mut pairs: Vec<(usize, usize)> = (1..nb).map(|u| (below(&mut rng, u), u)).collect();
    while pairs.len() < 6 && below(&mut rng, 2) == 0 {
        let (a, b) = (below(&mut rng, nb), below(&mut rng, nb));
        if a != b {
            pairs.push((a, b));
        }
    }
    let lines = pairs
        .into_iter()
        .map(|(from_bus, to_bus)| Line {
            from_bus,
            to_bus,
            reactance: between(&mut rng, 0.05, 0.5),
            capacity: between(&mut rng, 5.0, 40.0),
        })
        .collect();
    let generators = (0..1 + below(&mut rng, 3))
        .map(|id| Generator {
            id,
            bus: below(&mut rng, nb),
            max_capacity: between(&mut rng, 10.0, 60.0),
            unit_cost: between(&mut rng, 5.0, 40.0),
            renewable_eligible: true,
        })
        .collect();
    let mut nodes: Vec<usize> = (0..transport.nodes.len()).collect();
    let ns = 1 + below(&mut rng, 4);
    for k in 0..ns {
        let pick = k + below(&mut rng, nodes.len() - k);
        nodes.swap(k, pick);
    }
    let stations = nodes[..ns]
        .iter()
        .enumerate()
        .map(|(id, &node)| CandidateStation {
            id,
            transport_node: node,
            grid_bus: map_station_to_bus(transport.nodes[node], &buses).expect("nonempty"),
            fixed_cost: between(&mut rng, 5.0, 60.0),
            per_battery_cost: between(&mut rng, 0.1, 2.0),
            min_batteries: 0.0,
            max_batteries: between(&mut rng, 10.0, 50.0),
        })
        .collect();
    let routes = (0..1 + below(&mut rng, 3))
        .map(|id| {
            let from = below(&mut rng, transport.nodes.len());
            let to = below(&mut rng, transport.nodes.len());
            Route {
                id,
                node_path: lattice_path(width, from, to),
                avg_demand: between(&mut rng, 0.0, 30.0),
                unmet_penalty: between(&mut rng, 2.0, 30.0),
                weight: 1.0,
            }
        })
        .collect();
    Instance {
        buses,
        lines,
        generators,
        transport,
        routes,
        stations,
        params: Params { battery_power: between(&mut rng, 0.1, 1.0), detour_unit_cost: 1.0, ..Params::default() },
    }
}
