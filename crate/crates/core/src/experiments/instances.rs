//! Seeded synthetic instances shaped like the two case studies.
//!
//! The RTS-like city follows the IEEE RTS-79 24-bus topology with one extra bus;
//! the Miami-like city is a statistics-matched surrogate (random planar grid and
//! a road lattice), not real utility or traffic data.

use petgraph::algo::astar;
use petgraph::graph::{NodeIndex, UnGraph};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::model::{
    map_station_to_bus, Bus, CandidateStation, Generator, Instance, Line, Params, Point, Route, TransportNetwork,
};
use crate::scenario::{allocate_route_demands, total_battery_demand, uniform01};
use crate::toy::lattice;

/// Cost and sizing parameters that the case studies leave unpublished.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InstanceKnobs {
    /// MW delivered per discharged battery.
    pub battery_power: f64,
    /// Fixed cost of opening a station.
    pub fixed_cost: f64,
    /// Cost per stocked battery.
    pub per_battery_cost: f64,
    pub min_batteries: f64,
    /// Station capacity as a fraction of the city-wide expected battery demand.
    pub max_batteries_fraction: f64,
    /// Penalty per unserved battery request.
    pub unmet_penalty: f64,
    /// Penalty per MW of shed load.
    pub shed_penalty: f64,
    pub detour_unit_cost: f64,
    /// Let the large nuclear-type units become renewable in a sweep.
    pub nuclear_eligible: bool,
    /// Compute requests as population × vehicle × PHEV ratios, leaving out the exchange fraction.
    pub omit_exchange_fraction: bool,
}

impl Default for InstanceKnobs {
    fn default() -> Self {
        InstanceKnobs {
            battery_power: 0.01,
            fixed_cost: 2000.0,
            per_battery_cost: 2.0,
            min_batteries: 0.0,
            max_batteries_fraction: 0.25,
            unmet_penalty: 50.0,
            shed_penalty: 1000.0,
            detour_unit_cost: 1.0,
            nuclear_eligible: false,
            omit_exchange_fraction: false,
        }
    }
}

pub const RTS_POPULATION: u64 = 344_850;
pub const RTS_TOTAL_CAPACITY: f64 = 2999.0;
pub const RTS_TOTAL_LOAD: f64 = 2880.0;
pub const MIAMI_POPULATION: u64 = 5_414_712;
pub const MIAMI_TOTAL_CAPACITY: f64 = 8200.0;
pub const MIAMI_TOTAL_LOAD: f64 = 6400.0;

/// RTS-79 branches (1-based buses): from, to, reactance (p.u.), rating (MW).
/// Parallel circuits 15-21 and 19-20 are folded into single lines and bus 25 is
/// tied in between buses 14 and 16, keeping 38 branches.
const RTS_LINES: [(usize, usize, f64, f64); 38] = [
    (1, 2, 0.0139, 175.0),
    (1, 3, 0.2112, 175.0),
    (1, 5, 0.0845, 175.0),
    (2, 4, 0.1267, 175.0),
    (2, 6, 0.1920, 175.0),
    (3, 9, 0.1190, 175.0),
    (3, 24, 0.0839, 400.0),
    (4, 9, 0.1037, 175.0),
    (5, 10, 0.0883, 175.0),
    (6, 10, 0.0605, 175.0),
    (7, 8, 0.0614, 175.0),
    (8, 9, 0.1651, 175.0),
    (8, 10, 0.1651, 175.0),
    (9, 11, 0.0839, 400.0),
    (9, 12, 0.0839, 400.0),
    (10, 11, 0.0839, 400.0),
    (10, 12, 0.0839, 400.0),
    (11, 13, 0.0476, 500.0),
    (11, 14, 0.0418, 500.0),
    (12, 13, 0.0476, 500.0),
    (12, 23, 0.0966, 500.0),
    (13, 23, 0.0865, 500.0),
    (14, 16, 0.0389, 500.0),
    (15, 16, 0.0173, 500.0),
    (15, 21, 0.0490, 500.0),
    (15, 24, 0.0519, 500.0),
    (16, 17, 0.0259, 500.0),
    (16, 19, 0.0231, 500.0),
    (17, 18, 0.0144, 500.0),
    (17, 22, 0.1053, 500.0),
    (18, 21, 0.0259, 500.0),
    (18, 21, 0.0259, 500.0),
    (19, 20, 0.0396, 500.0),
    (20, 23, 0.0216, 500.0),
    (20, 23, 0.0216, 500.0),
    (21, 22, 0.0678, 500.0),
    (14, 25, 0.0400, 500.0),
    (25, 16, 0.0400, 500.0),
];

/// Peak loads (MW) of RTS-79 buses 1-24, plus 30 MW at bus 25 for a 2880 MW total.
const RTS_LOADS: [f64; 25] = [
    108.0, 97.0, 180.0, 74.0, 71.0, 136.0, 125.0, 171.0, 175.0, 195.0, 0.0, 0.0, 265.0, 194.0, 317.0, 100.0, 0.0,
    333.0, 181.0, 128.0, 0.0, 0.0, 0.0, 0.0, 30.0,
];

#[derive(Clone, Copy, PartialEq)]
enum UnitType {
    Oil12,
    Oil20,
    Hydro50,
    Coal76,
    Oil100,
    Coal155,
    Oil197,
    Coal350,
    Nuclear400,
}

impl UnitType {
    fn rating(self) -> f64 {
        match self {
            UnitType::Oil12 => 12.0,
            UnitType::Oil20 => 20.0,
            UnitType::Hydro50 => 50.0,
            UnitType::Coal76 => 76.0,
            UnitType::Oil100 => 100.0,
            UnitType::Coal155 => 155.0,
            UnitType::Oil197 => 197.0,
            UnitType::Coal350 => 350.0,
            UnitType::Nuclear400 => 400.0,
        }
    }

    fn cost(self) -> f64 {
        match self {
            UnitType::Oil12 => 40.0,
            UnitType::Oil20 => 60.0,
            UnitType::Hydro50 => 10.0,
            UnitType::Coal76 => 20.0,
            UnitType::Oil100 => 35.0,
            UnitType::Coal155 => 18.0,
            UnitType::Oil197 => 32.0,
            UnitType::Coal350 => 16.0,
            UnitType::Nuclear400 => 6.0,
        }
    }
}

/// RTS-79 unit mix by bus (1-based), plus two 100 MW units at bus 25.
fn rts_units() -> Vec<(usize, UnitType)> {
    use UnitType::*;
    let groups: [(usize, &[UnitType]); 11] = [
        (1, &[Oil20, Oil20, Coal76, Coal76]),
        (2, &[Oil20, Oil20, Coal76, Coal76]),
        (7, &[Oil100, Oil100, Oil100]),
        (13, &[Oil197, Oil197, Oil197]),
        (15, &[Oil12, Oil12, Oil12, Oil12, Oil12, Coal155]),
        (16, &[Coal155]),
        (18, &[Nuclear400]),
        (21, &[Nuclear400]),
        (22, &[Hydro50, Hydro50, Hydro50, Hydro50, Hydro50, Hydro50]),
        (23, &[Coal155, Coal155, Coal350]),
        (25, &[Oil100, Oil100]),
    ];
    groups.iter().flat_map(|&(bus, units)| units.iter().map(move |&u| (bus, u))).collect()
}

/// Approximate one-line-diagram positions of buses 1-25 on a 10 × 7 plane.
const RTS_LAYOUT: [Point; 25] = [
    [1.0, 0.5],
    [3.0, 0.5],
    [0.5, 2.5],
    [2.5, 1.8],
    [4.0, 1.5],
    [6.0, 1.2],
    [8.5, 0.5],
    [8.0, 1.8],
    [3.5, 3.0],
    [6.0, 3.0],
    [4.0, 4.2],
    [6.5, 4.2],
    [8.5, 4.5],
    [3.0, 5.0],
    [0.5, 5.5],
    [2.5, 5.8],
    [1.5, 6.5],
    [1.0, 7.0],
    [4.0, 6.2],
    [6.0, 6.5],
    [0.2, 6.8],
    [2.5, 7.0],
    [8.0, 6.5],
    [0.3, 4.0],
    [3.7, 5.5],
];

fn below(rng: &mut ChaCha8Rng, n: usize) -> usize {
    (rng.next_u64() % n as u64) as usize
}

/// `k` distinct values from `0..n` by partial Fisher-Yates.
fn sample_distinct(rng: &mut ChaCha8Rng, n: usize, k: usize) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..n).collect();
    for i in 0..k.min(n) {
        let j = i + below(rng, n - i);
        pool.swap(i, j);
    }
    pool.truncate(k.min(n));
    pool
}

/// Rescales `values` to sum to `total`, fixing the last entry so the sum is exact.
fn scale_to_total(values: &mut [f64], total: f64) {
    let sum: f64 = values.iter().sum();
    let n = values.len();
    for v in values.iter_mut() {
        *v *= total / sum;
    }
    if n > 0 {
        let rest: f64 = values[..n - 1].iter().sum();
        values[n - 1] = total - rest;
    }
}

fn shortest_path(transport: &TransportNetwork, from: usize, to: usize) -> Option<Vec<usize>> {
    let mut g: UnGraph<(), f64> = UnGraph::with_capacity(transport.nodes.len(), transport.edges.len());
    for _ in &transport.nodes {
        g.add_node(());
    }
    for &(a, b, len) in &transport.edges {
        g.add_edge(NodeIndex::new(a), NodeIndex::new(b), len);
    }
    astar(&g, NodeIndex::new(from), |n| n.index() == to, |e| *e.weight(), |_| 0.0)
        .map(|(_, path)| path.into_iter().map(|n| n.index()).collect())
}

struct CityParts {
    buses: Vec<Bus>,
    lines: Vec<Line>,
    generators: Vec<Generator>,
    transport: TransportNetwork,
    stations: usize,
    routes: usize,
    population: u64,
}

/// Places stations and routes on the transport network and attaches costs.
fn finish_city(parts: CityParts, knobs: &InstanceKnobs, rng: &mut ChaCha8Rng) -> Instance {
    let CityParts { buses, lines, generators, transport, stations, routes, population } = parts;
    let params = Params {
        battery_power: knobs.battery_power,
        population,
        detour_unit_cost: knobs.detour_unit_cost,
        ..Params::default()
    };
    let exchange = if knobs.omit_exchange_fraction { 1.0 } else { params.exchange_fraction };
    let total = total_battery_demand(population, params.vehicle_ratio, params.phev_ratio, exchange) as f64;

    let station_nodes = sample_distinct(rng, transport.nodes.len(), stations);
    let stations: Vec<CandidateStation> = station_nodes
        .iter()
        .enumerate()
        .map(|(id, &node)| CandidateStation {
            id,
            transport_node: node,
            grid_bus: map_station_to_bus(transport.nodes[node], &buses).expect("cities have buses"),
            fixed_cost: knobs.fixed_cost,
            per_battery_cost: knobs.per_battery_cost,
            min_batteries: knobs.min_batteries,
            max_batteries: (knobs.max_batteries_fraction * total).round().max(knobs.min_batteries),
        })
        .collect();

    let mut route_list = Vec::with_capacity(routes);
    while route_list.len() < routes {
        let from = below(rng, transport.nodes.len());
        let to = below(rng, transport.nodes.len());
        if from == to {
            continue;
        }
        if let Some(node_path) = shortest_path(&transport, from, to) {
            route_list.push(Route {
                id: route_list.len(),
                node_path,
                avg_demand: 0.0,
                unmet_penalty: knobs.unmet_penalty,
                weight: 1.0,
            });
        }
    }
    let shares = allocate_route_demands(total, &route_list).expect("equal positive weights");
    for (r, d) in route_list.iter_mut().zip(shares) {
        r.avg_demand = d;
    }
    Instance { buses, lines, generators, transport, routes: route_list, stations, params }
}

/// RTS-79-based synthetic city: 25 buses, 38 lines, generators on 11 buses
/// totalling 2999 MW, 2880 MW of peak load, an 8 × 11 road lattice, 28 candidate
/// stations and 10 shortest-path routes.
pub fn generate_rts_like_instance(seed: u64, knobs: &InstanceKnobs) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (width, height) = (11, 8);
    let extent = [(width - 1) as f64, (height - 1) as f64];
    let buses: Vec<Bus> = RTS_LAYOUT
        .iter()
        .zip(RTS_LOADS)
        .enumerate()
        .map(|(id, (p, peak_load))| {
            let mut coords = *p;
            for (k, c) in coords.iter_mut().enumerate() {
                *c = (*c + 0.6 * (uniform01(&mut rng) - 0.5)).clamp(0.0, extent[k]);
            }
            Bus { id, coords, peak_load, shed_penalty: knobs.shed_penalty }
        })
        .collect();
    let lines = RTS_LINES
        .iter()
        .map(|&(a, b, reactance, capacity)| Line { from_bus: a - 1, to_bus: b - 1, reactance, capacity })
        .collect();
    let units = rts_units();
    let mut caps: Vec<f64> = units.iter().map(|(_, u)| u.rating()).collect();
    scale_to_total(&mut caps, RTS_TOTAL_CAPACITY);
    let generators = units
        .iter()
        .zip(caps)
        .enumerate()
        .map(|(id, (&(bus, unit), max_capacity))| Generator {
            id,
            bus: bus - 1,
            max_capacity,
            unit_cost: unit.cost(),
            renewable_eligible: knobs.nuclear_eligible || unit != UnitType::Nuclear400,
        })
        .collect();
    let parts = CityParts {
        buses,
        lines,
        generators,
        transport: lattice(width, height),
        stations: 28,
        routes: 10,
        population: RTS_POPULATION,
    };
    finish_city(parts, knobs, &mut rng)
}

/// Statistics-matched surrogate of the Miami case: 200 buses, 275 lines,
/// 6400 MW of peak load, 8200 MW of generation, a 40 × 40 road lattice,
/// 316 candidate stations and 100 routes.
pub fn generate_miami_like_instance(seed: u64, knobs: &InstanceKnobs) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (nb, nl, side) = (200usize, 275usize, 40usize);
    let extent = (side - 1) as f64;
    let coords: Vec<Point> =
        (0..nb).map(|_| [extent * uniform01(&mut rng), extent * uniform01(&mut rng)]).collect();
    let dist = |a: usize, b: usize| ((coords[a][0] - coords[b][0]).powi(2) + (coords[a][1] - coords[b][1]).powi(2)).sqrt();

    // Euclidean minimum spanning tree (Prim), then the shortest remaining pairs.
    let mut in_tree = vec![false; nb];
    let mut best = vec![(f64::INFINITY, 0usize); nb];
    let mut pairs = Vec::with_capacity(nl);
    in_tree[0] = true;
    for v in 1..nb {
        best[v] = (dist(0, v), 0);
    }
    for _ in 1..nb {
        let v = (0..nb).filter(|&v| !in_tree[v]).min_by(|&a, &b| best[a].0.total_cmp(&best[b].0)).expect("vertex left");
        in_tree[v] = true;
        pairs.push((best[v].1.min(v), best[v].1.max(v)));
        for u in 0..nb {
            if !in_tree[u] && dist(u, v) < best[u].0 {
                best[u] = (dist(u, v), v);
            }
        }
    }
    let mut extra: Vec<(f64, usize, usize)> = Vec::new();
    for a in 0..nb {
        for b in a + 1..nb {
            extra.push((dist(a, b), a, b));
        }
    }
    extra.sort_by(|x, y| x.0.total_cmp(&y.0).then((x.1, x.2).cmp(&(y.1, y.2))));
    for (_, a, b) in extra {
        if pairs.len() >= nl {
            break;
        }
        if !pairs.contains(&(a, b)) {
            pairs.push((a, b));
        }
    }
    let lines = pairs
        .iter()
        .map(|&(a, b)| Line {
            from_bus: a,
            to_bus: b,
            reactance: 0.01 * dist(a, b).max(0.5),
            capacity: 300.0 + 300.0 * uniform01(&mut rng),
        })
        .collect();

    let mut loads: Vec<f64> = (0..nb).map(|_| 0.2 + uniform01(&mut rng)).collect();
    scale_to_total(&mut loads, MIAMI_TOTAL_LOAD);
    let buses: Vec<Bus> = coords
        .iter()
        .zip(loads)
        .enumerate()
        .map(|(id, (&coords, peak_load))| Bus { id, coords, peak_load, shed_penalty: knobs.shed_penalty })
        .collect();

    let gen_buses = sample_distinct(&mut rng, nb, 40);
    let mut specs = Vec::new();
    for &bus in &gen_buses {
        for _ in 0..1 + below(&mut rng, 3) {
            specs.push((bus, 50.0 + 350.0 * uniform01(&mut rng), 5.0 + 55.0 * uniform01(&mut rng)));
        }
    }
    let mut caps: Vec<f64> = specs.iter().map(|s| s.1).collect();
    scale_to_total(&mut caps, MIAMI_TOTAL_CAPACITY);
    let generators = specs
        .iter()
        .zip(caps)
        .enumerate()
        .map(|(id, (&(bus, _, unit_cost), max_capacity))| Generator {
            id,
            bus,
            max_capacity,
            unit_cost,
            renewable_eligible: true,
        })
        .collect();

    let parts = CityParts {
        buses,
        lines,
        generators,
        transport: lattice(side, side),
        stations: 316,
        routes: 100,
        population: MIAMI_POPULATION,
    };
    finish_city(parts, knobs, &mut rng)
}
