//! Domain types for the coupled power grid / transportation instance.

use std::collections::HashSet;
use std::fmt;

use petgraph::algo::dijkstra;
use petgraph::graph::{NodeIndex, UnGraph};
use serde::{Deserialize, Serialize};

use crate::Error;

/// Planar coordinates in abstract distance units.
pub type Point = [f64; 2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: usize,
    pub coords: Point,
    /// Base load in MW; scenario loads are drawn relative to it.
    pub peak_load: f64,
    /// Cost per MW of shed load.
    pub shed_penalty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from_bus: usize,
    pub to_bus: usize,
    /// Per-unit reactance.
    pub reactance: f64,
    /// Thermal limit in MW, enforced in both directions.
    pub capacity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: usize,
    pub bus: usize,
    pub max_capacity: f64,
    pub unit_cost: f64,
    /// Whether a penetration sweep may turn this unit into a renewable one.
    pub renewable_eligible: bool,
}

/// Undirected road network with weighted edges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransportNetwork {
    pub nodes: Vec<Point>,
    /// `(a, b, length)` triples.
    pub edges: Vec<(usize, usize, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Route {
    pub id: usize,
    /// Shortest origin-destination path through the transport network.
    pub node_path: Vec<usize>,
    /// Mean battery requests per scenario.
    pub avg_demand: f64,
    /// Cost per unserved battery request.
    pub unmet_penalty: f64,
    /// Relative utilization used when splitting the city-wide demand.
    pub weight: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateStation {
    pub id: usize,
    pub transport_node: usize,
    pub grid_bus: usize,
    pub fixed_cost: f64,
    pub per_battery_cost: f64,
    pub min_batteries: f64,
    pub max_batteries: f64,
}

/// Scalar parameters shared by the whole instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// MW delivered to the grid per discharged battery.
    pub battery_power: f64,
    pub population: u64,
    pub vehicle_ratio: f64,
    pub phev_ratio: f64,
    pub exchange_fraction: f64,
    /// Cost per distance unit of detour driven to reach a station.
    pub detour_unit_cost: f64,
}

impl Default for Params {
    fn default() -> Self {
        Params {
            battery_power: 0.01,
            population: 0,
            vehicle_ratio: 0.78,
            phev_ratio: 0.1,
            exchange_fraction: 0.1,
            detour_unit_cost: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    pub transport: TransportNetwork,
    pub routes: Vec<Route>,
    pub stations: Vec<CandidateStation>,
    pub params: Params,
}

/// One broken invariant, located by a JSON-path-like string such as `lines[3].to_bus`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    fn push(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation { path: path.into(), message: message.into() });
    }

    fn check(&mut self, ok: bool, path: impl FnOnce() -> String, message: &str) {
        if !ok {
            self.push(path(), message);
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (k, v) in self.violations.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

fn nonneg(v: f64) -> bool {
    v.is_finite() && v >= 0.0
}

fn positive(v: f64) -> bool {
    v.is_finite() && v > 0.0
}

/// Checks every structural invariant and reports all failures; never aborts early.
pub fn validate_instance(inst: &Instance) -> ValidationReport {
    let mut r = ValidationReport::default();
    let nb = inst.buses.len();
    let nn = inst.transport.nodes.len();

    for (k, b) in inst.buses.iter().enumerate() {
        r.check(b.id == k, || format!("buses[{k}].id"), "bus ids must be dense from 0 in list order");
        r.check(b.coords.iter().all(|c| c.is_finite()), || format!("buses[{k}].coords"), "coordinates must be finite");
        r.check(nonneg(b.peak_load), || format!("buses[{k}].peak_load"), "must be finite and >= 0");
        r.check(nonneg(b.shed_penalty), || format!("buses[{k}].shed_penalty"), "must be finite and >= 0");
    }
    for (k, l) in inst.lines.iter().enumerate() {
        r.check(l.from_bus < nb, || format!("lines[{k}].from_bus"), "references a missing bus");
        r.check(l.to_bus < nb, || format!("lines[{k}].to_bus"), "references a missing bus");
        r.check(l.from_bus != l.to_bus, || format!("lines[{k}]"), "from_bus and to_bus must differ");
        r.check(positive(l.reactance), || format!("lines[{k}].reactance"), "must be > 0");
        r.check(positive(l.capacity), || format!("lines[{k}].capacity"), "must be > 0");
    }
    for (k, g) in inst.generators.iter().enumerate() {
        r.check(g.id == k, || format!("generators[{k}].id"), "generator ids must be dense from 0 in list order");
        r.check(g.bus < nb, || format!("generators[{k}].bus"), "references a missing bus");
        r.check(nonneg(g.max_capacity), || format!("generators[{k}].max_capacity"), "must be finite and >= 0");
        r.check(nonneg(g.unit_cost), || format!("generators[{k}].unit_cost"), "must be finite and >= 0");
    }
    for (k, p) in inst.transport.nodes.iter().enumerate() {
        r.check(p.iter().all(|c| c.is_finite()), || format!("transport.nodes[{k}]"), "coordinates must be finite");
    }
    for (k, &(a, b, len)) in inst.transport.edges.iter().enumerate() {
        r.check(a < nn && b < nn, || format!("transport.edges[{k}]"), "references a missing node");
        r.check(nonneg(len), || format!("transport.edges[{k}].length"), "must be finite and >= 0");
    }
    let adjacent: HashSet<(usize, usize)> =
        inst.transport.edges.iter().flat_map(|&(a, b, _)| [(a, b), (b, a)]).collect();
    for (k, route) in inst.routes.iter().enumerate() {
        r.check(route.id == k, || format!("routes[{k}].id"), "route ids must be dense from 0 in list order");
        let path = &route.node_path;
        if path.is_empty() {
            r.push(format!("routes[{k}].node_path"), "must contain at least one node");
        }
        if let Some(bad) = path.iter().position(|&n| n >= nn) {
            r.push(format!("routes[{k}].node_path[{bad}]"), "references a missing node");
        } else {
            let distinct: HashSet<usize> = path.iter().copied().collect();
            r.check(distinct.len() == path.len(), || format!("routes[{k}].node_path"), "path must be simple");
            if let Some(gap) = path.windows(2).position(|w| !adjacent.contains(&(w[0], w[1]))) {
                r.push(format!("routes[{k}].node_path[{}]", gap + 1), "consecutive nodes are not joined by an edge");
            }
        }
        r.check(nonneg(route.avg_demand), || format!("routes[{k}].avg_demand"), "must be finite and >= 0");
        r.check(nonneg(route.unmet_penalty), || format!("routes[{k}].unmet_penalty"), "must be finite and >= 0");
        r.check(nonneg(route.weight), || format!("routes[{k}].weight"), "must be finite and >= 0");
    }
    for (k, s) in inst.stations.iter().enumerate() {
        r.check(s.id == k, || format!("stations[{k}].id"), "station ids must be dense from 0 in list order");
        r.check(s.transport_node < nn, || format!("stations[{k}].transport_node"), "references a missing node");
        r.check(s.grid_bus < nb, || format!("stations[{k}].grid_bus"), "references a missing bus");
        r.check(nonneg(s.fixed_cost), || format!("stations[{k}].fixed_cost"), "must be finite and >= 0");
        r.check(nonneg(s.per_battery_cost), || format!("stations[{k}].per_battery_cost"), "must be finite and >= 0");
        r.check(nonneg(s.min_batteries), || format!("stations[{k}].min_batteries"), "must be finite and >= 0");
        r.check(s.max_batteries.is_finite(), || format!("stations[{k}].max_batteries"), "must be finite");
        r.check(
            s.min_batteries <= s.max_batteries,
            || format!("stations[{k}]"),
            "min_batteries exceeds max_batteries",
        );
    }
    let p = &inst.params;
    r.check(positive(p.battery_power), || "params.battery_power".into(), "must be > 0");
    for (name, v) in [
        ("vehicle_ratio", p.vehicle_ratio),
        ("phev_ratio", p.phev_ratio),
        ("exchange_fraction", p.exchange_fraction),
    ] {
        r.check(nonneg(v) && v <= 1.0, || format!("params.{name}"), "must lie in [0, 1]");
    }
    r.check(nonneg(p.detour_unit_cost), || "params.detour_unit_cost".into(), "must be finite and >= 0");
    r
}

/// Shortest-path distances on the undirected transport graph.
pub struct TransportDistances {
    graph: UnGraph<(), f64>,
}

impl TransportDistances {
    pub fn new(net: &TransportNetwork) -> Self {
        let mut graph = UnGraph::with_capacity(net.nodes.len(), net.edges.len());
        for _ in &net.nodes {
            graph.add_node(());
        }
        for &(a, b, len) in &net.edges {
            graph.add_edge(NodeIndex::new(a), NodeIndex::new(b), len);
        }
        TransportDistances { graph }
    }

    /// Distances from `source` to every node; `None` marks other components.
    pub fn from_node(&self, source: usize) -> Vec<Option<f64>> {
        let map = dijkstra(&self.graph, NodeIndex::new(source), None, |e| *e.weight());
        let mut out = vec![None; self.graph.node_count()];
        for (n, d) in map {
            out[n.index()] = Some(d);
        }
        out
    }
}

fn endpoints(route: &Route) -> Result<(usize, usize), Error> {
    match (route.node_path.first(), route.node_path.last()) {
        (Some(&o), Some(&d)) => Ok((o, d)),
        _ => Err(Error::EmptyRoute(route.id)),
    }
}

fn detour_from(from_origin: &[Option<f64>], from_dest: &[Option<f64>], dest: usize, node: usize, unit: f64) -> Option<f64> {
    let direct = from_origin[dest]?;
    let detour = from_origin[node]? + from_dest[node]? - direct;
    // Shortest paths obey the triangle inequality; clip floating-point residue.
    Some(unit * detour.max(0.0))
}

/// Extra driving cost for a driver on `route` to visit `station`.
///
/// Returns [`Error::Unreachable`] when the station sits in a different
/// connected component from the route.
pub fn detour_cost(route: &Route, station: &CandidateStation, transport: &TransportNetwork, unit_cost: f64) -> Result<f64, Error> {
    let (o, d) = endpoints(route)?;
    let dist = TransportDistances::new(transport);
    let from_o = dist.from_node(o);
    let from_d = dist.from_node(d);
    detour_from(&from_o, &from_d, d, station.transport_node, unit_cost)
        .ok_or(Error::Unreachable { route: route.id, station: station.id })
}

/// Detour costs for all (station, route) pairs, indexed `[station][route]`.
pub fn detour_matrix(inst: &Instance) -> Result<Vec<Vec<Option<f64>>>, Error> {
    let dist = TransportDistances::new(&inst.transport);
    let unit = inst.params.detour_unit_cost;
    let mut out = vec![vec![None; inst.routes.len()]; inst.stations.len()];
    for (j, route) in inst.routes.iter().enumerate() {
        let (o, d) = endpoints(route)?;
        let from_o = dist.from_node(o);
        let from_d = dist.from_node(d);
        for (i, s) in inst.stations.iter().enumerate() {
            out[i][j] = detour_from(&from_o, &from_d, d, s.transport_node, unit);
        }
    }
    Ok(out)
}

/// Id of the bus nearest to `point`, ties resolved towards the lowest id.
pub fn map_station_to_bus(point: Point, buses: &[Bus]) -> Result<usize, Error> {
    let d2 = |b: &Bus| (b.coords[0] - point[0]).powi(2) + (b.coords[1] - point[1]).powi(2);
    buses
        .iter()
        .min_by(|a, b| d2(a).total_cmp(&d2(b)).then(a.id.cmp(&b.id)))
        .map(|b| b.id)
        .ok_or(Error::NoBuses)
}

impl Instance {
    /// Lowest-id bus hosting a generator, else bus 0.
    pub fn default_reference_bus(&self) -> usize {
        self.generators.iter().map(|g| g.bus).min().unwrap_or(0)
    }

    /// Connected components of the grid; `component[u]` is the island index of bus `u`,
    /// numbered in order of each island's lowest bus id.
    pub fn grid_islands(&self) -> Vec<usize> {
        let n = self.buses.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(p: &mut [usize], mut u: usize) -> usize {
            while p[u] != u {
                p[u] = p[p[u]];
                u = p[u];
            }
            u
        }
        for l in &self.lines {
            let (a, b) = (find(&mut parent, l.from_bus), find(&mut parent, l.to_bus));
            if a != b {
                parent[a.max(b)] = a.min(b);
            }
        }
        let mut label = vec![usize::MAX; n];
        let mut out = vec![0; n];
        let mut next = 0;
        for u in 0..n {
            let root = find(&mut parent, u);
            if label[root] == usize::MAX {
                label[root] = next;
                next += 1;
            }
            out[u] = label[root];
        }
        out
    }

    /// One angle reference per island. `preferred` wins inside its own island; other
    /// islands use their lowest-id bus with a generator, else their lowest-id bus.
    pub fn reference_buses(&self, preferred: Option<usize>) -> Vec<usize> {
        let islands = self.grid_islands();
        let count = islands.iter().max().map_or(0, |m| m + 1);
        let mut with_gen: Vec<Option<usize>> = vec![None; count];
        for g in &self.generators {
            let k = islands[g.bus];
            with_gen[k] = Some(with_gen[k].map_or(g.bus, |b: usize| b.min(g.bus)));
        }
        let mut refs: Vec<usize> = (0..count)
            .map(|k| with_gen[k].unwrap_or_else(|| islands.iter().position(|&c| c == k).unwrap_or(0)))
            .collect();
        if let Some(p) = preferred.filter(|&p| p < islands.len()) {
            refs[islands[p]] = p;
        }
        refs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bus(id: usize, x: f64, y: f64) -> Bus {
        Bus { id, coords: [x, y], peak_load: 1.0, shed_penalty: 1.0 }
    }

    #[test]
    fn nearest_bus_prefers_lowest_id_on_ties() {
        let buses = vec![bus(0, 5.0, 5.0), bus(1, 0.0, 0.0), bus(2, 2.0, 0.0)];
        assert_eq!(map_station_to_bus([1.0, 0.0], &buses).unwrap(), 1);
        let mut shuffled = buses.clone();
        shuffled.reverse();
        assert_eq!(map_station_to_bus([1.0, 0.0], &shuffled).unwrap(), 1);
        assert!(matches!(map_station_to_bus([0.0, 0.0], &[]), Err(Error::NoBuses)));
    }

    #[test]
    fn islands_and_references() {
        let mut inst = crate::toy::three_bus_triangle();
        inst.buses.push(bus(3, 9.0, 9.0));
        inst.buses.push(bus(4, 9.0, 8.0));
        inst.lines.push(Line { from_bus: 4, to_bus: 3, reactance: 1.0, capacity: 1.0 });
        assert_eq!(inst.grid_islands(), vec![0, 0, 0, 1, 1]);
        assert_eq!(inst.reference_buses(None), vec![0, 3]);
        assert_eq!(inst.reference_buses(Some(4)), vec![0, 4]);
    }
}
