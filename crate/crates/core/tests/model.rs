use proptest::prelude::*;
use v2g_core::experiments::{generate_rts_like_instance, InstanceKnobs};
use v2g_core::model::{detour_matrix, TransportNetwork};
use v2g_core::toy::{lattice, lattice_path, three_bus_triangle};
use v2g_core::{detour_cost, map_station_to_bus, validate_instance, Bus, CandidateStation, Error, Route};
use v2g_oracles::bfs_hops;

fn bus(id: usize, x: f64, y: f64) -> Bus {
    Bus { id, coords: [x, y], peak_load: 0.0, shed_penalty: 0.0 }
}

fn station_at(node: usize) -> CandidateStation {
    CandidateStation {
        id: 0,
        transport_node: node,
        grid_bus: 0,
        fixed_cost: 0.0,
        per_battery_cost: 0.0,
        min_batteries: 0.0,
        max_batteries: 1.0,
    }
}

fn route(path: Vec<usize>) -> Route {
    Route { id: 0, node_path: path, avg_demand: 1.0, unmet_penalty: 1.0, weight: 1.0 }
}

/// Detour in hops computed by breadth-first search on an unweighted graph.
fn bfs_detour(net: &TransportNetwork, origin: usize, dest: usize, node: usize) -> Option<f64> {
    let edges: Vec<(usize, usize)> = net.edges.iter().map(|&(a, b, _)| (a, b)).collect();
    let from_o = bfs_hops(net.nodes.len(), &edges, origin);
    let from_d = bfs_hops(net.nodes.len(), &edges, dest);
    Some((from_o[node]? + from_d[node]? - from_o[dest]?) as f64)
}

#[test]
fn well_formed_toy_validates() {
    assert!(validate_instance(&three_bus_triangle()).violations.is_empty());
}

#[test]
fn dangling_line_reference_is_reported_once() {
    let mut inst = three_bus_triangle();
    inst.lines[1].to_bus = 99;
    let report = validate_instance(&inst);
    assert_eq!(report.violations.len(), 1, "{report}");
    assert!(report.violations[0].path.starts_with("lines[1]"));
}

#[test]
fn inverted_battery_bounds_are_reported() {
    let mut inst = v2g_core::toy::corridor();
    inst.stations[2].min_batteries = 10.0;
    inst.stations[2].max_batteries = 5.0;
    let report = validate_instance(&inst);
    assert_eq!(report.violations.len(), 1, "{report}");
    assert_eq!(report.violations[0].path, "stations[2]");
}

#[test]
fn validation_collects_every_problem() {
    let mut inst = three_bus_triangle();
    inst.lines[0].reactance = 0.0;
    inst.buses[2].peak_load = -1.0;
    inst.params.battery_power = 0.0;
    assert_eq!(validate_instance(&inst).violations.len(), 3);
}

#[test]
fn rts_instances_validate_for_several_seeds() {
    for seed in 0..5 {
        let report = validate_instance(&generate_rts_like_instance(seed, &InstanceKnobs::default()));
        assert!(report.is_valid(), "seed {seed}: {report}");
    }
}

#[test]
fn station_on_the_route_has_zero_detour() {
    let net = lattice(5, 3);
    let r = route(lattice_path(5, 5, 9));
    assert_eq!(detour_cost(&r, &station_at(7), &net, 3.0).unwrap(), 0.0);
}

#[test]
fn station_one_off_the_row_costs_two_units() {
    let net = lattice(5, 3);
    let r = route(lattice_path(5, 5, 9));
    let unit = 2.5;
    let oracle = bfs_detour(&net, 5, 9, 2).unwrap();
    assert_eq!(oracle, 2.0);
    assert_eq!(detour_cost(&r, &station_at(2), &net, unit).unwrap(), oracle * unit);
}

#[test]
fn disconnected_station_is_unreachable() {
    let mut net = lattice(3, 1);
    net.nodes.push([10.0, 10.0]);
    let r = route(vec![0, 1, 2]);
    assert!(matches!(detour_cost(&r, &station_at(3), &net, 1.0), Err(Error::Unreachable { .. })));
}

#[test]
fn unreachable_pairs_are_left_out_of_the_matrix() {
    let mut inst = v2g_core::toy::radial();
    inst.transport.nodes.push([9.0, 9.0]);
    let isolated = inst.transport.nodes.len() - 1;
    inst.stations[1].transport_node = isolated;
    let m = detour_matrix(&inst).unwrap();
    assert!(m[1].iter().all(Option::is_none));
    assert!(m[0].iter().all(Option::is_some));
}

#[test]
fn point_on_a_bus_maps_to_it() {
    let buses: Vec<Bus> = (0..6).map(|k| bus(k, k as f64, (k * k) as f64)).collect();
    assert_eq!(map_station_to_bus([4.0, 16.0], &buses).unwrap(), 4);
}

#[test]
fn equidistant_point_maps_to_lowest_id() {
    let mut buses: Vec<Bus> = (0..8).map(|k| bus(k, 100.0 + k as f64, 100.0)).collect();
    buses[2].coords = [-1.0, 0.0];
    buses[7].coords = [1.0, 0.0];
    assert_eq!(map_station_to_bus([0.0, 0.0], &buses).unwrap(), 2);
    buses.reverse();
    assert_eq!(map_station_to_bus([0.0, 0.0], &buses).unwrap(), 2);
}

#[test]
fn mapping_needs_buses() {
    assert!(matches!(map_station_to_bus([0.0, 0.0], &[]), Err(Error::NoBuses)));
}

#[test]
fn instance_json_round_trips() {
    let inst = v2g_core::toy::ring();
    let text = serde_json::to_string(&inst).unwrap();
    for key in ["buses", "lines", "generators", "transport", "routes", "stations", "params"] {
        assert!(text.contains(&format!("\"{key}\"")), "missing {key}");
    }
    let back: v2g_core::Instance = serde_json::from_str(&text).unwrap();
    assert_eq!(back, inst);
}

fn linear_scan(point: [f64; 2], buses: &[Bus]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for b in buses {
        let d = (b.coords[0] - point[0]).powi(2) + (b.coords[1] - point[1]).powi(2);
        if d < best_d || (d == best_d && b.id < best) {
            best = b.id;
            best_d = d;
        }
    }
    best
}

proptest! {
    #[test]
    fn mapping_matches_linear_scan(
        coords in prop::collection::vec((0.0f64..10.0, 0.0f64..10.0), 25),
        point in (0.0f64..10.0, 0.0f64..10.0),
        rotate in 0usize..25,
    ) {
        let buses: Vec<Bus> = coords.iter().enumerate().map(|(k, &(x, y))| bus(k, x, y)).collect();
        let expected = linear_scan([point.0, point.1], &buses);
        prop_assert_eq!(map_station_to_bus([point.0, point.1], &buses).unwrap(), expected);
        let mut shuffled = buses.clone();
        shuffled.rotate_left(rotate);
        prop_assert_eq!(map_station_to_bus([point.0, point.1], &shuffled).unwrap(), expected);
    }

    #[test]
    fn integer_grid_ties_follow_ids(
        coords in prop::collection::vec((0i32..4, 0i32..4), 2..12),
        point in (0i32..4, 0i32..4),
    ) {
        let buses: Vec<Bus> = coords.iter().enumerate().map(|(k, &(x, y))| bus(k, x as f64, y as f64)).collect();
        let p = [point.0 as f64, point.1 as f64];
        prop_assert_eq!(map_station_to_bus(p, &buses).unwrap(), linear_scan(p, &buses));
    }

    #[test]
    fn lattice_detours_match_bfs(
        (w, h) in (2usize..7, 2usize..7),
        picks in (0usize..1000, 0usize..1000, 0usize..1000),
        unit in 0.1f64..5.0,
    ) {
        let net = lattice(w, h);
        let n = w * h;
        let (o, d, s) = (picks.0 % n, picks.1 % n, picks.2 % n);
        let r = route(lattice_path(w, o, d));
        let got = detour_cost(&r, &station_at(s), &net, unit).unwrap();
        let oracle = bfs_detour(&net, o, d, s).unwrap();
        prop_assert!(got >= 0.0);
        prop_assert!((got - unit * oracle).abs() <= 1e-9 * (1.0 + got));
        // zero exactly when the station lies on some shortest origin-destination path
        let on_path = r.node_path.contains(&s);
        if on_path {
            prop_assert_eq!(got, 0.0);
        }
    }
}
