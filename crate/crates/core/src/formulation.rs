//! Extensive-form deterministic equivalent of the two-stage siting model.
//!
//! Column layout: `x[0..I]`, `w[0..I]`, then one block per scenario holding
//! `t[I] s[I] q[J] y[pairs] alpha[L] theta[N] delta[N] beta[G]`. Only reachable
//! (station, route) pairs get a `y` column. Line limits, generator limits,
//! shedding limits and the angle reference are column bounds, not rows.

use std::fmt;

use serde::{Deserialize, Serialize};
use v2g_milp::{LpProblem, MilpProblem, Sense};

use crate::model::{detour_matrix, validate_instance, Instance};
use crate::scenario::{Scenario, ScenarioSet};
use crate::Error;

/// Variants of the model selected at build time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Zero every unmet-demand penalty (generation-expansion view).
    pub ge_mode: bool,
    /// Upper bound on the number of opened stations.
    pub station_budget: Option<usize>,
    /// Pin `x` to these 0/1 values.
    pub fixed_siting: Option<Vec<f64>>,
    /// Pin `w` to these values.
    pub fixed_stock: Option<Vec<f64>>,
    /// Angle reference for the island containing this bus.
    pub reference_bus: Option<usize>,
    /// When false, only the transportation part of the second stage is modelled.
    pub include_grid: bool,
    /// Declare `w` integer as well as `x`.
    pub integer_stock: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            ge_mode: false,
            station_budget: None,
            fixed_siting: None,
            fixed_stock: None,
            reference_bus: None,
            include_grid: true,
            integer_stock: false,
        }
    }
}

/// Identity of one model column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum VarKey {
    X(usize),
    W(usize),
    T { station: usize, scenario: usize },
    S { station: usize, scenario: usize },
    Q { route: usize, scenario: usize },
    Y { station: usize, route: usize, scenario: usize },
    Alpha { line: usize, scenario: usize },
    Theta { bus: usize, scenario: usize },
    Delta { bus: usize, scenario: usize },
    Beta { generator: usize, scenario: usize },
}

impl fmt::Display for VarKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            VarKey::X(i) => write!(f, "x[{i}]"),
            VarKey::W(i) => write!(f, "w[{i}]"),
            VarKey::T { station, scenario } => write!(f, "t[{station}]@{scenario}"),
            VarKey::S { station, scenario } => write!(f, "s[{station}]@{scenario}"),
            VarKey::Q { route, scenario } => write!(f, "q[{route}]@{scenario}"),
            VarKey::Y { station, route, scenario } => write!(f, "y[{station},{route}]@{scenario}"),
            VarKey::Alpha { line, scenario } => write!(f, "alpha[{line}]@{scenario}"),
            VarKey::Theta { bus, scenario } => write!(f, "theta[{bus}]@{scenario}"),
            VarKey::Delta { bus, scenario } => write!(f, "delta[{bus}]@{scenario}"),
            VarKey::Beta { generator, scenario } => write!(f, "beta[{generator}]@{scenario}"),
        }
    }
}

/// Identity of one model row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RowKey {
    /// `L_i x_i - w_i <= 0`
    StockLower(usize),
    /// `w_i - U_i x_i <= 0`
    StockUpper(usize),
    /// `sum x <= K`
    Budget,
    /// `s_i + t_i - w_i <= 0`
    StationUse { station: usize, scenario: usize },
    /// `sum_i y_ij + q_j = d_j`
    RouteDemand { route: usize, scenario: usize },
    /// `sum_j y_ij - t_i <= 0`
    StationServe { station: usize, scenario: usize },
    /// Power balance at a bus.
    BusBalance { bus: usize, scenario: usize },
    /// DC flow relation on a line.
    FlowAngle { line: usize, scenario: usize },
}

impl fmt::Display for RowKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            RowKey::StockLower(i) => write!(f, "stock_lo[{i}]"),
            RowKey::StockUpper(i) => write!(f, "stock_hi[{i}]"),
            RowKey::Budget => write!(f, "budget"),
            RowKey::StationUse { station, scenario } => write!(f, "use[{station}]@{scenario}"),
            RowKey::RouteDemand { route, scenario } => write!(f, "demand[{route}]@{scenario}"),
            RowKey::StationServe { station, scenario } => write!(f, "serve[{station}]@{scenario}"),
            RowKey::BusBalance { bus, scenario } => write!(f, "balance[{bus}]@{scenario}"),
            RowKey::FlowAngle { line, scenario } => write!(f, "flow[{line}]@{scenario}"),
        }
    }
}

/// Bijection between [`VarKey`]s and column numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Registry {
    pub stations: usize,
    pub routes: usize,
    pub buses: usize,
    pub lines: usize,
    pub generators: usize,
    pub scenarios: usize,
    /// Whether `x` and `w` are columns (false for a standalone second stage).
    pub first_stage: bool,
    /// Whether grid columns exist.
    pub grid: bool,
    /// Reachable `(station, route)` pairs in column order.
    pub pairs: Vec<(usize, usize)>,
    pair_index: Vec<Vec<Option<usize>>>,
}

impl Registry {
    fn new(inst: &Instance, reach: &[Vec<Option<f64>>], scenarios: usize, first_stage: bool, grid: bool) -> Self {
        let mut pairs = Vec::new();
        let mut pair_index = vec![vec![None; inst.routes.len()]; inst.stations.len()];
        for (i, row) in reach.iter().enumerate() {
            for (j, c) in row.iter().enumerate() {
                if c.is_some() {
                    pair_index[i][j] = Some(pairs.len());
                    pairs.push((i, j));
                }
            }
        }
        Registry {
            stations: inst.stations.len(),
            routes: inst.routes.len(),
            buses: inst.buses.len(),
            lines: inst.lines.len(),
            generators: inst.generators.len(),
            scenarios,
            first_stage,
            grid,
            pairs,
            pair_index,
        }
    }

    fn first_stage_len(&self) -> usize {
        if self.first_stage {
            2 * self.stations
        } else {
            0
        }
    }

    fn grid_dims(&self) -> (usize, usize, usize) {
        if self.grid {
            (self.lines, self.buses, self.generators)
        } else {
            (0, 0, 0)
        }
    }

    /// Columns per scenario block.
    pub fn block_len(&self) -> usize {
        let (l, n, g) = self.grid_dims();
        2 * self.stations + self.routes + self.pairs.len() + l + 2 * n + g
    }

    pub fn num_columns(&self) -> usize {
        self.first_stage_len() + self.scenarios * self.block_len()
    }

    /// Offsets of t, s, q, y, alpha, theta, delta, beta within a block.
    fn offsets(&self) -> [usize; 8] {
        let (l, n, _) = self.grid_dims();
        let t = 0;
        let s = t + self.stations;
        let q = s + self.stations;
        let y = q + self.routes;
        let a = y + self.pairs.len();
        let th = a + l;
        let d = th + n;
        let b = d + n;
        [t, s, q, y, a, th, d, b]
    }

    fn block_start(&self, scenario: usize) -> usize {
        self.first_stage_len() + scenario * self.block_len()
    }

    pub fn pair(&self, station: usize, route: usize) -> Option<usize> {
        self.pair_index.get(station)?.get(route).copied().flatten()
    }

    /// Column of `key`, or `None` if the model has no such column.
    pub fn column(&self, key: VarKey) -> Option<usize> {
        let [t, s, q, y, a, th, d, b] = self.offsets();
        let (nl, nn, ng) = self.grid_dims();
        let in_block = |scenario: usize, base: usize, k: usize, len: usize| {
            (scenario < self.scenarios && k < len).then(|| self.block_start(scenario) + base + k)
        };
        match key {
            VarKey::X(i) => (self.first_stage && i < self.stations).then_some(i),
            VarKey::W(i) => (self.first_stage && i < self.stations).then_some(self.stations + i),
            VarKey::T { station, scenario } => in_block(scenario, t, station, self.stations),
            VarKey::S { station, scenario } => in_block(scenario, s, station, self.stations),
            VarKey::Q { route, scenario } => in_block(scenario, q, route, self.routes),
            VarKey::Y { station, route, scenario } => {
                in_block(scenario, y, self.pair(station, route)?, self.pairs.len())
            }
            VarKey::Alpha { line, scenario } => in_block(scenario, a, line, nl),
            VarKey::Theta { bus, scenario } => in_block(scenario, th, bus, nn),
            VarKey::Delta { bus, scenario } => in_block(scenario, d, bus, nn),
            VarKey::Beta { generator, scenario } => in_block(scenario, b, generator, ng),
        }
    }

    /// Inverse of [`Registry::column`].
    pub fn key(&self, col: usize) -> VarKey {
        let fs = self.first_stage_len();
        if col < fs {
            return if col < self.stations { VarKey::X(col) } else { VarKey::W(col - self.stations) };
        }
        let scenario = (col - fs) / self.block_len();
        let k = (col - fs) % self.block_len();
        let [_, s, q, y, a, th, d, b] = self.offsets();
        if k < s {
            VarKey::T { station: k, scenario }
        } else if k < q {
            VarKey::S { station: k - s, scenario }
        } else if k < y {
            VarKey::Q { route: k - q, scenario }
        } else if k < a {
            let (station, route) = self.pairs[k - y];
            VarKey::Y { station, route, scenario }
        } else if k < th {
            VarKey::Alpha { line: k - a, scenario }
        } else if k < d {
            VarKey::Theta { bus: k - th, scenario }
        } else if k < b {
            VarKey::Delta { bus: k - d, scenario }
        } else {
            VarKey::Beta { generator: k - b, scenario }
        }
    }

    pub fn column_names(&self) -> Vec<String> {
        (0..self.num_columns()).map(|c| self.key(c).to_string()).collect()
    }
}

/// Assembled extensive form with column and row identities.
#[derive(Debug, Clone)]
pub struct MilpModel {
    pub problem: MilpProblem,
    pub registry: Registry,
    pub rows: Vec<RowKey>,
}

impl MilpModel {
    pub fn row_names(&self) -> Vec<String> {
        self.rows.iter().map(|r| r.to_string()).collect()
    }
}

enum Stock {
    Column(usize),
    Value(f64),
}

struct Assembler<'a> {
    inst: &'a Instance,
    reg: &'a Registry,
    detour: Vec<f64>,
    is_reference: Vec<bool>,
    ge_mode: bool,
    lp: LpProblem,
    rows: Vec<RowKey>,
}

impl Assembler<'_> {
    fn add_block(&mut self, scen: &Scenario, omega: usize, p: f64, stock: impl Fn(usize) -> Stock) {
        let inst = self.inst;
        let reg = self.reg;
        let col = |k: VarKey| reg.column(k).expect("registry covers every assembled column");
        for _ in 0..2 * reg.stations {
            self.lp.add_column(0.0, 0.0, f64::INFINITY);
        }
        for r in &inst.routes {
            let h = if self.ge_mode { 0.0 } else { r.unmet_penalty };
            self.lp.add_column(p * h, 0.0, f64::INFINITY);
        }
        for &c in &self.detour {
            self.lp.add_column(p * c, 0.0, f64::INFINITY);
        }
        if reg.grid {
            for l in &inst.lines {
                self.lp.add_column(0.0, -l.capacity, l.capacity);
            }
            for u in 0..reg.buses {
                let (lo, hi) = if self.is_reference[u] { (0.0, 0.0) } else { (f64::NEG_INFINITY, f64::INFINITY) };
                self.lp.add_column(0.0, lo, hi);
            }
            for (b, load) in inst.buses.iter().zip(&scen.bus_loads) {
                self.lp.add_column(p * b.shed_penalty, 0.0, *load);
            }
            for (cost, cap) in scen.gen_costs.iter().zip(&scen.gen_capacities) {
                self.lp.add_column(p * cost, 0.0, *cap);
            }
        }

        for i in 0..reg.stations {
            let mut coeffs = vec![
                (col(VarKey::S { station: i, scenario: omega }), 1.0),
                (col(VarKey::T { station: i, scenario: omega }), 1.0),
            ];
            let rhs = match stock(i) {
                Stock::Column(c) => {
                    coeffs.push((c, -1.0));
                    0.0
                }
                Stock::Value(v) => v,
            };
            self.lp.add_row(coeffs, Sense::Le, rhs);
            self.rows.push(RowKey::StationUse { station: i, scenario: omega });
        }
        for j in 0..reg.routes {
            let mut coeffs = vec![(col(VarKey::Q { route: j, scenario: omega }), 1.0)];
            for i in 0..reg.stations {
                if let Some(c) = reg.column(VarKey::Y { station: i, route: j, scenario: omega }) {
                    coeffs.push((c, 1.0));
                }
            }
            self.lp.add_row(coeffs, Sense::Eq, scen.route_demands[j] as f64);
            self.rows.push(RowKey::RouteDemand { route: j, scenario: omega });
        }
        for i in 0..reg.stations {
            let mut coeffs = vec![(col(VarKey::T { station: i, scenario: omega }), -1.0)];
            for j in 0..reg.routes {
                if let Some(c) = reg.column(VarKey::Y { station: i, route: j, scenario: omega }) {
                    coeffs.push((c, 1.0));
                }
            }
            self.lp.add_row(coeffs, Sense::Le, 0.0);
            self.rows.push(RowKey::StationServe { station: i, scenario: omega });
        }
        if !reg.grid {
            return;
        }
        let mut balance: Vec<Vec<(usize, f64)>> = (0..reg.buses)
            .map(|u| vec![(col(VarKey::Delta { bus: u, scenario: omega }), -1.0)])
            .collect();
        for (l, line) in inst.lines.iter().enumerate() {
            let a = col(VarKey::Alpha { line: l, scenario: omega });
            balance[line.from_bus].push((a, 1.0));
            balance[line.to_bus].push((a, -1.0));
        }
        for (g, gen) in inst.generators.iter().enumerate() {
            balance[gen.bus].push((col(VarKey::Beta { generator: g, scenario: omega }), -1.0));
        }
        let a = inst.params.battery_power;
        for (i, st) in inst.stations.iter().enumerate() {
            balance[st.grid_bus].push((col(VarKey::S { station: i, scenario: omega }), -a));
        }
        for (u, coeffs) in balance.into_iter().enumerate() {
            self.lp.add_row(coeffs, Sense::Eq, -scen.bus_loads[u]);
            self.rows.push(RowKey::BusBalance { bus: u, scenario: omega });
        }
        for (l, line) in inst.lines.iter().enumerate() {
            let inv_b = 1.0 / line.reactance;
            self.lp.add_row(
                [
                    (col(VarKey::Alpha { line: l, scenario: omega }), 1.0),
                    (col(VarKey::Theta { bus: line.from_bus, scenario: omega }), -inv_b),
                    (col(VarKey::Theta { bus: line.to_bus, scenario: omega }), inv_b),
                ],
                Sense::Eq,
                0.0,
            );
            self.rows.push(RowKey::FlowAngle { line: l, scenario: omega });
        }
    }
}

fn check_instance(inst: &Instance) -> Result<(), Error> {
    let report = validate_instance(inst);
    if report.is_valid() {
        Ok(())
    } else {
        Err(Error::InvalidInstance(report))
    }
}

fn check_scenario(inst: &Instance, s: &Scenario) -> Result<(), Error> {
    let dims = [
        ("route_demands", s.route_demands.len(), inst.routes.len()),
        ("bus_loads", s.bus_loads.len(), inst.buses.len()),
        ("gen_capacities", s.gen_capacities.len(), inst.generators.len()),
        ("gen_costs", s.gen_costs.len(), inst.generators.len()),
    ];
    for (what, found, expected) in dims {
        if found != expected {
            return Err(Error::InvalidInput(format!(
                "scenario {}: {what} has {found} entries, instance needs {expected}",
                s.id
            )));
        }
    }
    let finite = s.bus_loads.iter().chain(&s.gen_capacities).chain(&s.gen_costs).all(|v| v.is_finite() && *v >= 0.0);
    if !finite || !(s.probability.is_finite() && s.probability >= 0.0) {
        return Err(Error::InvalidInput(format!("scenario {}: values must be finite and nonnegative", s.id)));
    }
    Ok(())
}

fn check_config(inst: &Instance, cfg: &ModelConfig) -> Result<(), Error> {
    let n = inst.stations.len();
    if let Some(xs) = &cfg.fixed_siting {
        if xs.len() != n {
            return Err(Error::InvalidInput(format!("fixed siting has {} entries for {n} stations", xs.len())));
        }
        if let Some(i) = xs.iter().position(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::FractionalSiting { station: i, value: xs[i] });
        }
    }
    if let Some(ws) = &cfg.fixed_stock {
        if ws.len() != n || ws.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("fixed stock must hold {n} finite values")));
        }
    }
    if let Some(r) = cfg.reference_bus {
        if r >= inst.buses.len() {
            return Err(Error::InvalidInput(format!("reference bus {r} does not exist")));
        }
    }
    Ok(())
}

fn reference_flags(inst: &Instance, cfg: &ModelConfig) -> Vec<bool> {
    let mut flags = vec![false; inst.buses.len()];
    for r in inst.reference_buses(cfg.reference_bus) {
        flags[r] = true;
    }
    flags
}

fn pair_costs(reg: &Registry, reach: &[Vec<Option<f64>>]) -> Vec<f64> {
    reg.pairs.iter().map(|&(i, j)| reach[i][j].unwrap_or_default()).collect()
}

/// Builds the deterministic equivalent over every scenario in `set`.
pub fn build_extensive_form(inst: &Instance, set: &ScenarioSet, cfg: &ModelConfig) -> Result<MilpModel, Error> {
    check_instance(inst)?;
    if set.scenarios.is_empty() {
        return Err(Error::EmptyScenarioSet);
    }
    for s in &set.scenarios {
        check_scenario(inst, s)?;
    }
    check_config(inst, cfg)?;
    let reach = detour_matrix(inst)?;
    let reg = Registry::new(inst, &reach, set.scenarios.len(), true, cfg.include_grid);
    let mut asm = Assembler {
        inst,
        reg: &reg,
        detour: pair_costs(&reg, &reach),
        is_reference: reference_flags(inst, cfg),
        ge_mode: cfg.ge_mode,
        lp: LpProblem::new(),
        rows: Vec::new(),
    };
    let n = inst.stations.len();
    for (i, st) in inst.stations.iter().enumerate() {
        let (lo, hi) = match &cfg.fixed_siting {
            Some(xs) => (xs[i], xs[i]),
            None => (0.0, 1.0),
        };
        asm.lp.add_column(st.fixed_cost, lo, hi);
    }
    for (i, st) in inst.stations.iter().enumerate() {
        let (lo, hi) = match &cfg.fixed_stock {
            Some(ws) => (ws[i], ws[i]),
            None => (0.0, st.max_batteries.max(0.0)),
        };
        asm.lp.add_column(st.per_battery_cost, lo, hi);
    }
    for (i, st) in inst.stations.iter().enumerate() {
        asm.lp.add_row([(i, st.min_batteries), (n + i, -1.0)], Sense::Le, 0.0);
        asm.rows.push(RowKey::StockLower(i));
        asm.lp.add_row([(n + i, 1.0), (i, -st.max_batteries)], Sense::Le, 0.0);
        asm.rows.push(RowKey::StockUpper(i));
    }
    if let Some(k) = cfg.station_budget {
        asm.lp.add_row((0..n).map(|i| (i, 1.0)), Sense::Le, k as f64);
        asm.rows.push(RowKey::Budget);
    }
    for (omega, scen) in set.scenarios.iter().enumerate() {
        asm.add_block(scen, omega, scen.probability, |i| Stock::Column(n + i));
    }
    let mut integer = vec![false; asm.lp.num_cols()];
    for i in 0..n {
        integer[i] = true;
        if cfg.integer_stock {
            integer[n + i] = true;
        }
    }
    debug_assert_eq!(asm.lp.num_cols(), reg.num_columns());
    let Assembler { lp, rows, .. } = asm;
    Ok(MilpModel { problem: MilpProblem { lp, integer }, registry: reg, rows })
}

/// Recourse LP of one scenario for fixed first-stage decisions.
#[derive(Debug, Clone)]
pub struct SecondStageLp {
    pub lp: LpProblem,
    pub registry: Registry,
    pub rows: Vec<RowKey>,
}

/// Builds the recourse problem `h(x, w, scenario)` with `x` and `w` as constants.
/// `ge_mode`, `include_grid` and `reference_bus` are taken from `cfg`.
pub fn build_second_stage_lp(
    inst: &Instance,
    scen: &Scenario,
    x: &[f64],
    w: &[f64],
    cfg: &ModelConfig,
) -> Result<SecondStageLp, Error> {
    check_instance(inst)?;
    check_scenario(inst, scen)?;
    check_config(inst, cfg)?;
    let n = inst.stations.len();
    if x.len() != n || w.len() != n {
        return Err(Error::InvalidInput(format!("x and w need {n} entries")));
    }
    if let Some(i) = x.iter().position(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::FractionalSiting { station: i, value: x[i] });
    }
    for (i, st) in inst.stations.iter().enumerate() {
        let tol = 1e-9 * st.max_batteries.abs().max(1.0);
        if w[i] < st.min_batteries * x[i] - tol || w[i] > st.max_batteries * x[i] + tol {
            return Err(Error::StockOutOfBounds { station: i, value: w[i] });
        }
    }
    let reach = detour_matrix(inst)?;
    let reg = Registry::new(inst, &reach, 1, false, cfg.include_grid);
    let mut asm = Assembler {
        inst,
        reg: &reg,
        detour: pair_costs(&reg, &reach),
        is_reference: reference_flags(inst, cfg),
        ge_mode: cfg.ge_mode,
        lp: LpProblem::new(),
        rows: Vec::new(),
    };
    asm.add_block(scen, 0, 1.0, |i| Stock::Value(w[i]));
    let Assembler { lp, rows, .. } = asm;
    Ok(SecondStageLp { lp, registry: reg, rows })
}

/// Recourse decisions of one scenario.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Recourse {
    pub t: Vec<f64>,
    pub s: Vec<f64>,
    pub q: Vec<f64>,
    /// Sparse `(station, route, value)` assignments over reachable pairs.
    pub y: Vec<(usize, usize, f64)>,
    pub alpha: Vec<f64>,
    pub theta: Vec<f64>,
    pub delta: Vec<f64>,
    pub beta: Vec<f64>,
}

/// First-stage siting and stock plus every scenario's recourse.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SitingSolution {
    pub x: Vec<f64>,
    pub w: Vec<f64>,
    pub scenarios: Vec<Recourse>,
}

impl SitingSolution {
    /// Reads a full column vector laid out by `reg`.
    pub fn from_columns(reg: &Registry, values: &[f64]) -> Self {
        let n = reg.stations;
        let (x, w) = if reg.first_stage { (values[..n].to_vec(), values[n..2 * n].to_vec()) } else { Default::default() };
        let (nl, nn, ng) = reg.grid_dims();
        let [t, s, q, y, a, th, d, b] = reg.offsets();
        let scenarios = (0..reg.scenarios)
            .map(|omega| {
                let blk = &values[reg.block_start(omega)..reg.block_start(omega) + reg.block_len()];
                Recourse {
                    t: blk[t..t + n].to_vec(),
                    s: blk[s..s + n].to_vec(),
                    q: blk[q..q + reg.routes].to_vec(),
                    y: reg.pairs.iter().zip(&blk[y..a]).map(|(&(i, j), &v)| (i, j, v)).collect(),
                    alpha: blk[a..a + nl].to_vec(),
                    theta: blk[th..th + nn].to_vec(),
                    delta: blk[d..d + nn].to_vec(),
                    beta: blk[b..b + ng].to_vec(),
                }
            })
            .collect();
        SitingSolution { x, w, scenarios }
    }

    /// Inverse of [`SitingSolution::from_columns`]. Fails if the shape does not match.
    pub fn to_columns(&self, reg: &Registry) -> Result<Vec<f64>, Error> {
        let mut out = vec![0.0; reg.num_columns()];
        let shape = |what: &str| Error::InvalidInput(format!("solution shape mismatch in {what}"));
        let put = |out: &mut Vec<f64>, key: VarKey, v: f64| -> Result<(), Error> {
            let c = reg.column(key).ok_or_else(|| shape(&key.to_string()))?;
            out[c] = v;
            Ok(())
        };
        if reg.first_stage {
            if self.x.len() != reg.stations || self.w.len() != reg.stations {
                return Err(shape("x/w"));
            }
            for i in 0..reg.stations {
                put(&mut out, VarKey::X(i), self.x[i])?;
                put(&mut out, VarKey::W(i), self.w[i])?;
            }
        }
        if self.scenarios.len() != reg.scenarios {
            return Err(shape("scenarios"));
        }
        let (nl, nn, ng) = reg.grid_dims();
        for (omega, r) in self.scenarios.iter().enumerate() {
            let lens = [
                (r.t.len(), reg.stations),
                (r.s.len(), reg.stations),
                (r.q.len(), reg.routes),
                (r.alpha.len(), nl),
                (r.theta.len(), nn),
                (r.delta.len(), nn),
                (r.beta.len(), ng),
            ];
            if lens.iter().any(|(a, b)| a != b) {
                return Err(shape(&format!("scenario {omega}")));
            }
            let scenario = omega;
            for i in 0..reg.stations {
                put(&mut out, VarKey::T { station: i, scenario }, r.t[i])?;
                put(&mut out, VarKey::S { station: i, scenario }, r.s[i])?;
            }
            for j in 0..reg.routes {
                put(&mut out, VarKey::Q { route: j, scenario }, r.q[j])?;
            }
            for &(station, route, v) in &r.y {
                put(&mut out, VarKey::Y { station, route, scenario }, v)?;
            }
            for l in 0..nl {
                put(&mut out, VarKey::Alpha { line: l, scenario }, r.alpha[l])?;
            }
            for u in 0..nn {
                put(&mut out, VarKey::Theta { bus: u, scenario }, r.theta[u])?;
                put(&mut out, VarKey::Delta { bus: u, scenario }, r.delta[u])?;
            }
            for g in 0..ng {
                put(&mut out, VarKey::Beta { generator: g, scenario }, r.beta[g])?;
            }
        }
        Ok(out)
    }

    pub fn opened(&self) -> usize {
        self.x.iter().filter(|&&v| v > 0.5).count()
    }
}

/// Category of a reported infeasibility.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ViolationKind {
    Shape,
    Integrality,
    FixedValue,
    VariableBound,
    AngleReference,
    LineLimit,
    GenerationLimit,
    ShedLimit,
    Row,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeasibilityViolation {
    pub kind: ViolationKind,
    /// Variable or row name, e.g. `serve[2]@3`.
    pub location: String,
    /// Amount by which the requirement is exceeded.
    pub amount: f64,
}

/// Signed row residuals `lhs - rhs` computed from raw instance data, in the same
/// orientation as the assembled rows.
pub fn raw_row_residuals(
    inst: &Instance,
    set: &ScenarioSet,
    cfg: &ModelConfig,
    sol: &SitingSolution,
) -> Result<Vec<(RowKey, Sense, f64)>, Error> {
    let n = inst.stations.len();
    if sol.x.len() != n || sol.w.len() != n || sol.scenarios.len() != set.scenarios.len() {
        return Err(Error::InvalidInput("solution shape does not match the instance".into()));
    }
    let mut out = Vec::new();
    for (i, st) in inst.stations.iter().enumerate() {
        out.push((RowKey::StockLower(i), Sense::Le, st.min_batteries * sol.x[i] - sol.w[i]));
        out.push((RowKey::StockUpper(i), Sense::Le, sol.w[i] - st.max_batteries * sol.x[i]));
    }
    if let Some(k) = cfg.station_budget {
        out.push((RowKey::Budget, Sense::Le, sol.x.iter().sum::<f64>() - k as f64));
    }
    for (scenario, (scen, r)) in set.scenarios.iter().zip(&sol.scenarios).enumerate() {
        let grid_ok = !cfg.include_grid
            || (r.alpha.len() == inst.lines.len()
                && r.theta.len() == inst.buses.len()
                && r.delta.len() == inst.buses.len()
                && r.beta.len() == inst.generators.len());
        if r.t.len() != n || r.s.len() != n || r.q.len() != inst.routes.len() || !grid_ok {
            return Err(Error::InvalidInput(format!("scenario {scenario}: recourse shape does not match")));
        }
        let mut served = vec![0.0; n];
        let mut delivered = vec![0.0; inst.routes.len()];
        for &(i, j, v) in &r.y {
            if i >= n || j >= inst.routes.len() {
                return Err(Error::InvalidInput(format!("scenario {scenario}: assignment ({i}, {j}) out of range")));
            }
            served[i] += v;
            delivered[j] += v;
        }
        for i in 0..n {
            out.push((RowKey::StationUse { station: i, scenario }, Sense::Le, r.s[i] + r.t[i] - sol.w[i]));
        }
        for j in 0..inst.routes.len() {
            let res = delivered[j] + r.q[j] - scen.route_demands[j] as f64;
            out.push((RowKey::RouteDemand { route: j, scenario }, Sense::Eq, res));
        }
        for i in 0..n {
            out.push((RowKey::StationServe { station: i, scenario }, Sense::Le, served[i] - r.t[i]));
        }
        if !cfg.include_grid {
            continue;
        }
        let mut net: Vec<f64> = (0..inst.buses.len()).map(|u| scen.bus_loads[u] - r.delta[u]).collect();
        for (l, line) in inst.lines.iter().enumerate() {
            net[line.from_bus] += r.alpha[l];
            net[line.to_bus] -= r.alpha[l];
        }
        for (g, gen) in inst.generators.iter().enumerate() {
            net[gen.bus] -= r.beta[g];
        }
        for (i, st) in inst.stations.iter().enumerate() {
            net[st.grid_bus] -= inst.params.battery_power * r.s[i];
        }
        for (bus, res) in net.into_iter().enumerate() {
            out.push((RowKey::BusBalance { bus, scenario }, Sense::Eq, res));
        }
        for (l, line) in inst.lines.iter().enumerate() {
            let res = r.alpha[l] - (r.theta[line.from_bus] - r.theta[line.to_bus]) / line.reactance;
            out.push((RowKey::FlowAngle { line: l, scenario }, Sense::Eq, res));
        }
    }
    Ok(out)
}

/// Re-evaluates every constraint, bound and integrality requirement against raw
/// data and lists those violated by more than `tol`.
pub fn check_solution_feasibility(
    inst: &Instance,
    set: &ScenarioSet,
    cfg: &ModelConfig,
    sol: &SitingSolution,
    tol: f64,
) -> Vec<FeasibilityViolation> {
    let mut out = Vec::new();
    let mut report = |kind: ViolationKind, location: String, amount: f64| {
        if amount > tol || amount.is_nan() {
            out.push(FeasibilityViolation { kind, location, amount });
        }
    };
    let rows = match raw_row_residuals(inst, set, cfg, sol) {
        Ok(rows) => rows,
        Err(e) => {
            report(ViolationKind::Shape, e.to_string(), f64::INFINITY);
            return out;
        }
    };
    for (key, sense, res) in rows {
        let amount = match sense {
            Sense::Le => res,
            Sense::Ge => -res,
            Sense::Eq => res.abs(),
        };
        report(ViolationKind::Row, key.to_string(), amount);
    }
    let below = |v: f64, lo: f64| lo - v;
    let above = |v: f64, hi: f64| v - hi;
    for (i, st) in inst.stations.iter().enumerate() {
        let x = sol.x[i];
        report(ViolationKind::Integrality, VarKey::X(i).to_string(), (x - x.round()).abs());
        report(ViolationKind::VariableBound, VarKey::X(i).to_string(), below(x, 0.0).max(above(x, 1.0)));
        report(ViolationKind::VariableBound, VarKey::W(i).to_string(), below(sol.w[i], 0.0));
        report(ViolationKind::VariableBound, VarKey::W(i).to_string(), above(sol.w[i], st.max_batteries.max(0.0)));
        if cfg.integer_stock {
            report(ViolationKind::Integrality, VarKey::W(i).to_string(), (sol.w[i] - sol.w[i].round()).abs());
        }
        if let Some(xs) = &cfg.fixed_siting {
            report(ViolationKind::FixedValue, VarKey::X(i).to_string(), (x - xs.get(i).copied().unwrap_or(f64::NAN)).abs());
        }
        if let Some(ws) = &cfg.fixed_stock {
            let fixed = ws.get(i).copied().unwrap_or(f64::NAN);
            report(ViolationKind::FixedValue, VarKey::W(i).to_string(), (sol.w[i] - fixed).abs());
        }
    }
    let refs = reference_flags(inst, cfg);
    for (scenario, (scen, r)) in set.scenarios.iter().zip(&sol.scenarios).enumerate() {
        for i in 0..inst.stations.len() {
            report(ViolationKind::VariableBound, VarKey::T { station: i, scenario }.to_string(), -r.t[i]);
            report(ViolationKind::VariableBound, VarKey::S { station: i, scenario }.to_string(), -r.s[i]);
        }
        for (route, q) in r.q.iter().enumerate() {
            report(ViolationKind::VariableBound, VarKey::Q { route, scenario }.to_string(), -q);
        }
        for &(station, route, v) in &r.y {
            report(ViolationKind::VariableBound, VarKey::Y { station, route, scenario }.to_string(), -v);
        }
        if !cfg.include_grid {
            continue;
        }
        for (line, l) in inst.lines.iter().enumerate() {
            report(ViolationKind::LineLimit, VarKey::Alpha { line, scenario }.to_string(), r.alpha[line].abs() - l.capacity);
        }
        for bus in 0..inst.buses.len() {
            let d = r.delta[bus];
            let name = VarKey::Delta { bus, scenario }.to_string();
            report(ViolationKind::ShedLimit, name, (-d).max(d - scen.bus_loads[bus]));
            if refs[bus] {
                report(ViolationKind::AngleReference, VarKey::Theta { bus, scenario }.to_string(), r.theta[bus].abs());
            }
        }
        for generator in 0..inst.generators.len() {
            let b = r.beta[generator];
            let name = VarKey::Beta { generator, scenario }.to_string();
            report(ViolationKind::GenerationLimit, name, (-b).max(b - scen.gen_capacities[generator]));
        }
    }
    out
}

/// First-stage cost `sum f x + r w`.
pub fn first_stage_cost(inst: &Instance, x: &[f64], w: &[f64]) -> f64 {
    inst.stations.iter().zip(x.iter().zip(w)).map(|(s, (x, w))| s.fixed_cost * x + s.per_battery_cost * w).sum()
}
