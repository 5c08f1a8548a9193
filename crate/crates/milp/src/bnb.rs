//! Best-bound branch-and-bound over the simplex relaxation.
//!
//! Open nodes are kept in a priority queue ordered by their parent's LP
//! bound (ties by creation order), branching is on the most fractional
//! integer column (ties by lowest index), and each node re-solves its LP from
//! the parent's optimal basis. A rounding heuristic at the root seeds the
//! incumbent. The search stops once the relative gap
//! `(incumbent - bound) / max(1, |incumbent|)` reaches the target.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::problem::MilpProblem;
use crate::simplex::{solve_lp_warm, Basis, LpSolution, LpStatus, SimplexOptions};
use crate::ProblemError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MilpOptions {
    /// Relative optimality gap at which the search stops.
    pub gap_target: f64,
    pub node_limit: u64,
    /// Simplex iterations allowed across the whole search.
    pub iteration_limit: u64,
    pub simplex: SimplexOptions,
    /// Try rounded-up and nearest-rounded fixings of the root relaxation.
    pub root_heuristic: bool,
    /// Keep a trace of bound/incumbent after every node.
    pub record_events: bool,
}

impl Default for MilpOptions {
    fn default() -> Self {
        MilpOptions {
            gap_target: 0.01,
            node_limit: 100_000,
            iteration_limit: 1_000_000,
            simplex: SimplexOptions::default(),
            root_heuristic: true,
            record_events: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MilpStatus {
    /// Incumbent within the gap target of the proven bound.
    GapReached,
    Infeasible,
    /// The relaxation is unbounded.
    Unbounded,
    NodeLimit,
    IterationLimit,
}

/// Snapshot of the search after a node has been processed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BbEvent {
    pub node: u64,
    pub bound: f64,
    pub incumbent: Option<f64>,
    pub gap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpSolution {
    pub status: MilpStatus,
    /// Best integer-feasible point found.
    pub x: Option<Vec<f64>>,
    pub objective: Option<f64>,
    /// Proven lower bound on the optimum.
    pub bound: f64,
    pub gap: Option<f64>,
    pub nodes: u64,
    pub lp_iterations: u64,
    pub events: Vec<BbEvent>,
}

impl MilpSolution {
    pub fn has_incumbent(&self) -> bool {
        self.x.is_some()
    }
}

/// Relative gap with the `max(1, |incumbent|)` denominator.
pub fn relative_gap(incumbent: f64, bound: f64) -> f64 {
    ((incumbent - bound) / incumbent.abs().max(1.0)).max(0.0)
}

struct Node {
    id: u64,
    bound: f64,
    /// Bounds of the integer columns, in the order of `int_cols`.
    bounds: Vec<(f64, f64)>,
    basis: Option<Basis>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Node {}
impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Node {
    // Max-heap: the smallest bound (then the oldest node) compares greatest.
    fn cmp(&self, other: &Self) -> Ordering {
        other.bound.total_cmp(&self.bound).then_with(|| other.id.cmp(&self.id))
    }
}

struct Search {
    opts: MilpOptions,
    int_cols: Vec<usize>,
    work: crate::LpProblem,
    iterations: u64,
    incumbent: Option<(f64, Vec<f64>)>,
}

enum NodeLp {
    Solved(LpSolution),
    Infeasible,
    Unbounded,
    Exhausted,
}

impl Search {
    fn solve_node(&mut self, bounds: &[(f64, f64)], basis: Option<&Basis>) -> Result<NodeLp, ProblemError> {
        for (k, &j) in self.int_cols.iter().enumerate() {
            self.work.col_lower[j] = bounds[k].0;
            self.work.col_upper[j] = bounds[k].1;
        }
        let remaining = self.opts.iteration_limit.saturating_sub(self.iterations);
        let sopts = SimplexOptions { max_iterations: remaining, ..self.opts.simplex };
        let sol = solve_lp_warm(&self.work, &sopts, basis)?;
        self.iterations += sol.iterations;
        Ok(match sol.status {
            LpStatus::Optimal => NodeLp::Solved(sol),
            LpStatus::Infeasible => NodeLp::Infeasible,
            LpStatus::Unbounded => NodeLp::Unbounded,
            LpStatus::IterationLimit => NodeLp::Exhausted,
        })
    }

    fn most_fractional(&self, x: &[f64]) -> Option<usize> {
        let tol = self.opts.simplex.tolerances.integrality;
        let mut best: Option<(usize, f64)> = None;
        for (k, &j) in self.int_cols.iter().enumerate() {
            let frac = x[j] - x[j].floor();
            let dist = frac.min(1.0 - frac);
            if dist > tol && best.is_none_or(|(_, d)| dist > d) {
                best = Some((k, dist));
            }
        }
        best.map(|(k, _)| k)
    }

    fn offer(&mut self, objective: f64, x: Vec<f64>) {
        if self.incumbent.as_ref().is_none_or(|(v, _)| objective < *v) {
            self.incumbent = Some((objective, x));
        }
    }

    fn root_heuristic(&mut self, root: &LpSolution, root_bounds: &[(f64, f64)]) -> Result<(), ProblemError> {
        let roundings: [fn(f64) -> f64; 2] = [|v| (v - 1e-9).ceil(), f64::round];
        for round in roundings {
            let fixed: Vec<(f64, f64)> = self
                .int_cols
                .iter()
                .zip(root_bounds)
                .map(|(&j, &(lo, hi))| {
                    let v = round(root.x[j]).clamp(lo, hi);
                    (v, v)
                })
                .collect();
            if let NodeLp::Solved(sol) = self.solve_node(&fixed, root.basis.as_ref())? {
                self.offer(sol.objective, sol.x);
            }
        }
        Ok(())
    }
}

/// Solves `problem` by branch-and-bound to the configured gap.
pub fn solve_milp(problem: &MilpProblem, options: &MilpOptions) -> Result<MilpSolution, ProblemError> {
    problem.validate()?;
    let int_cols: Vec<usize> = (0..problem.lp.num_cols()).filter(|&j| problem.integer[j]).collect();
    let root_bounds: Vec<(f64, f64)> = int_cols
        .iter()
        .map(|&j| (problem.lp.col_lower[j].ceil(), problem.lp.col_upper[j].floor()))
        .collect();
    let mut search = Search {
        opts: *options,
        int_cols,
        work: problem.lp.clone(),
        iterations: 0,
        incumbent: None,
    };
    let mut events = Vec::new();
    let mut nodes = 0u64;

    let finish = |search: &Search, status: MilpStatus, bound: f64, nodes: u64, events: Vec<BbEvent>| {
        let (objective, x) = match &search.incumbent {
            Some((v, x)) => (Some(*v), Some(x.clone())),
            None => (None, None),
        };
        MilpSolution {
            status,
            gap: objective.map(|v| relative_gap(v, bound)),
            x,
            objective,
            bound,
            nodes,
            lp_iterations: search.iterations,
            events,
        }
    };

    if root_bounds.iter().any(|&(lo, hi)| lo > hi) {
        return Ok(finish(&search, MilpStatus::Infeasible, f64::INFINITY, 0, events));
    }
    let root = match search.solve_node(&root_bounds, None)? {
        NodeLp::Solved(sol) => sol,
        NodeLp::Infeasible => return Ok(finish(&search, MilpStatus::Infeasible, f64::INFINITY, 1, events)),
        NodeLp::Unbounded => return Ok(finish(&search, MilpStatus::Unbounded, f64::NEG_INFINITY, 1, events)),
        NodeLp::Exhausted => {
            return Ok(finish(&search, MilpStatus::IterationLimit, f64::NEG_INFINITY, 1, events))
        }
    };
    if options.root_heuristic && search.most_fractional(&root.x).is_some() {
        search.root_heuristic(&root, &root_bounds)?;
    }

    let mut heap = BinaryHeap::new();
    let mut next_id = 1u64;
    let mut pending = Some((root_bounds, root, f64::NEG_INFINITY));

    loop {
        // Evaluate the node whose LP is already solved (root), or pop the next one.
        let (bounds, sol, parent_bound) = match pending.take() {
            Some(p) => p,
            None => {
                let Some(node) = heap.pop() else {
                    let bound = search.incumbent.as_ref().map_or(f64::INFINITY, |(v, _)| *v);
                    let status = if search.incumbent.is_some() { MilpStatus::GapReached } else { MilpStatus::Infeasible };
                    return Ok(finish(&search, status, bound, nodes, events));
                };
                let node: Node = node;
                // Every open node is at least `node.bound`, and the incumbent caps the optimum.
                let global = search.incumbent.as_ref().map_or(node.bound, |(inc, _)| node.bound.min(*inc));
                if let Some((inc, _)) = &search.incumbent {
                    if relative_gap(*inc, global) <= options.gap_target {
                        return Ok(finish(&search, MilpStatus::GapReached, global, nodes, events));
                    }
                }
                if nodes >= options.node_limit {
                    return Ok(finish(&search, MilpStatus::NodeLimit, global, nodes, events));
                }
                match search.solve_node(&node.bounds, node.basis.as_ref())? {
                    NodeLp::Solved(sol) => (node.bounds, sol, node.bound),
                    NodeLp::Infeasible => {
                        nodes += 1;
                        record(&mut events, options, nodes, &heap, &search);
                        continue;
                    }
                    NodeLp::Unbounded => {
                        return Ok(finish(&search, MilpStatus::Unbounded, f64::NEG_INFINITY, nodes, events))
                    }
                    NodeLp::Exhausted => {
                        return Ok(finish(&search, MilpStatus::IterationLimit, global, nodes, events))
                    }
                }
            }
        };
        nodes += 1;
        // A child's relaxation can never be below its parent's; clamp away roundoff.
        let node_bound = sol.objective.max(parent_bound);

        let prune = search
            .incumbent
            .as_ref()
            .is_some_and(|(inc, _)| node_bound >= *inc - 1e-9 * inc.abs().max(1.0));
        if !prune {
            match search.most_fractional(&sol.x) {
                None => search.offer(sol.objective, sol.x.clone()),
                Some(k) => {
                    let v = sol.x[search.int_cols[k]];
                    let mut down = bounds.clone();
                    down[k].1 = v.floor();
                    let mut up = bounds;
                    up[k].0 = v.ceil();
                    for child in [down, up] {
                        heap.push(Node { id: next_id, bound: node_bound, bounds: child, basis: sol.basis.clone() });
                        next_id += 1;
                    }
                }
            }
        }
        record(&mut events, options, nodes, &heap, &search);
        if search.iterations >= options.iteration_limit {
            let open = heap.peek().map_or(f64::INFINITY, |n: &Node| n.bound);
            let inc = search.incumbent.as_ref().map_or(f64::INFINITY, |(v, _)| *v);
            return Ok(finish(&search, MilpStatus::IterationLimit, open.min(inc), nodes, events));
        }
    }
}

fn record(events: &mut Vec<BbEvent>, opts: &MilpOptions, node: u64, heap: &BinaryHeap<Node>, search: &Search) {
    if !opts.record_events {
        return;
    }
    let inc = search.incumbent.as_ref().map(|(v, _)| *v);
    let open = heap.peek().map_or(f64::INFINITY, |n| n.bound);
    let bound = open.min(inc.unwrap_or(f64::INFINITY));
    events.push(BbEvent { node, bound, incumbent: inc, gap: inc.map(|v| relative_gap(v, bound)) });
}
