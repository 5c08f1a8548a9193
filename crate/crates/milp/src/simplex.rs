//! Bounded-variable revised primal simplex.
//!
//! Every row `i` gets a logical variable `r_i = a_i·x` whose bounds encode the
//! row sense, so the working system is `[A | -I] (x, r) = 0` with all
//! restrictions expressed as variable bounds. Phase 1 minimizes the sum of
//! bound violations of the basic variables; phase 2 minimizes the objective.
//! Pricing is scaled Dantzig, the ratio test is the Harris two-pass test, and
//! a run of degenerate pivots switches to Bland's rule until progress resumes.

use serde::{Deserialize, Serialize};

use crate::lu::{BasisFactor, Eta, LuFactors};
use crate::problem::{LpProblem, Sense, Tolerances};
use crate::ProblemError;

/// Termination status of an LP solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    IterationLimit,
}

/// Position of a variable relative to the basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BasisStatus {
    Basic,
    AtLower,
    AtUpper,
    /// Nonbasic at zero strictly between its bounds (free columns).
    Zero,
}

/// A simplex basis over the `n` structural and `m` logical variables, usable
/// as a warm start for a problem with the same shape.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Basis {
    pub structural: Vec<BasisStatus>,
    pub logical: Vec<BasisStatus>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexOptions {
    pub tolerances: Tolerances,
    pub max_iterations: u64,
    /// Refactorize after this many basis updates.
    pub refactor_interval: usize,
    /// Consecutive degenerate pivots before switching to Bland's rule.
    pub bland_after: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            tolerances: Tolerances::default(),
            max_iterations: 1_000_000,
            refactor_interval: 100,
            bland_after: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LpSolution {
    pub status: LpStatus,
    /// Structural values (the last iterate when not optimal).
    pub x: Vec<f64>,
    pub objective: f64,
    /// Row duals `y` with reduced costs `c - A^T y`. Nonnegative on binding
    /// `>=` rows and nonpositive on binding `<=` rows.
    pub row_duals: Vec<f64>,
    pub reduced_costs: Vec<f64>,
    pub row_activity: Vec<f64>,
    pub iterations: u64,
    pub basis: Option<Basis>,
}

/// Solves `lp` from the all-logical basis.
pub fn solve_lp(lp: &LpProblem, options: &SimplexOptions) -> Result<LpSolution, ProblemError> {
    solve_lp_warm(lp, options, None)
}

/// Solves `lp`, starting from `basis` when it fits the problem.
pub fn solve_lp_warm(
    lp: &LpProblem,
    options: &SimplexOptions,
    basis: Option<&Basis>,
) -> Result<LpSolution, ProblemError> {
    lp.validate()?;
    let mut s = Simplex::new(lp, *options);
    if lp.col_lower.iter().zip(&lp.col_upper).any(|(l, u)| l > u) {
        return Ok(s.finish(LpStatus::Infeasible));
    }
    if basis.is_some_and(|b| s.load_basis(b)) {
        // A basis from a related problem is usually still dual feasible.
        if let Some(status) = s.dual_run() {
            return Ok(s.finish(status));
        }
    } else {
        s.slack_basis();
    }
    let status = s.run();
    Ok(s.finish(status))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum NonBasic {
    Lower,
    Upper,
    /// Between the bounds at its current value (free columns, or values left
    /// behind when a singular basis evicts a column).
    Between,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum State {
    Basic(usize),
    NonBasic(NonBasic),
}

enum Step {
    Flip,
    Pivot { pos: usize, to_upper: bool },
    Unbounded,
}

struct Simplex<'a> {
    lp: &'a LpProblem,
    opts: SimplexOptions,
    n: usize,
    m: usize,
    col_start: Vec<usize>,
    col_row: Vec<usize>,
    col_val: Vec<f64>,
    cost: Vec<f64>,
    lower: Vec<f64>,
    upper: Vec<f64>,
    price_scale: Vec<f64>,
    x: Vec<f64>,
    state: Vec<State>,
    basic: Vec<usize>,
    factor: BasisFactor,
    iterations: u64,
    // scratch
    work_row: Vec<f64>,
    work_pos: Vec<f64>,
    alpha: Vec<f64>,
    /// Positions where `alpha` exceeds the pivot tolerance.
    alpha_nz: Vec<usize>,
    y: Vec<f64>,
    // dual simplex state
    d: Vec<f64>,
    rho: Vec<f64>,
    row_alpha: Vec<f64>,
    row_mark: Vec<bool>,
    row_touched: Vec<usize>,
}

impl<'a> Simplex<'a> {
    fn new(lp: &'a LpProblem, opts: SimplexOptions) -> Self {
        let n = lp.num_cols();
        let m = lp.num_rows();
        let mut counts = vec![0usize; n + 1];
        for row in &lp.rows {
            for &(j, _) in &row.coeffs {
                counts[j + 1] += 1;
            }
        }
        for j in 0..n {
            counts[j + 1] += counts[j];
        }
        let col_start = counts.clone();
        let nnz = col_start[n];
        let mut col_row = vec![0; nnz];
        let mut col_val = vec![0.0; nnz];
        let mut fill = counts;
        for (i, row) in lp.rows.iter().enumerate() {
            for &(j, a) in &row.coeffs {
                col_row[fill[j]] = i;
                col_val[fill[j]] = a;
                fill[j] += 1;
            }
        }

        let mut cost = lp.objective.clone();
        cost.resize(n + m, 0.0);
        let mut lower = lp.col_lower.clone();
        let mut upper = lp.col_upper.clone();
        for row in &lp.rows {
            let (lo, hi) = match row.sense {
                Sense::Le => (f64::NEG_INFINITY, row.rhs),
                Sense::Ge => (row.rhs, f64::INFINITY),
                Sense::Eq => (row.rhs, row.rhs),
            };
            lower.push(lo);
            upper.push(hi);
        }
        let mut price_scale = Vec::with_capacity(n + m);
        for j in 0..n {
            let sq: f64 = col_val[col_start[j]..col_start[j + 1]].iter().map(|a| a * a).sum();
            price_scale.push(1.0 / (1.0 + sq).sqrt());
        }
        price_scale.resize(n + m, 1.0 / 2f64.sqrt());

        Simplex {
            lp,
            opts,
            n,
            m,
            col_start,
            col_row,
            col_val,
            cost,
            lower,
            upper,
            price_scale,
            x: vec![0.0; n + m],
            state: vec![State::NonBasic(NonBasic::Lower); n + m],
            basic: Vec::new(),
            factor: BasisFactor::default(),
            iterations: 0,
            work_row: vec![0.0; m],
            work_pos: vec![0.0; m],
            alpha: vec![0.0; m],
            alpha_nz: Vec::new(),
            y: vec![0.0; m],
            d: vec![0.0; n + m],
            rho: vec![0.0; m],
            row_alpha: vec![0.0; n + m],
            row_mark: vec![false; n + m],
            row_touched: Vec::new(),
        }
    }

    fn for_column(&self, j: usize, mut f: impl FnMut(usize, f64)) {
        if j < self.n {
            for e in self.col_start[j]..self.col_start[j + 1] {
                f(self.col_row[e], self.col_val[e]);
            }
        } else {
            f(j - self.n, -1.0);
        }
    }

    fn column(&self, j: usize) -> Vec<(usize, f64)> {
        let mut v = Vec::new();
        self.for_column(j, |i, a| v.push((i, a)));
        v
    }

    fn dot_column(&self, j: usize, y: &[f64]) -> f64 {
        if j < self.n {
            (self.col_start[j]..self.col_start[j + 1]).map(|e| self.col_val[e] * y[self.col_row[e]]).sum()
        } else {
            -y[j - self.n]
        }
    }

    /// Places a nonbasic variable at its preferred resting value.
    fn rest(&mut self, j: usize, hint: Option<BasisStatus>) {
        let (lo, hi) = (self.lower[j], self.upper[j]);
        let st = match hint {
            Some(BasisStatus::AtLower) if lo.is_finite() => NonBasic::Lower,
            Some(BasisStatus::AtUpper) if hi.is_finite() => NonBasic::Upper,
            _ => {
                if lo == 0.0 || (lo.is_finite() && lo > 0.0) {
                    NonBasic::Lower
                } else if hi == 0.0 || (hi.is_finite() && hi < 0.0) {
                    NonBasic::Upper
                } else {
                    NonBasic::Between
                }
            }
        };
        self.x[j] = match st {
            NonBasic::Lower => lo,
            NonBasic::Upper => hi,
            NonBasic::Between => 0.0,
        };
        self.state[j] = State::NonBasic(st);
    }

    fn slack_basis(&mut self) {
        for j in 0..self.n {
            self.rest(j, None);
        }
        self.basic = (self.n..self.n + self.m).collect();
        for (pos, &j) in self.basic.iter().enumerate() {
            self.state[j] = State::Basic(pos);
        }
        self.refactor();
    }

    fn load_basis(&mut self, b: &Basis) -> bool {
        if b.structural.len() != self.n || b.logical.len() != self.m {
            return false;
        }
        let statuses: Vec<BasisStatus> = b.structural.iter().chain(&b.logical).copied().collect();
        if statuses.iter().filter(|&&s| s == BasisStatus::Basic).count() != self.m {
            return false;
        }
        self.basic.clear();
        for (j, &st) in statuses.iter().enumerate() {
            if st == BasisStatus::Basic {
                self.state[j] = State::Basic(self.basic.len());
                self.basic.push(j);
            } else {
                self.rest(j, Some(st));
            }
        }
        self.refactor();
        true
    }

    /// Refactors the basis, repairing singularity with logicals, and
    /// recomputes the basic values from the nonbasic ones.
    fn refactor(&mut self) {
        loop {
            let cols: Vec<Vec<(usize, f64)>> = self.basic.iter().map(|&j| self.column(j)).collect();
            match LuFactors::factor(self.m, &cols) {
                Ok(lu) => {
                    self.factor = BasisFactor::new(lu);
                    break;
                }
                Err(sing) => {
                    for (&pos, &row) in sing.cols.iter().zip(&sing.rows) {
                        let out = self.basic[pos];
                        let v = self.x[out];
                        if v <= self.lower[out] {
                            self.rest(out, Some(BasisStatus::AtLower));
                        } else if v >= self.upper[out] {
                            self.rest(out, Some(BasisStatus::AtUpper));
                        } else {
                            self.state[out] = State::NonBasic(NonBasic::Between);
                        }
                        let inn = self.n + row;
                        self.basic[pos] = inn;
                        self.state[inn] = State::Basic(pos);
                    }
                }
            }
        }
        self.recompute_basic_values();
    }

    fn recompute_basic_values(&mut self) {
        self.work_row.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..self.n + self.m {
            if matches!(self.state[j], State::NonBasic(_)) && self.x[j] != 0.0 {
                let xj = self.x[j];
                let mut acc = std::mem::take(&mut self.work_row);
                self.for_column(j, |i, a| acc[i] -= a * xj);
                self.work_row = acc;
            }
        }
        let mut out = std::mem::take(&mut self.work_pos);
        self.factor.ftran(&mut self.work_row, &mut out);
        for (pos, &j) in self.basic.iter().enumerate() {
            self.x[j] = out[pos];
        }
        self.work_pos = out;
    }

    fn needs_refactor(&self) -> bool {
        self.factor.num_updates() >= self.opts.refactor_interval
            || self.factor.eta_nnz() > 2 * self.factor.lu_nnz() + 10 * self.m
    }

    /// Phase-1 cost of basic variable `j`, or `None` when it is feasible.
    fn infeasibility_cost(&self, j: usize) -> Option<f64> {
        let tol = self.opts.tolerances.primal;
        if self.x[j] < self.lower[j] - tol {
            Some(-1.0)
        } else if self.x[j] > self.upper[j] + tol {
            Some(1.0)
        } else {
            None
        }
    }

    fn compute_duals(&mut self, phase1: bool) {
        for (pos, &j) in self.basic.iter().enumerate() {
            self.work_pos[pos] = if phase1 { self.infeasibility_cost(j).unwrap_or(0.0) } else { self.cost[j] };
        }
        let mut y = std::mem::take(&mut self.y);
        self.factor.btran(&mut self.work_pos, &mut y);
        self.y = y;
    }

    fn reduced_cost(&self, j: usize, phase1: bool) -> f64 {
        let c = if phase1 { 0.0 } else { self.cost[j] };
        c - self.dot_column(j, &self.y)
    }

    /// Entering direction for nonbasic `j` with reduced cost `d`, if attractive.
    fn attractive(&self, j: usize, nb: NonBasic, d: f64) -> Option<f64> {
        let tol = self.opts.tolerances.dual;
        match nb {
            NonBasic::Lower if d < -tol => Some(1.0),
            NonBasic::Upper if d > tol => Some(-1.0),
            NonBasic::Between if d < -tol && self.x[j] < self.upper[j] => Some(1.0),
            NonBasic::Between if d > tol && self.x[j] > self.lower[j] => Some(-1.0),
            _ => None,
        }
    }

    /// Chooses the entering variable and its direction (+1 increase, -1 decrease):
    /// the largest scaled reduced cost, or the lowest index under Bland's rule.
    fn price(&self, phase1: bool, bland: bool) -> Option<(usize, f64)> {
        let mut best: Option<(usize, f64, f64)> = None;
        for j in 0..self.n + self.m {
            let State::NonBasic(nb) = self.state[j] else { continue };
            if self.lower[j] == self.upper[j] {
                continue;
            }
            let d = self.reduced_cost(j, phase1);
            let Some(dir) = self.attractive(j, nb, d) else { continue };
            if bland {
                return Some((j, dir));
            }
            let score = d.abs() * self.price_scale[j];
            if best.is_none_or(|b| score > b.2) {
                best = Some((j, dir, score));
            }
        }
        best.map(|(j, dir, _)| (j, dir))
    }

    fn ftran_column(&mut self, j: usize) {
        self.work_row.iter_mut().for_each(|v| *v = 0.0);
        let mut w = std::mem::take(&mut self.work_row);
        self.for_column(j, |i, a| w[i] = a);
        let mut alpha = std::mem::take(&mut self.alpha);
        self.factor.ftran(&mut w, &mut alpha);
        let piv = self.opts.tolerances.pivot;
        self.alpha_nz.clear();
        self.alpha_nz.extend((0..self.m).filter(|&p| alpha[p].abs() > piv));
        self.work_row = w;
        self.alpha = alpha;
    }

    /// Target bound for basic variable `j` moving at `rate`, or `None` if
    /// nothing stops it in that direction.
    fn target(&self, j: usize, rate: f64, phase1: bool) -> Option<(f64, bool)> {
        let tol = self.opts.tolerances.primal;
        let (lo, hi, v) = (self.lower[j], self.upper[j], self.x[j]);
        if rate < 0.0 {
            if phase1 && v > hi + tol {
                Some((hi, true))
            } else if phase1 && v < lo - tol {
                None
            } else if lo.is_finite() {
                Some((lo, false))
            } else {
                None
            }
        } else if phase1 && v < lo - tol {
            Some((lo, false))
        } else if phase1 && v > hi + tol {
            None
        } else if hi.is_finite() {
            Some((hi, true))
        } else {
            None
        }
    }

    fn ratio_test(&self, q: usize, dir: f64, phase1: bool, bland: bool) -> (Step, f64) {
        let tol = self.opts.tolerances.primal;
        let flip = if dir > 0.0 { self.upper[q] - self.x[q] } else { self.x[q] - self.lower[q] };

        // Pass 1: largest step with bounds relaxed by the tolerance.
        let mut relaxed = f64::INFINITY;
        for &pos in &self.alpha_nz {
            let (j, a) = (self.basic[pos], self.alpha[pos]);
            let rate = -dir * a;
            if let Some((b, _)) = self.target(j, rate, phase1) {
                let t = if rate < 0.0 { (self.x[j] - (b - tol)) / -rate } else { ((b + tol) - self.x[j]) / rate };
                relaxed = relaxed.min(t);
            }
        }
        if flip <= relaxed && flip.is_finite() {
            return (Step::Flip, flip.max(0.0));
        }
        if relaxed == f64::INFINITY {
            return (Step::Unbounded, f64::INFINITY);
        }

        // Pass 2: among steps within the relaxed limit take the largest pivot
        // (or the lowest variable index under Bland's rule).
        let mut exact_min = f64::INFINITY;
        if bland {
            for &pos in &self.alpha_nz {
                let (j, a) = (self.basic[pos], self.alpha[pos]);
                let rate = -dir * a;
                if let Some((b, _)) = self.target(j, rate, phase1) {
                    exact_min = exact_min.min(((b - self.x[j]) / rate).max(0.0));
                }
            }
        }
        let mut choice: Option<(usize, f64, bool, f64, usize)> = None;
        for &pos in &self.alpha_nz {
            let (j, a) = (self.basic[pos], self.alpha[pos]);
            let rate = -dir * a;
            let Some((b, upper)) = self.target(j, rate, phase1) else { continue };
            let t = ((b - self.x[j]) / rate).max(0.0);
            let admissible = if bland { t <= exact_min + 1e-12 } else { t <= relaxed };
            if !admissible {
                continue;
            }
            let better = match choice {
                None => true,
                Some((_, ba, _, _, bj)) => {
                    if bland {
                        j < bj
                    } else {
                        a.abs() > ba
                    }
                }
            };
            if better {
                choice = Some((pos, a.abs(), upper, t, j));
            }
        }
        match choice {
            Some((pos, _, to_upper, t, _)) => (Step::Pivot { pos, to_upper }, t),
            None => (Step::Unbounded, f64::INFINITY),
        }
    }

    /// Phase-2 reduced costs of every column (zero for basic ones).
    fn compute_all_reduced_costs(&mut self) {
        self.compute_duals(false);
        for j in 0..self.n + self.m {
            self.d[j] = match self.state[j] {
                State::Basic(_) => 0.0,
                State::NonBasic(_) => self.reduced_cost(j, false),
            };
        }
    }

    fn dual_feasible(&self) -> bool {
        let tol = self.opts.tolerances.dual;
        (0..self.n + self.m).all(|j| match self.state[j] {
            State::Basic(_) => true,
            State::NonBasic(_) if self.lower[j] == self.upper[j] => true,
            State::NonBasic(NonBasic::Lower) => self.d[j] >= -tol,
            State::NonBasic(NonBasic::Upper) => self.d[j] <= tol,
            State::NonBasic(NonBasic::Between) => self.d[j].abs() <= tol,
        })
    }

    /// Most infeasible basic variable: its position and the bound it must reach.
    fn dual_leaving(&self) -> Option<(usize, f64)> {
        let tol = self.opts.tolerances.primal;
        let mut best: Option<(usize, f64, f64)> = None;
        for (pos, &j) in self.basic.iter().enumerate() {
            let v = self.x[j];
            let (excess, bound) = if v < self.lower[j] - tol {
                (self.lower[j] - v, self.lower[j])
            } else if v > self.upper[j] + tol {
                (v - self.upper[j], self.upper[j])
            } else {
                continue;
            };
            if best.is_none_or(|b| excess > b.2) {
                best = Some((pos, bound, excess));
            }
        }
        best.map(|(pos, bound, _)| (pos, bound))
    }

    /// Row `pos` of `B^-1 [A | -I]` restricted to nonbasic columns, left in
    /// `row_alpha` with the touched columns listed in `row_touched`.
    fn pivot_row(&mut self, pos: usize) {
        self.work_pos.iter_mut().for_each(|v| *v = 0.0);
        self.work_pos[pos] = 1.0;
        let mut rho = std::mem::take(&mut self.rho);
        let mut unit = std::mem::take(&mut self.work_pos);
        self.factor.btran(&mut unit, &mut rho);
        self.work_pos = unit;
        for &j in &self.row_touched {
            self.row_alpha[j] = 0.0;
            self.row_mark[j] = false;
        }
        self.row_touched.clear();
        let lp = self.lp;
        for (i, &r) in rho.iter().enumerate() {
            if r == 0.0 {
                continue;
            }
            let logical = self.n + i;
            for &(j, a) in lp.rows[i].coeffs.iter().chain(std::iter::once(&(logical, -1.0))) {
                if matches!(self.state[j], State::Basic(_)) {
                    continue;
                }
                if !self.row_mark[j] {
                    self.row_mark[j] = true;
                    self.row_touched.push(j);
                }
                self.row_alpha[j] += r * a;
            }
        }
        self.rho = rho;
    }

    /// Dual ratio test for a leaving variable that must move in direction `s`
    /// (+1 up to its lower bound, -1 down to its upper bound).
    fn dual_ratio_test(&self, s: f64) -> Option<usize> {
        let tol = self.opts.tolerances.dual;
        let piv = self.opts.tolerances.pivot;
        let candidate = |j: usize| -> Option<(f64, f64)> {
            let State::NonBasic(nb) = self.state[j] else { return None };
            if self.lower[j] == self.upper[j] {
                return None;
            }
            let a = self.row_alpha[j];
            if a.abs() <= piv {
                return None;
            }
            let slack = match nb {
                NonBasic::Lower if s * a < 0.0 => self.d[j].max(0.0),
                NonBasic::Upper if s * a > 0.0 => (-self.d[j]).max(0.0),
                NonBasic::Between => self.d[j].abs(),
                _ => return None,
            };
            Some((slack, a.abs()))
        };
        let mut bound = f64::INFINITY;
        for &j in &self.row_touched {
            if let Some((slack, a)) = candidate(j) {
                bound = bound.min((slack + tol) / a);
            }
        }
        let mut best: Option<(usize, f64)> = None;
        for &j in &self.row_touched {
            if let Some((slack, a)) = candidate(j) {
                if slack / a <= bound && best.is_none_or(|(bj, ba)| a > ba || (a == ba && j < bj)) {
                    best = Some((j, a));
                }
            }
        }
        best.map(|(j, _)| j)
    }

    /// Bounded dual simplex from a dual feasible basis. Returns a final status
    /// when it settles the problem, or `None` to continue with the primal method
    /// (primal feasibility reached, dual feasibility lost, or too many steps).
    fn dual_run(&mut self) -> Option<LpStatus> {
        self.compute_all_reduced_costs();
        if !self.dual_feasible() {
            return None;
        }
        let budget = self.iterations + 10 * (self.m as u64) + 1000;
        loop {
            if self.iterations >= self.opts.max_iterations {
                return Some(LpStatus::IterationLimit);
            }
            if self.iterations >= budget {
                return None;
            }
            if self.needs_refactor() {
                self.refactor();
                self.compute_all_reduced_costs();
                if !self.dual_feasible() {
                    return None;
                }
            }
            let (r, bound) = self.dual_leaving()?;
            let leaving = self.basic[r];
            let s = if self.x[leaving] < bound { 1.0 } else { -1.0 };
            self.pivot_row(r);
            let Some(q) = self.dual_ratio_test(s) else {
                if self.factor.num_updates() == 0 {
                    return Some(LpStatus::Infeasible);
                }
                self.refactor();
                self.compute_all_reduced_costs();
                if !self.dual_feasible() {
                    return None;
                }
                continue;
            };
            self.ftran_column(q);
            let a_rq = self.alpha[r];
            let row_a = self.row_alpha[q];
            if a_rq.abs() <= self.opts.tolerances.pivot || (a_rq - row_a).abs() > 1e-6 * (1.0 + a_rq.abs()) {
                // Row and column disagree: the factorization has drifted.
                if self.factor.num_updates() == 0 {
                    return None;
                }
                self.refactor();
                self.compute_all_reduced_costs();
                if !self.dual_feasible() {
                    return None;
                }
                continue;
            }
            let theta_d = self.d[q] / row_a;
            for &j in &self.row_touched {
                self.d[j] -= theta_d * self.row_alpha[j];
            }
            self.d[q] = 0.0;
            self.d[leaving] = -theta_d;

            let delta = (self.x[leaving] - bound) / a_rq;
            self.x[q] += delta;
            for pos in 0..self.m {
                let a = self.alpha[pos];
                if a != 0.0 {
                    let j = self.basic[pos];
                    self.x[j] -= delta * a;
                }
            }
            self.x[leaving] = bound;
            let at_lower = bound == self.lower[leaving];
            self.state[leaving] = State::NonBasic(if at_lower { NonBasic::Lower } else { NonBasic::Upper });
            self.basic[r] = q;
            self.state[q] = State::Basic(r);
            self.factor.push(Eta::new(r, &self.alpha));
            self.iterations += 1;
        }
    }

    fn run(&mut self) -> LpStatus {
        let mut degenerate = 0usize;
        let mut bland = false;
        let mut fresh = true;
        loop {
            if self.iterations >= self.opts.max_iterations {
                return LpStatus::IterationLimit;
            }
            if self.needs_refactor() {
                self.refactor();
                fresh = true;
            }
            let phase1 = self.basic.iter().any(|&j| self.infeasibility_cost(j).is_some());
            self.compute_duals(phase1);
            let Some((q, dir)) = self.price(phase1, bland) else {
                if !fresh {
                    // Confirm termination on a fresh factorization.
                    self.refactor();
                    fresh = true;
                    continue;
                }
                return if phase1 { LpStatus::Infeasible } else { LpStatus::Optimal };
            };
            self.ftran_column(q);
            let (step, t) = self.ratio_test(q, dir, phase1, bland);
            if matches!(step, Step::Unbounded) {
                if phase1 || !fresh {
                    // Phase 1 is bounded below; this is numerical noise.
                    self.refactor();
                    fresh = true;
                    if phase1 {
                        bland = true;
                    }
                    continue;
                }
                return LpStatus::Unbounded;
            }
            self.iterations += 1;
            fresh = false;

            if t <= 1e-12 {
                degenerate += 1;
                if degenerate > self.opts.bland_after {
                    bland = true;
                }
            } else {
                degenerate = 0;
                bland = false;
            }

            self.x[q] += dir * t;
            if t != 0.0 {
                for pos in 0..self.m {
                    let a = self.alpha[pos];
                    if a != 0.0 {
                        let j = self.basic[pos];
                        self.x[j] -= dir * t * a;
                    }
                }
            }
            match step {
                Step::Flip => {
                    if dir > 0.0 {
                        self.x[q] = self.upper[q];
                        self.state[q] = State::NonBasic(NonBasic::Upper);
                    } else {
                        self.x[q] = self.lower[q];
                        self.state[q] = State::NonBasic(NonBasic::Lower);
                    }
                }
                Step::Pivot { pos, to_upper } => {
                    let out = self.basic[pos];
                    if to_upper {
                        self.x[out] = self.upper[out];
                        self.state[out] = State::NonBasic(NonBasic::Upper);
                    } else {
                        self.x[out] = self.lower[out];
                        self.state[out] = State::NonBasic(NonBasic::Lower);
                    }
                    self.basic[pos] = q;
                    self.state[q] = State::Basic(pos);
                    self.factor.push(Eta::new(pos, &self.alpha));
                }
                Step::Unbounded => unreachable!(),
            }
        }
    }

    fn finish(&mut self, status: LpStatus) -> LpSolution {
        let (n, m) = (self.n, self.m);
        let x: Vec<f64> = self.x[..n].to_vec();
        let row_activity: Vec<f64> = self.lp.rows.iter().map(|r| r.activity(&x)).collect();
        let objective = self.lp.objective_value(&x);
        let (row_duals, reduced_costs, basis) = if status == LpStatus::Optimal {
            self.compute_duals(false);
            let d = (0..n).map(|j| self.reduced_cost(j, false)).collect();
            let status_of = |j: usize| match self.state[j] {
                State::Basic(_) => BasisStatus::Basic,
                State::NonBasic(NonBasic::Lower) => BasisStatus::AtLower,
                State::NonBasic(NonBasic::Upper) => BasisStatus::AtUpper,
                State::NonBasic(NonBasic::Between) => BasisStatus::Zero,
            };
            let basis = Basis {
                structural: (0..n).map(status_of).collect(),
                logical: (n..n + m).map(status_of).collect(),
            };
            (self.y.clone(), d, Some(basis))
        } else {
            (vec![0.0; m], vec![0.0; n], None)
        };
        LpSolution { status, x, objective, row_duals, reduced_costs, row_activity, iterations: self.iterations, basis }
    }
}
