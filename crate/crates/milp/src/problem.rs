//! Linear and mixed-integer problem containers.

use serde::{Deserialize, Serialize};

use crate::ProblemError;

/// Sense of a constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sense {
    /// `a·x <= rhs`
    Le,
    /// `a·x = rhs`
    Eq,
    /// `a·x >= rhs`
    Ge,
}

/// One sparse constraint row. Entries are sorted by column and free of duplicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub coeffs: Vec<(usize, f64)>,
    pub sense: Sense,
    pub rhs: f64,
}

impl Row {
    pub fn activity(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(j, a)| a * x[j]).sum()
    }

    /// Amount by which `x` violates this row (zero when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.activity(x);
        match self.sense {
            Sense::Le => (lhs - self.rhs).max(0.0),
            Sense::Ge => (self.rhs - lhs).max(0.0),
            Sense::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// A minimization LP: `min c·x` subject to rows and column bounds.
///
/// Infinite bounds are represented by `f64::INFINITY` / `f64::NEG_INFINITY`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct LpProblem {
    pub objective: Vec<f64>,
    pub col_lower: Vec<f64>,
    pub col_upper: Vec<f64>,
    pub rows: Vec<Row>,
}

impl LpProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_cols(&self) -> usize {
        self.objective.len()
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn num_nonzeros(&self) -> usize {
        self.rows.iter().map(|r| r.coeffs.len()).sum()
    }

    /// Appends a column and returns its index.
    pub fn add_column(&mut self, cost: f64, lower: f64, upper: f64) -> usize {
        self.objective.push(cost);
        self.col_lower.push(lower);
        self.col_upper.push(upper);
        self.objective.len() - 1
    }

    /// Appends a row, merging duplicate column entries and dropping exact zeros.
    pub fn add_row(&mut self, coeffs: impl IntoIterator<Item = (usize, f64)>, sense: Sense, rhs: f64) -> usize {
        let mut coeffs: Vec<(usize, f64)> = coeffs.into_iter().collect();
        coeffs.sort_by_key(|&(j, _)| j);
        let mut merged: Vec<(usize, f64)> = Vec::with_capacity(coeffs.len());
        for (j, a) in coeffs {
            match merged.last_mut() {
                Some(last) if last.0 == j => last.1 += a,
                _ => merged.push((j, a)),
            }
        }
        merged.retain(|&(_, a)| a != 0.0);
        self.rows.push(Row { coeffs: merged, sense, rhs });
        self.rows.len() - 1
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    /// Largest row or bound violation of `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let rows = self.rows.iter().map(|r| r.violation(x));
        let bounds = x
            .iter()
            .zip(self.col_lower.iter().zip(&self.col_upper))
            .map(|(&v, (&lo, &hi))| (lo - v).max(v - hi).max(0.0));
        rows.chain(bounds).fold(0.0, f64::max)
    }

    /// Checks dimensions, indices and numeric sanity.
    pub fn validate(&self) -> Result<(), ProblemError> {
        let n = self.num_cols();
        if self.col_lower.len() != n || self.col_upper.len() != n {
            return Err(ProblemError::Dimension {
                what: "column bounds",
                expected: n,
                found: self.col_lower.len().min(self.col_upper.len()),
            });
        }
        for (j, &c) in self.objective.iter().enumerate() {
            if !c.is_finite() {
                return Err(ProblemError::NonFinite(format!("objective[{j}]")));
            }
        }
        for j in 0..n {
            let (lo, hi) = (self.col_lower[j], self.col_upper[j]);
            if lo.is_nan() || hi.is_nan() || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
                return Err(ProblemError::NonFinite(format!("bounds of column {j}")));
            }
        }
        for (i, row) in self.rows.iter().enumerate() {
            if !row.rhs.is_finite() {
                return Err(ProblemError::NonFinite(format!("rhs of row {i}")));
            }
            let mut prev = None;
            for &(j, a) in &row.coeffs {
                if j >= n {
                    return Err(ProblemError::ColumnIndex { row: i, column: j, num_cols: n });
                }
                if !a.is_finite() {
                    return Err(ProblemError::NonFinite(format!("row {i}, column {j}")));
                }
                if prev == Some(j) {
                    return Err(ProblemError::DuplicateEntry { row: i, column: j });
                }
                prev = Some(j);
            }
        }
        Ok(())
    }
}

/// An LP with integrality restrictions on a subset of columns.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MilpProblem {
    pub lp: LpProblem,
    pub integer: Vec<bool>,
}

impl MilpProblem {
    pub fn new(lp: LpProblem) -> Self {
        let integer = vec![false; lp.num_cols()];
        MilpProblem { lp, integer }
    }

    pub fn num_integer(&self) -> usize {
        self.integer.iter().filter(|&&b| b).count()
    }

    pub fn is_binary(&self, j: usize) -> bool {
        self.integer[j] && self.lp.col_lower[j] >= 0.0 && self.lp.col_upper[j] <= 1.0
    }

    pub fn validate(&self) -> Result<(), ProblemError> {
        self.lp.validate()?;
        if self.integer.len() != self.lp.num_cols() {
            return Err(ProblemError::Dimension {
                what: "integrality flags",
                expected: self.lp.num_cols(),
                found: self.integer.len(),
            });
        }
        for (j, &int) in self.integer.iter().enumerate() {
            if int && !(self.lp.col_lower[j].is_finite() && self.lp.col_upper[j].is_finite()) {
                return Err(ProblemError::UnboundedInteger(j));
            }
        }
        Ok(())
    }
}

/// Numerical tolerances shared by the simplex and branch-and-bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// Primal feasibility (rows and bounds).
    pub primal: f64,
    /// Dual feasibility (reduced-cost sign).
    pub dual: f64,
    /// Smallest admissible pivot magnitude.
    pub pivot: f64,
    /// Distance from an integer below which a value counts as integral.
    pub integrality: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { primal: 1e-7, dual: 1e-7, pivot: 1e-9, integrality: 1e-6 }
    }
}
