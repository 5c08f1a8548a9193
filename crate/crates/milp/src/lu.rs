//! Sparse LU factorization of simplex bases.
//!
//! Right-looking elimination with Markowitz pivot selection and threshold
//! partial pivoting. Singletons are taken first, so the mostly triangular
//! bases that LP problems produce factor with little fill. Basis updates are
//! kept as a product-form eta file on top of the factors.

use std::collections::BTreeSet;

const THRESHOLD: f64 = 0.01;
const ABS_PIVOT_TOL: f64 = 1e-11;
const SEARCH_COLUMNS: usize = 4;

/// Factors `P B Q = L U` of an `m x m` basis given by its sparse columns.
#[derive(Debug, Clone, Default)]
pub(crate) struct LuFactors {
    m: usize,
    pivot_row: Vec<usize>,
    pivot_col: Vec<usize>,
    pivot_val: Vec<f64>,
    l_start: Vec<usize>,
    l_idx: Vec<usize>,
    l_val: Vec<f64>,
    u_start: Vec<usize>,
    u_idx: Vec<usize>,
    u_val: Vec<f64>,
}

/// Rows and basis positions left without a pivot when the basis is singular.
#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Singular {
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

struct Active {
    rows: Vec<Vec<(usize, f64)>>,
    cols: Vec<Vec<usize>>,
    row_done: Vec<bool>,
    col_done: Vec<bool>,
    col_set: BTreeSet<(usize, usize)>,
    row_set: BTreeSet<(usize, usize)>,
}

impl Active {
    fn value(&self, r: usize, c: usize) -> f64 {
        self.rows[r].iter().find(|e| e.0 == c).map_or(0.0, |e| e.1)
    }

    fn col_max(&self, c: usize) -> f64 {
        self.cols[c].iter().map(|&r| self.value(r, c).abs()).fold(0.0, f64::max)
    }

    fn set_col_len(&mut self, c: usize, old: usize) {
        self.col_set.remove(&(old, c));
        if !self.col_done[c] {
            self.col_set.insert((self.cols[c].len(), c));
        }
    }

    fn set_row_len(&mut self, r: usize, old: usize) {
        self.row_set.remove(&(old, r));
        if !self.row_done[r] {
            self.row_set.insert((self.rows[r].len(), r));
        }
    }

    /// Picks a pivot `(row, col)` or reports that no acceptable pivot remains.
    fn select_pivot(&self) -> Option<(usize, usize)> {
        // Column singletons: no fill, and the entry is the column maximum.
        if let Some(&(1, c)) = self.col_set.iter().find(|&&(len, _)| len >= 1) {
            let r = self.cols[c][0];
            if self.value(r, c).abs() > ABS_PIVOT_TOL {
                return Some((r, c));
            }
        }
        // Row singletons that pass the threshold test.
        for &(len, r) in self.row_set.iter() {
            if len > 1 {
                break;
            }
            if len == 1 {
                let (c, v) = self.rows[r][0];
                let cmax = self.col_max(c);
                if v.abs() > ABS_PIVOT_TOL && v.abs() >= THRESHOLD * cmax {
                    return Some((r, c));
                }
            }
        }
        // Markowitz search over the sparsest columns.
        let mut best: Option<(usize, f64, usize, usize)> = None;
        let mut searched = 0;
        for &(len, c) in self.col_set.iter() {
            if len == 0 {
                continue;
            }
            let cmax = self.col_max(c);
            if cmax <= ABS_PIVOT_TOL {
                continue;
            }
            for &r in &self.cols[c] {
                let v = self.value(r, c).abs();
                if v < THRESHOLD * cmax || v <= ABS_PIVOT_TOL {
                    continue;
                }
                let cost = (self.rows[r].len() - 1) * (len - 1);
                let better = match best {
                    None => true,
                    Some((bc, bv, _, _)) => cost < bc || (cost == bc && v > bv),
                };
                if better {
                    best = Some((cost, v, r, c));
                }
            }
            if best.is_some() {
                searched += 1;
                if searched >= SEARCH_COLUMNS {
                    break;
                }
            }
        }
        best.map(|(_, _, r, c)| (r, c))
    }
}

impl LuFactors {
    /// Factors the basis whose column `k` is `columns[k]` (row index, value pairs).
    pub(crate) fn factor(m: usize, columns: &[Vec<(usize, f64)>]) -> Result<LuFactors, Singular> {
        debug_assert_eq!(columns.len(), m);
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); m];
        let mut cols: Vec<Vec<usize>> = vec![Vec::new(); m];
        for (c, col) in columns.iter().enumerate() {
            for &(r, v) in col {
                if v != 0.0 {
                    rows[r].push((c, v));
                    cols[c].push(r);
                }
            }
        }
        let col_set = cols.iter().enumerate().map(|(c, v)| (v.len(), c)).collect();
        let row_set = rows.iter().enumerate().map(|(r, v)| (v.len(), r)).collect();
        let mut act = Active {
            rows,
            cols,
            row_done: vec![false; m],
            col_done: vec![false; m],
            col_set,
            row_set,
        };

        let mut lu = LuFactors {
            m,
            l_start: vec![0],
            u_start: vec![0],
            ..Default::default()
        };
        let mut pos = vec![usize::MAX; m];

        for _ in 0..m {
            let Some((p, q)) = act.select_pivot() else { break };
            let pv = act.value(p, q);

            // Detach the pivot row from the active column patterns.
            let prow: Vec<(usize, f64)> = act.rows[p].iter().copied().filter(|e| e.0 != q).collect();
            for &(c, _) in &prow {
                let old = act.cols[c].len();
                if let Some(k) = act.cols[c].iter().position(|&r| r == p) {
                    act.cols[c].swap_remove(k);
                }
                act.set_col_len(c, old);
            }
            act.row_done[p] = true;
            act.col_done[q] = true;
            let old = act.rows[p].len();
            act.set_row_len(p, old);
            let old = act.cols[q].len();
            act.set_col_len(q, old);

            let targets: Vec<usize> = act.cols[q].iter().copied().filter(|&r| r != p).collect();
            for &r in &targets {
                let old_len = act.rows[r].len();
                let k = act.rows[r].iter().position(|e| e.0 == q).expect("pattern mismatch");
                let arq = act.rows[r].swap_remove(k).1;
                let mult = arq / pv;
                lu.l_idx.push(r);
                lu.l_val.push(mult);

                for (i, &(c, _)) in act.rows[r].iter().enumerate() {
                    pos[c] = i;
                }
                for &(c, apc) in &prow {
                    let delta = -mult * apc;
                    if pos[c] != usize::MAX {
                        act.rows[r][pos[c]].1 += delta;
                    } else {
                        pos[c] = act.rows[r].len();
                        act.rows[r].push((c, delta));
                        let oldc = act.cols[c].len();
                        act.cols[c].push(r);
                        act.set_col_len(c, oldc);
                    }
                }
                for &(c, _) in act.rows[r].iter() {
                    pos[c] = usize::MAX;
                }
                act.set_row_len(r, old_len);
            }
            act.cols[q].clear();
            act.rows[p].clear();

            lu.pivot_row.push(p);
            lu.pivot_col.push(q);
            lu.pivot_val.push(pv);
            lu.l_start.push(lu.l_idx.len());
            for (c, v) in prow {
                lu.u_idx.push(c);
                lu.u_val.push(v);
            }
            lu.u_start.push(lu.u_idx.len());
        }

        if lu.pivot_row.len() < m {
            let rows = (0..m).filter(|&r| !act.row_done[r]).collect();
            let cols = (0..m).filter(|&c| !act.col_done[c]).collect();
            return Err(Singular { rows, cols });
        }
        Ok(lu)
    }

    /// Solves `B x = b`. `rhs` is indexed by row and is overwritten; the
    /// solution is written to `out`, indexed by basis position.
    pub(crate) fn ftran(&self, rhs: &mut [f64], out: &mut [f64]) {
        for k in 0..self.m {
            let bp = rhs[self.pivot_row[k]];
            if bp != 0.0 {
                for e in self.l_start[k]..self.l_start[k + 1] {
                    rhs[self.l_idx[e]] -= self.l_val[e] * bp;
                }
            }
        }
        for k in (0..self.m).rev() {
            let mut s = rhs[self.pivot_row[k]];
            for e in self.u_start[k]..self.u_start[k + 1] {
                s -= self.u_val[e] * out[self.u_idx[e]];
            }
            out[self.pivot_col[k]] = s / self.pivot_val[k];
        }
    }

    /// Solves `B^T y = c`. `c` is indexed by basis position and is
    /// overwritten; `y` is indexed by row.
    pub(crate) fn btran(&self, c: &mut [f64], y: &mut [f64]) {
        for k in 0..self.m {
            let z = c[self.pivot_col[k]] / self.pivot_val[k];
            y[self.pivot_row[k]] = z;
            if z != 0.0 {
                for e in self.u_start[k]..self.u_start[k + 1] {
                    c[self.u_idx[e]] -= z * self.u_val[e];
                }
            }
        }
        for k in (0..self.m).rev() {
            let p = self.pivot_row[k];
            let mut s = y[p];
            for e in self.l_start[k]..self.l_start[k + 1] {
                s -= self.l_val[e] * y[self.l_idx[e]];
            }
            y[p] = s;
        }
    }

    pub(crate) fn nnz(&self) -> usize {
        self.l_idx.len() + self.u_idx.len() + self.m
    }
}

/// Product-form update `B_new = B E` after column `pos` was replaced.
#[derive(Debug, Clone)]
pub(crate) struct Eta {
    pos: usize,
    pivot: f64,
    entries: Vec<(usize, f64)>,
}

impl Eta {
    /// `alpha` is the entering column expressed in the old basis.
    pub(crate) fn new(pos: usize, alpha: &[f64]) -> Eta {
        let entries = alpha
            .iter()
            .enumerate()
            .filter(|&(i, &a)| i != pos && a != 0.0)
            .map(|(i, &a)| (i, a))
            .collect();
        Eta { pos, pivot: alpha[pos], entries }
    }

    pub(crate) fn len(&self) -> usize {
        self.entries.len() + 1
    }

    fn apply_ftran(&self, x: &mut [f64]) {
        let xr = x[self.pos] / self.pivot;
        x[self.pos] = xr;
        if xr != 0.0 {
            for &(i, a) in &self.entries {
                x[i] -= a * xr;
            }
        }
    }

    fn apply_btran(&self, c: &mut [f64]) {
        let mut s = c[self.pos];
        for &(i, a) in &self.entries {
            s -= a * c[i];
        }
        c[self.pos] = s / self.pivot;
    }
}

/// A factored basis plus its eta file.
#[derive(Debug, Clone, Default)]
pub(crate) struct BasisFactor {
    lu: LuFactors,
    etas: Vec<Eta>,
    eta_nnz: usize,
}

impl BasisFactor {
    pub(crate) fn new(lu: LuFactors) -> Self {
        BasisFactor { lu, etas: Vec::new(), eta_nnz: 0 }
    }

    pub(crate) fn num_updates(&self) -> usize {
        self.etas.len()
    }

    pub(crate) fn eta_nnz(&self) -> usize {
        self.eta_nnz
    }

    pub(crate) fn lu_nnz(&self) -> usize {
        self.lu.nnz()
    }

    pub(crate) fn push(&mut self, eta: Eta) {
        self.eta_nnz += eta.len();
        self.etas.push(eta);
    }

    pub(crate) fn ftran(&self, rhs: &mut [f64], out: &mut [f64]) {
        self.lu.ftran(rhs, out);
        for eta in &self.etas {
            eta.apply_ftran(out);
        }
    }

    pub(crate) fn btran(&self, c: &mut [f64], y: &mut [f64]) {
        for eta in self.etas.iter().rev() {
            eta.apply_btran(c);
        }
        self.lu.btran(c, y);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_columns(a: &[&[f64]]) -> Vec<Vec<(usize, f64)>> {
        let m = a.len();
        (0..m)
            .map(|c| (0..m).filter(|&r| a[r][c] != 0.0).map(|r| (r, a[r][c])).collect())
            .collect()
    }

    fn matvec(a: &[&[f64]], x: &[f64]) -> Vec<f64> {
        a.iter().map(|row| row.iter().zip(x).map(|(p, q)| p * q).sum()).collect()
    }

    #[test]
    fn solves_small_dense_system() {
        let a: &[&[f64]] = &[&[4.0, 1.0, 0.0], &[1.0, 3.0, 1.0], &[0.0, 1.0, 2.0]];
        let lu = LuFactors::factor(3, &dense_columns(a)).unwrap();
        let b = [1.0, 2.0, 3.0];
        let mut rhs = b;
        let mut x = [0.0; 3];
        lu.ftran(&mut rhs, &mut x);
        let back = matvec(a, &x);
        for i in 0..3 {
            assert!((back[i] - b[i]).abs() < 1e-12);
        }

        // B^T y = c
        let c = [1.0, -1.0, 0.5];
        let mut cw = c;
        let mut y = [0.0; 3];
        lu.btran(&mut cw, &mut y);
        for col in 0..3 {
            let s: f64 = (0..3).map(|r| a[r][col] * y[r]).sum();
            assert!((s - c[col]).abs() < 1e-12);
        }
    }

    #[test]
    fn needs_pivoting() {
        let a: &[&[f64]] = &[&[0.0, 1.0], &[1.0, 0.0]];
        let lu = LuFactors::factor(2, &dense_columns(a)).unwrap();
        let mut rhs = [3.0, 5.0];
        let mut x = [0.0; 2];
        lu.ftran(&mut rhs, &mut x);
        assert_eq!(x, [5.0, 3.0]);
    }

    #[test]
    fn reports_singular_rows_and_columns() {
        let a: &[&[f64]] = &[&[1.0, 2.0, 0.0], &[2.0, 4.0, 0.0], &[0.0, 0.0, 1.0]];
        let err = LuFactors::factor(3, &dense_columns(a)).unwrap_err();
        assert_eq!(err.rows.len(), 1);
        assert_eq!(err.cols.len(), 1);
    }

    #[test]
    fn eta_updates_track_column_replacement() {
        let a: &[&[f64]] = &[&[2.0, 0.0, 1.0], &[0.0, 1.0, 0.0], &[1.0, 0.0, 3.0]];
        let lu = LuFactors::factor(3, &dense_columns(a)).unwrap();
        let mut bf = BasisFactor::new(lu);
        // Replace column 1 by (1, 1, 1).
        let newcol = [1.0, 1.0, 1.0];
        let mut rhs = newcol;
        let mut alpha = [0.0; 3];
        bf.ftran(&mut rhs, &mut alpha);
        bf.push(Eta::new(1, &alpha));
        let b2: &[&[f64]] = &[&[2.0, 1.0, 1.0], &[0.0, 1.0, 0.0], &[1.0, 1.0, 3.0]];

        let b = [0.3, -1.0, 2.0];
        let mut rhs = b;
        let mut x = [0.0; 3];
        bf.ftran(&mut rhs, &mut x);
        let back = matvec(b2, &x);
        for i in 0..3 {
            assert!((back[i] - b[i]).abs() < 1e-12);
        }
        let c = [1.0, 2.0, 3.0];
        let mut cw = c;
        let mut y = [0.0; 3];
        bf.btran(&mut cw, &mut y);
        for col in 0..3 {
            let s: f64 = (0..3).map(|r| b2[r][col] * y[r]).sum();
            assert!((s - c[col]).abs() < 1e-12);
        }
    }
}
