//! Brute-force reference implementations for tests.
//!
//! Nothing here shares code with the solver paths it checks: linear systems
//! are solved by dense Gaussian elimination, LPs by enumerating basic
//! solutions, and lattice distances by breadth-first search.

use std::collections::VecDeque;

use v2g_milp::{LpProblem, Sense};

/// Solves the dense square system `a x = b` with partial pivoting.
/// Returns `None` when the matrix is (numerically) singular.
pub fn gauss_solve(a: &[Vec<f64>], b: &[f64]) -> Option<Vec<f64>> {
    let n = b.len();
    let mut m: Vec<Vec<f64>> = a.iter().zip(b).map(|(row, &bi)| {
        let mut r = row.clone();
        r.push(bi);
        r
    }).collect();
    for k in 0..n {
        let p = (k..n).max_by(|&i, &j| m[i][k].abs().total_cmp(&m[j][k].abs()))?;
        if m[p][k].abs() < 1e-10 {
            return None;
        }
        m.swap(k, p);
        for i in k + 1..n {
            let f = m[i][k] / m[k][k];
            if f != 0.0 {
                for c in k..=n {
                    m[i][c] -= f * m[k][c];
                }
            }
        }
    }
    let mut x = vec![0.0; n];
    for k in (0..n).rev() {
        let s: f64 = (k + 1..n).map(|c| m[k][c] * x[c]).sum();
        x[k] = (m[k][n] - s) / m[k][k];
    }
    Some(x)
}

/// Outcome of [`enumerate_vertices`].
#[derive(Debug, Clone, PartialEq)]
pub enum VertexOptimum {
    Optimal { objective: f64, x: Vec<f64> },
    Infeasible,
}

/// Minimizes an LP with finite column bounds by trying every basic solution
/// (every choice of `n` active hyperplanes among rows and bounds).
pub fn enumerate_vertices(lp: &LpProblem, feas_tol: f64) -> VertexOptimum {
    let n = lp.num_cols();
    assert!(lp.col_lower.iter().chain(&lp.col_upper).all(|v| v.is_finite()), "oracle needs a bounded box");
    let mut planes: Vec<(Vec<f64>, f64)> = Vec::new();
    for row in &lp.rows {
        let mut a = vec![0.0; n];
        for &(j, v) in &row.coeffs {
            a[j] += v;
        }
        planes.push((a, row.rhs));
    }
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        planes.push((e.clone(), lp.col_lower[j]));
        planes.push((e, lp.col_upper[j]));
    }

    let feasible = |x: &[f64]| {
        let rows_ok = lp.rows.iter().all(|row| {
            let lhs: f64 = row.coeffs.iter().map(|&(j, v)| v * x[j]).sum();
            match row.sense {
                Sense::Le => lhs <= row.rhs + feas_tol,
                Sense::Ge => lhs >= row.rhs - feas_tol,
                Sense::Eq => (lhs - row.rhs).abs() <= feas_tol,
            }
        });
        rows_ok && (0..n).all(|j| x[j] >= lp.col_lower[j] - feas_tol && x[j] <= lp.col_upper[j] + feas_tol)
    };

    let mut best: Option<(f64, Vec<f64>)> = None;
    let mut pick = Vec::with_capacity(n);
    combinations(planes.len(), n, 0, &mut pick, &mut |idx| {
        let a: Vec<Vec<f64>> = idx.iter().map(|&k| planes[k].0.clone()).collect();
        let b: Vec<f64> = idx.iter().map(|&k| planes[k].1).collect();
        if let Some(x) = gauss_solve(&a, &b) {
            if feasible(&x) {
                let obj: f64 = lp.objective.iter().zip(&x).map(|(c, v)| c * v).sum();
                if best.as_ref().is_none_or(|(o, _)| obj < *o) {
                    best = Some((obj, x));
                }
            }
        }
    });
    match best {
        Some((objective, x)) => VertexOptimum::Optimal { objective, x },
        None => VertexOptimum::Infeasible,
    }
}

fn combinations(total: usize, k: usize, start: usize, pick: &mut Vec<usize>, f: &mut impl FnMut(&[usize])) {
    if pick.len() == k {
        f(pick);
        return;
    }
    for i in start..total {
        if total - i < k - pick.len() {
            break;
        }
        pick.push(i);
        combinations(total, k, i + 1, pick, f);
        pick.pop();
    }
}

/// Hop distances from `source` in an unweighted undirected graph, `None` for unreachable nodes.
pub fn bfs_hops(num_nodes: usize, edges: &[(usize, usize)], source: usize) -> Vec<Option<usize>> {
    let mut adj = vec![Vec::new(); num_nodes];
    for &(a, b) in edges {
        adj[a].push(b);
        adj[b].push(a);
    }
    let mut dist = vec![None; num_nodes];
    dist[source] = Some(0);
    let mut queue = VecDeque::from([source]);
    while let Some(u) = queue.pop_front() {
        let d = dist[u].unwrap();
        for &v in &adj[u] {
            if dist[v].is_none() {
                dist[v] = Some(d + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Relative difference with a unit floor on the scale.
pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_solves_3x3() {
        let a = vec![vec![2.0, 1.0, -1.0], vec![-3.0, -1.0, 2.0], vec![-2.0, 1.0, 2.0]];
        let x = gauss_solve(&a, &[8.0, -11.0, -3.0]).unwrap();
        for (v, e) in x.iter().zip([2.0, 3.0, -1.0]) {
            assert!((v - e).abs() < 1e-12);
        }
    }

    #[test]
    fn vertex_enumeration_on_box() {
        let mut lp = LpProblem::new();
        let x = lp.add_column(-1.0, 0.0, 2.0);
        let y = lp.add_column(-1.0, 0.0, 2.0);
        lp.add_row([(x, 1.0), (y, 1.0)], Sense::Le, 3.0);
        match enumerate_vertices(&lp, 1e-9) {
            VertexOptimum::Optimal { objective, .. } => assert!((objective + 3.0).abs() < 1e-12),
            other => panic!("{other:?}"),
        }
    }
}
