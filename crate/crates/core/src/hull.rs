//! Decides whether the origin lies strictly inside the convex hull of a point set.
//!
//! The test solves the linear program
//!
//! ```text
//! maximise t  subject to  sum_i p_i v_i = 0,  sum_i p_i = 1,  p_i >= t >= 0
//! ```
//!
//! with a dense two-phase simplex method (Bland's rule). The origin is an
//! interior point iff the optimum has `t > 0` and the points span the space.

use nalgebra::{DMatrix, SymmetricEigen};

const PIVOT_EPS: f64 = 1e-11;
const STRICT_EPS: f64 = 1e-12;

struct Tableau {
    rows: usize,
    cols: usize,
    a: Vec<f64>,
    basis: Vec<usize>,
}

impl Tableau {
    fn at(&self, i: usize, j: usize) -> f64 {
        self.a[i * self.cols + j]
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let cols = self.cols;
        let p = self.at(pr, pc);
        for j in 0..cols {
            self.a[pr * cols + j] /= p;
        }
        for i in 0..self.rows {
            if i == pr {
                continue;
            }
            let factor = self.at(i, pc);
            if factor != 0.0 {
                for j in 0..cols {
                    self.a[i * cols + j] -= factor * self.a[pr * cols + j];
                }
            }
        }
        self.basis[pr] = pc;
    }

    /// Maximises the objective stored in the last row (as reduced costs, the
    /// tableau convention `z - c x`). Only columns `< allowed` may enter.
    fn optimise(&mut self, allowed: usize) {
        let m = self.rows - 1;
        let rhs = self.cols - 1;
        for _ in 0..10_000 {
            // Bland: first column with negative reduced cost
            let Some(pc) = (0..allowed).find(|&j| self.at(m, j) < -PIVOT_EPS) else {
                return;
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..m {
                let a = self.at(i, pc);
                if a > PIVOT_EPS {
                    let ratio = self.at(i, rhs) / a;
                    match best {
                        Some((bi, br)) if ratio > br + 1e-15 || (ratio >= br - 1e-15 && self.basis[i] > self.basis[bi]) => {}
                        _ => best = Some((i, ratio)),
                    }
                }
            }
            match best {
                Some((pr, _)) => self.pivot(pr, pc),
                None => return,
            }
        }
    }
}

/// Largest `t` such that the origin is a convex combination of `points` with
/// every coefficient at least `t`. Returns `None` if the origin is outside
/// the hull.
fn max_min_weight(points: &[Vec<f64>], dim: usize) -> Option<f64> {
    let n = points.len();
    // columns: q_0..q_{n-1}, t, artificials a_0..a_dim, rhs
    let nvar = n + 1;
    let m = dim + 1;
    let cols = nvar + m + 1;
    let rows = m + 1;
    let mut a = vec![0.0; rows * cols];
    for l in 0..dim {
        let mut total = 0.0;
        for (i, p) in points.iter().enumerate() {
            a[l * cols + i] = p[l];
            total += p[l];
        }
        a[l * cols + n] = total;
    }
    for i in 0..n {
        a[dim * cols + i] = 1.0;
    }
    a[dim * cols + n] = n as f64;
    a[dim * cols + cols - 1] = 1.0;
    for r in 0..m {
        a[r * cols + nvar + r] = 1.0;
    }
    let mut tab = Tableau {
        rows,
        cols,
        a,
        basis: (nvar..nvar + m).collect(),
    };
    // phase 1: maximise -sum(artificials); reduced costs = -sum of constraint rows
    for j in 0..cols {
        if (nvar..nvar + m).contains(&j) {
            continue;
        }
        let s: f64 = (0..m).map(|r| tab.at(r, j)).sum();
        tab.a[m * cols + j] = -s;
    }
    tab.optimise(nvar);
    let infeasibility = -tab.at(m, cols - 1);
    if infeasibility.abs() > 1e-9 {
        return None;
    }
    // drive remaining artificials out of the basis where possible
    for r in 0..m {
        if tab.basis[r] >= nvar {
            if let Some(j) = (0..nvar).find(|&j| tab.at(r, j).abs() > PIVOT_EPS) {
                tab.pivot(r, j);
            }
        }
    }
    // phase 2: maximise t, ignoring artificial columns
    for j in 0..cols {
        tab.a[m * cols + j] = 0.0;
    }
    tab.a[m * cols + n] = -1.0;
    for r in 0..m {
        let b = tab.basis[r];
        let c = tab.at(m, b);
        if c != 0.0 {
            for j in 0..cols {
                tab.a[m * cols + j] -= c * tab.at(r, j);
            }
        }
    }
    tab.optimise(nvar);
    Some(tab.at(m, cols - 1))
}

/// True iff the origin is an interior point of the convex hull of `points`.
pub fn origin_in_interior(points: &[Vec<f64>]) -> bool {
    let Some(dim) = points.first().map(Vec::len) else {
        return false;
    };
    if dim == 1 {
        let lo = points.iter().map(|p| p[0]).fold(f64::INFINITY, f64::min);
        let hi = points.iter().map(|p| p[0]).fold(f64::NEG_INFINITY, f64::max);
        return lo < 0.0 && hi > 0.0;
    }
    if points.len() < dim + 1 {
        return false;
    }
    // positive rescaling keeps the cone, and hence the answer, unchanged
    let unit: Vec<Vec<f64>> = points
        .iter()
        .map(|p| {
            let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                p.iter().map(|v| v / norm).collect()
            } else {
                p.clone()
            }
        })
        .collect();
    let mut scatter = DMatrix::<f64>::zeros(dim, dim);
    for p in &unit {
        for s in 0..dim {
            for t in 0..dim {
                scatter[(s, t)] += p[s] * p[t];
            }
        }
    }
    let eig = SymmetricEigen::new(scatter);
    let min_eig = eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min);
    if min_eig <= 1e-10 * unit.len() as f64 {
        return false;
    }
    matches!(max_min_weight(&unit, dim), Some(t) if t > STRICT_EPS)
}
