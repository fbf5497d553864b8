//! Exhaustive vertex enumeration for small polyhedra `{g : A g ≥ b}`.
//!
//! Every vertex is the unique solution of some `n` linearly independent
//! active constraints. Subsets are explored depth-first with an incremental
//! row-echelon form; a branch is abandoned as soon as the chosen rows become
//! dependent, since no superset of a dependent set can be a basis.

use crate::error::{Error, Result};

const RANK_TOL: f64 = 1e-9;

#[derive(Clone, Debug)]
pub struct Polyhedron {
    dim: usize,
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
}

impl Polyhedron {
    pub fn new(dim: usize) -> Self {
        Polyhedron {
            dim,
            rows: Vec::new(),
            rhs: Vec::new(),
        }
    }

    /// Adds the half-space `row · g ≥ rhs`.
    pub fn push(&mut self, row: Vec<f64>, rhs: f64) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::domain(format!(
                "constraint has {} coefficients, expected {}",
                row.len(),
                self.dim
            )));
        }
        self.rows.push(row);
        self.rhs.push(rhs);
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_constraints(&self) -> usize {
        self.rows.len()
    }

    /// Largest violation `max(0, b_k − a_k·g)` over all constraints.
    pub fn max_violation(&self, g: &[f64]) -> f64 {
        self.rows
            .iter()
            .zip(&self.rhs)
            .map(|(row, b)| b - row.iter().zip(g).map(|(a, x)| a * x).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Calls `visit` on every feasible vertex (feasibility up to `feas_tol`).
    /// Degenerate vertices are visited once per basis that produces them.
    pub fn for_each_vertex(&self, feas_tol: f64, mut visit: impl FnMut(&[f64])) {
        let n = self.dim;
        if n == 0 {
            visit(&[]);
            return;
        }
        let mut stack = Echelon {
            rows: vec![vec![0.0; n]; n],
            rhs: vec![0.0; n],
            pivots: vec![0; n],
        };
        let mut g = vec![0.0; n];
        self.descend(0, 0, &mut stack, &mut g, feas_tol, &mut visit);
    }

    fn descend(
        &self,
        start: usize,
        depth: usize,
        ech: &mut Echelon,
        g: &mut [f64],
        feas_tol: f64,
        visit: &mut impl FnMut(&[f64]),
    ) {
        let n = self.dim;
        if depth == n {
            ech.back_substitute(g);
            if self.max_violation(g) <= feas_tol {
                visit(g);
            }
            return;
        }
        let total = self.rows.len();
        for k in start..total {
            if total - k < n - depth {
                break;
            }
            if ech.try_push(depth, &self.rows[k], self.rhs[k]) {
                self.descend(k + 1, depth + 1, ech, g, feas_tol, visit);
            }
        }
    }
}

struct Echelon {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    pivots: Vec<usize>,
}

impl Echelon {
    /// Reduces `row` against the first `depth` stored rows and stores it at
    /// slot `depth` if it is independent of them.
    fn try_push(&mut self, depth: usize, row: &[f64], rhs: f64) -> bool {
        let (done, rest) = self.rows.split_at_mut(depth);
        let slot = &mut rest[0];
        slot.copy_from_slice(row);
        let mut b = rhs;
        for (k, prev) in done.iter().enumerate() {
            let f = slot[self.pivots[k]];
            if f != 0.0 {
                for (x, p) in slot.iter_mut().zip(prev) {
                    *x -= f * p;
                }
                b -= f * self.rhs[k];
            }
        }
        let (piv, mag) = slot
            .iter()
            .enumerate()
            .map(|(j, v)| (j, v.abs()))
            .fold((0, 0.0), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
        if mag < RANK_TOL {
            return false;
        }
        let scale = slot[piv];
        slot.iter_mut().for_each(|x| *x /= scale);
        slot[piv] = 1.0;
        self.rhs[depth] = b / scale;
        self.pivots[depth] = piv;
        true
    }

    /// Row `k` vanishes on the pivots of rows `< k`, so solving from the last
    /// row backwards determines one new unknown per row.
    fn back_substitute(&self, g: &mut [f64]) {
        let n = g.len();
        for k in (0..n).rev() {
            let row = &self.rows[k];
            let mut v = self.rhs[k];
            for j in (k + 1)..n {
                let p = self.pivots[j];
                v -= row[p] * g[p];
            }
            g[self.pivots[k]] = v;
        }
    }
}
