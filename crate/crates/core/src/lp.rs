//! Revised simplex for packing-form linear programs.
//!
//! Solves `max cᵀλ  s.t.  Aλ ≤ b, λ ≥ 0` with `b ≥ 0`, so the all-slack basis
//! is feasible and no phase one is needed. `A` is stored by sparse columns,
//! the basis inverse is dense (`rows × rows`). The entering variable is the
//! one with the largest reduced cost; after a run of degenerate pivots the
//! solver falls back to Bland's smallest-index rule for both entering and
//! leaving variables, which rules out cycling.
//!
//! The simplex multipliers `y = c_Bᵀ B⁻¹` of the final basis solve the dual
//! `min bᵀy  s.t.  Aᵀy ≥ c, y ≥ 0`.

use crate::error::{Error, Result};

const REFACTOR_EVERY: usize = 64;
const PIVOT_TOL: f64 = 1e-9;
/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_RUN: usize = 50;

#[derive(Clone, Debug, Default)]
pub struct SparseColumn {
    pub entries: Vec<(usize, f64)>,
}

#[derive(Clone, Debug)]
pub struct PackingLp {
    rows: usize,
    rhs: Vec<f64>,
    costs: Vec<f64>,
    columns: Vec<SparseColumn>,
}

#[derive(Clone, Debug)]
pub struct LpSolution {
    /// Structural variables `λ`.
    pub primal: Vec<f64>,
    /// Simplex multipliers `y`, one per row.
    pub dual: Vec<f64>,
    pub objective: f64,
    pub iterations: usize,
}

impl PackingLp {
    pub fn new(rhs: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = rhs
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0 && v.is_finite()))
        {
            return Err(Error::domain(format!(
                "row {i}: right-hand side {v} must be finite and ≥ 0"
            )));
        }
        Ok(PackingLp {
            rows: rhs.len(),
            rhs,
            costs: Vec::new(),
            columns: Vec::new(),
        })
    }

    pub fn add_column(&mut self, cost: f64, entries: Vec<(usize, f64)>) -> Result<usize> {
        if !cost.is_finite() {
            return Err(Error::domain("column cost must be finite"));
        }
        if let Some(&(r, _)) = entries
            .iter()
            .find(|(r, v)| *r >= self.rows || !v.is_finite())
        {
            return Err(Error::domain(format!(
                "column entry refers to bad row {r} or is not finite"
            )));
        }
        self.costs.push(cost);
        self.columns.push(SparseColumn { entries });
        Ok(self.columns.len() - 1)
    }

    pub fn num_rows(&self) -> usize {
        self.rows
    }

    pub fn num_columns(&self) -> usize {
        self.columns.len()
    }

    fn cost(&self, var: usize) -> f64 {
        if var < self.columns.len() {
            self.costs[var]
        } else {
            0.0
        }
    }

    /// `B⁻¹ a_var` for a structural or slack variable.
    fn ftran(&self, binv: &[f64], var: usize, out: &mut [f64]) {
        let m = self.rows;
        if var < self.columns.len() {
            out.iter_mut().for_each(|v| *v = 0.0);
            for &(r, a) in &self.columns[var].entries {
                for i in 0..m {
                    out[i] += binv[i * m + r] * a;
                }
            }
        } else {
            let r = var - self.columns.len();
            for i in 0..m {
                out[i] = binv[i * m + r];
            }
        }
    }

    fn reduced_cost(&self, y: &[f64], var: usize) -> f64 {
        if var < self.columns.len() {
            self.costs[var]
                - self.columns[var]
                    .entries
                    .iter()
                    .map(|&(r, a)| y[r] * a)
                    .sum::<f64>()
        } else {
            -y[var - self.columns.len()]
        }
    }

    /// Recomputes `B⁻¹` from scratch by Gauss-Jordan with partial pivoting.
    fn invert_basis(&self, basis: &[usize]) -> Result<Vec<f64>> {
        let m = self.rows;
        let mut a = vec![0.0; m * m];
        let mut col = vec![0.0; m];
        let identity: Vec<f64> = (0..m * m)
            .map(|k| if k % (m + 1) == 0 { 1.0 } else { 0.0 })
            .collect();
        for (j, &var) in basis.iter().enumerate() {
            self.ftran(&identity, var, &mut col);
            for i in 0..m {
                a[i * m + j] = col[i];
            }
        }
        let mut inv = identity;
        for k in 0..m {
            let p = (k..m)
                .max_by(|&i, &j| a[i * m + k].abs().total_cmp(&a[j * m + k].abs()))
                .unwrap_or(k);
            if a[p * m + k].abs() < 1e-12 {
                return Err(Error::invariant("simplex basis became singular"));
            }
            if p != k {
                for j in 0..m {
                    a.swap(p * m + j, k * m + j);
                    inv.swap(p * m + j, k * m + j);
                }
            }
            let piv = a[k * m + k];
            for j in 0..m {
                a[k * m + j] /= piv;
                inv[k * m + j] /= piv;
            }
            for i in 0..m {
                if i != k {
                    let f = a[i * m + k];
                    if f != 0.0 {
                        for j in 0..m {
                            a[i * m + j] -= f * a[k * m + j];
                            inv[i * m + j] -= f * inv[k * m + j];
                        }
                    }
                }
            }
        }
        Ok(inv)
    }

    pub fn solve(&self) -> Result<LpSolution> {
        let ncols = self.columns.len();
        let b_scale = self
            .rhs
            .iter()
            .fold(0.0f64, |a, v| a.max(*v))
            .max(f64::MIN_POSITIVE);
        let perturbed: Vec<f64> = self
            .rhs
            .iter()
            .enumerate()
            .map(|(i, b)| b + PERTURBATION * b_scale * spread(i))
            .collect();

        let mut state = Simplex::new(self, perturbed);
        state.primal_phase()?;
        state.reset_rhs(self.rhs.clone())?;
        state.dual_phase(1e-13 * b_scale)?;

        let mut primal = vec![0.0; ncols];
        for (i, &v) in state.basis.iter().enumerate() {
            if v < ncols {
                primal[v] = state.xb[i].max(0.0);
            }
        }
        let objective = primal.iter().zip(&self.costs).map(|(x, c)| x * c).sum();
        Ok(LpSolution {
            primal,
            dual: state.y,
            objective,
            iterations: state.iterations,
        })
    }
}

/// Relative size of the right-hand-side perturbation that breaks degenerate ties.
const PERTURBATION: f64 = 1e-7;

/// Deterministic low-discrepancy weights in `[0.5, 1.5)`.
fn spread(i: usize) -> f64 {
    let phi = 0.618_033_988_749_894_9;
    0.5 + ((i as f64 + 1.0) * phi).fract()
}

struct Simplex<'a> {
    lp: &'a PackingLp,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    is_basic: Vec<bool>,
    binv: Vec<f64>,
    xb: Vec<f64>,
    y: Vec<f64>,
    col: Vec<f64>,
    iterations: usize,
    dj_tol: f64,
}

impl<'a> Simplex<'a> {
    fn new(lp: &'a PackingLp, rhs: Vec<f64>) -> Self {
        let m = lp.rows;
        let ncols = lp.columns.len();
        let nvars = ncols + m;
        let basis: Vec<usize> = (ncols..nvars).collect();
        let mut is_basic = vec![false; nvars];
        for &v in &basis {
            is_basic[v] = true;
        }
        let cost_scale = lp.costs.iter().fold(1.0f64, |a, c| a.max(c.abs()));
        Simplex {
            lp,
            xb: rhs.clone(),
            rhs,
            basis,
            is_basic,
            binv: (0..m * m)
                .map(|k| if k % (m + 1) == 0 { 1.0 } else { 0.0 })
                .collect(),
            y: vec![0.0; m],
            col: vec![0.0; m],
            iterations: 0,
            dj_tol: 1e-11 * cost_scale,
        }
    }

    fn nvars(&self) -> usize {
        self.is_basic.len()
    }

    fn refresh(&mut self) -> Result<()> {
        let m = self.lp.rows;
        self.binv = self.lp.invert_basis(&self.basis)?;
        for i in 0..m {
            self.xb[i] = (0..m).map(|k| self.binv[i * m + k] * self.rhs[k]).sum();
        }
        for k in 0..m {
            self.y[k] = (0..m)
                .map(|i| self.lp.cost(self.basis[i]) * self.binv[i * m + k])
                .sum();
        }
        Ok(())
    }

    fn reset_rhs(&mut self, rhs: Vec<f64>) -> Result<()> {
        self.rhs = rhs;
        self.refresh()
    }

    /// Exchanges the basic variable of `row` for `entering`, whose column
    /// `B⁻¹ a` is in `self.col` and whose reduced cost is `dj`.
    fn pivot(&mut self, row: usize, entering: usize, dj: f64) -> Result<()> {
        let m = self.lp.rows;
        let piv = self.col[row];
        let step = self.xb[row] / piv;
        for i in 0..m {
            if i != row {
                self.xb[i] -= step * self.col[i];
            }
        }
        self.xb[row] = step;
        for j in 0..m {
            self.binv[row * m + j] /= piv;
        }
        for i in 0..m {
            if i != row && self.col[i] != 0.0 {
                let f = self.col[i];
                for j in 0..m {
                    self.binv[i * m + j] -= f * self.binv[row * m + j];
                }
            }
        }
        self.is_basic[self.basis[row]] = false;
        self.is_basic[entering] = true;
        self.basis[row] = entering;
        self.iterations += 1;
        if self.iterations.is_multiple_of(REFACTOR_EVERY) {
            self.refresh()?;
        } else {
            // y' = y + d_q · (row r of the updated B⁻¹)
            for k in 0..m {
                self.y[k] += dj * self.binv[row * m + k];
            }
        }
        Ok(())
    }

    /// Primal simplex from a primal-feasible basis until no reduced cost is positive.
    fn primal_phase(&mut self) -> Result<()> {
        let m = self.lp.rows;
        let nvars = self.nvars();
        let mut degenerate_run = 0;
        loop {
            let bland = degenerate_run >= DEGENERATE_RUN;
            let candidates = (0..nvars)
                .filter(|&v| !self.is_basic[v])
                .map(|v| (v, self.lp.reduced_cost(&self.y, v)))
                .filter(|&(_, d)| d > self.dj_tol);
            let entering = if bland {
                candidates.take(1).next()
            } else {
                candidates.fold(None, |best: Option<(usize, f64)>, cur| match best {
                    Some(b) if b.1 >= cur.1 => Some(b),
                    _ => Some(cur),
                })
            };
            let Some((entering, dj)) = entering else {
                return Ok(());
            };

            let mut col = std::mem::take(&mut self.col);
            self.lp.ftran(&self.binv, entering, &mut col);
            self.col = col;
            let mut leave: Option<(usize, f64)> = None;
            for i in 0..m {
                if self.col[i] > PIVOT_TOL {
                    let ratio = self.xb[i].max(0.0) / self.col[i];
                    let better = match leave {
                        None => true,
                        Some((li, lr)) => {
                            let tie = (ratio - lr).abs() <= 1e-12 * lr.abs().max(1.0);
                            if !tie {
                                ratio < lr
                            } else if bland {
                                self.basis[i] < self.basis[li]
                            } else {
                                self.col[i] > self.col[li]
                            }
                        }
                    };
                    if better {
                        leave = Some((i, ratio));
                    }
                }
            }
            let Some((row, step)) = leave else {
                return Err(Error::Unsupported(format!(
                    "linear program is unbounded along variable {entering}"
                )));
            };
            if step > 0.0 {
                degenerate_run = 0;
            } else {
                degenerate_run += 1;
            }
            self.pivot(row, entering, dj)?;
        }
    }

    /// Dual simplex from a dual-feasible basis until every basic value is
    /// at least `-feas_tol`.
    fn dual_phase(&mut self, feas_tol: f64) -> Result<()> {
        let m = self.lp.rows;
        let nvars = self.nvars();
        let ncols = self.lp.columns.len();
        loop {
            let row = (0..m)
                .filter(|&i| self.xb[i] < -feas_tol)
                .min_by(|&a, &b| self.xb[a].total_cmp(&self.xb[b]).then(a.cmp(&b)));
            let Some(row) = row else {
                return Ok(());
            };
            let rho = &self.binv[row * m..(row + 1) * m];
            let mut enter: Option<(usize, f64, f64)> = None;
            for v in (0..nvars).filter(|&v| !self.is_basic[v]) {
                let alpha = if v < ncols {
                    self.lp.columns[v]
                        .entries
                        .iter()
                        .map(|&(r, a)| rho[r] * a)
                        .sum::<f64>()
                } else {
                    rho[v - ncols]
                };
                if alpha < -PIVOT_TOL {
                    let dj = self.lp.reduced_cost(&self.y, v).min(0.0);
                    let ratio = dj / alpha;
                    if enter.is_none_or(|(_, r, _)| ratio < r) {
                        enter = Some((v, ratio, dj));
                    }
                }
            }
            let Some((entering, _, dj)) = enter else {
                return Err(Error::invariant(
                    "dual simplex found the packing LP infeasible",
                ));
            };
            let mut col = std::mem::take(&mut self.col);
            self.lp.ftran(&self.binv, entering, &mut col);
            self.col = col;
            self.pivot(row, entering, dj)?;
        }
    }
}
