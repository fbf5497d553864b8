//! Hajłasz gradients of scalar fields on finite spaces.
//!
//! `g ≥ 0` is a gradient of `u` when `|u(x) − u(y)| ≤ d(x,y)(g(x) + g(y))`
//! for every pair of distinct points. On a finite space there are no null
//! sets, so the inequality is enforced at all pairs.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lp::PackingLp;
use crate::space::{MetricMeasureSpace, PointId, DEFAULT_TOL};
use crate::vertex::Polyhedron;

/// Largest space handled by the exact linear-programming mode.
pub const EXACT_LP_MAX_POINTS: usize = 512;
/// Largest space handled by vertex enumeration.
pub const ORACLE_MAX_POINTS: usize = 8;
/// Residual required of the LP optimality certificate.
pub const LP_CERTIFICATE_TOL: f64 = 1e-8;
const DESCENT_STEP: f64 = 1e-10;

/// Real values indexed by point id.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(space: &MetricMeasureSpace, values: Vec<f64>) -> Result<Self> {
        space.check_field_len(&values)?;
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::domain(format!(
                "field value {v} at point {i} is not finite"
            )));
        }
        Ok(ScalarField { values })
    }

    pub fn from_fn(space: &MetricMeasureSpace, f: impl Fn(PointId) -> f64) -> Result<Self> {
        ScalarField::new(space, space.ids().map(f).collect())
    }

    pub fn constant(space: &MetricMeasureSpace, c: f64) -> Result<Self> {
        ScalarField::new(space, vec![c; space.len()])
    }

    /// `u(p) = dist(x0, p)`.
    pub fn distance_to(space: &MetricMeasureSpace, x0: PointId) -> Result<Self> {
        space.check_id(x0)?;
        ScalarField::new(space, space.distances_from(x0))
    }

    /// `u(p)` = the `axis`-th ambient coordinate of `p`.
    pub fn coordinate(space: &MetricMeasureSpace, axis: usize) -> Result<Self> {
        if axis >= space.ambient_dim() {
            return Err(Error::domain(format!("axis {axis} out of range")));
        }
        ScalarField::from_fn(space, |p| space.coords(p)[axis])
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, lambda: f64) -> ScalarField {
        ScalarField {
            values: self.values.iter().map(|v| v * lambda).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    pub fn to_document(&self) -> FieldDocument {
        FieldDocument {
            field: self.values.clone(),
        }
    }
}

/// `{field: [values]}` aligned to point ids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldDocument {
    pub field: Vec<f64>,
}

/// Result of checking `g(x) + g(y) ≥ D(x,y) − tol` over all pairs.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Admissibility {
    pub admissible: bool,
    /// `min_{x≠y} g(x) + g(y) − D(x,y)`; `+∞` on a one-point space.
    pub slack: f64,
    pub worst_pair: Option<(PointId, PointId)>,
}

/// Nonnegative values together with the verified relation to a field.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientField {
    values: Vec<f64>,
    pub admissible: bool,
    pub slack: f64,
    pub worst_pair: Option<(PointId, PointId)>,
}

impl GradientField {
    /// Wraps `values` after checking admissibility for `u` at tolerance `tol`.
    pub fn check(
        space: &MetricMeasureSpace,
        u: &ScalarField,
        values: Vec<f64>,
        tol: f64,
    ) -> Result<Self> {
        space.check_field_len(&values)?;
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v >= 0.0 && v.is_finite()))
        {
            return Err(Error::domain(format!(
                "gradient value {v} at point {i} must be finite and nonnegative"
            )));
        }
        let adm = is_admissible(space, u, &values, tol)?;
        Ok(GradientField {
            values,
            admissible: adm.admissible,
            slack: adm.slack,
            worst_pair: adm.worst_pair,
        })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn norm(&self, space: &MetricMeasureSpace, s: f64) -> Result<f64> {
        space.ls_norm(&self.values, s)
    }

    pub fn to_document(&self) -> FieldDocument {
        FieldDocument {
            field: self.values.clone(),
        }
    }
}

/// `|u(x) − u(y)| / dist(x, y)`.
pub fn difference_quotient(
    space: &MetricMeasureSpace,
    u: &ScalarField,
    x: PointId,
    y: PointId,
) -> Result<f64> {
    space.check_id(x)?;
    space.check_id(y)?;
    if x == y {
        return Err(Error::domain(
            "difference quotient needs two distinct points",
        ));
    }
    Ok(quotient(space, u.values(), x, y))
}

#[inline]
fn quotient(space: &MetricMeasureSpace, u: &[f64], x: PointId, y: PointId) -> f64 {
    (u[x] - u[y]).abs() / space.dist(x, y)
}

fn pair_min(a: (f64, PointId, PointId), b: (f64, PointId, PointId)) -> (f64, PointId, PointId) {
    if b.0 < a.0 || b.0 == a.0 && (b.1, b.2) < (a.1, a.2) {
        b
    } else {
        a
    }
}

pub fn is_admissible(
    space: &MetricMeasureSpace,
    u: &ScalarField,
    g: &[f64],
    tol: f64,
) -> Result<Admissibility> {
    space.check_field_len(u.values())?;
    space.check_field_len(g)?;
    if let Some((i, v)) = g.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(Error::domain(format!(
            "gradient value {v} at point {i} is negative"
        )));
    }
    let uv = u.values();
    let n = space.len();
    let worst = (0..n)
        .into_par_iter()
        .map(|x| {
            ((x + 1)..n)
                .map(|y| (g[x] + g[y] - quotient(space, uv, x, y), x, y))
                .fold((f64::INFINITY, usize::MAX, usize::MAX), pair_min)
        })
        .reduce(|| (f64::INFINITY, usize::MAX, usize::MAX), pair_min);
    let (slack, worst_pair) = if worst.1 == usize::MAX {
        (f64::INFINITY, None)
    } else {
        (worst.0, Some((worst.1, worst.2)))
    };
    Ok(Admissibility {
        admissible: slack >= -tol,
        slack,
        worst_pair,
    })
}

/// `g(x) = ½ · max_{y≠x} D(x, y)`. Admissible because
/// `g(x) + g(y) ≥ ½D(x,y) + ½D(x,y)`.
pub fn halfmax_gradient(space: &MetricMeasureSpace, u: &ScalarField) -> Result<GradientField> {
    space.check_field_len(u.values())?;
    let uv = u.values();
    let values: Vec<f64> = space
        .ids()
        .into_par_iter()
        .map(|x| {
            0.5 * space
                .ids()
                .filter(|&y| y != x)
                .map(|y| quotient(space, uv, x, y))
                .fold(0.0, f64::max)
        })
        .collect();
    GradientField::check(space, u, values, 0.0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMode {
    ExactLp,
    LocalSearch,
    Oracle,
}

impl FromStr for GradientMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact-lp" | "exact_lp" => Ok(GradientMode::ExactLp),
            "local-search" | "local_search" => Ok(GradientMode::LocalSearch),
            "oracle" => Ok(GradientMode::Oracle),
            other => Err(Error::domain(format!("unknown gradient mode '{other}'"))),
        }
    }
}

impl fmt::Display for GradientMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GradientMode::ExactLp => "exact-lp",
            GradientMode::LocalSearch => "local-search",
            GradientMode::Oracle => "oracle",
        })
    }
}

#[derive(Clone, Debug)]
pub struct MinimalGradient {
    pub gradient: GradientField,
    /// `‖g‖_{L^s}`.
    pub norm: f64,
    pub mode: GradientMode,
    /// Optimality residual of the LP certificate (exact mode only).
    pub certificate_residual: Option<f64>,
}

/// Minimizes (or, for local search, decreases) `‖g‖_{L^s}` over admissible `g`.
pub fn minimal_gradient(
    space: &MetricMeasureSpace,
    u: &ScalarField,
    s: f64,
    mode: GradientMode,
) -> Result<MinimalGradient> {
    space.check_field_len(u.values())?;
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::domain(format!(
            "exponent s must be positive, got {s}"
        )));
    }
    let (values, certificate_residual) = match mode {
        GradientMode::ExactLp => {
            if s != 1.0 {
                return Err(Error::Unsupported(format!(
                    "exact-lp minimizes the L^1 norm only; got s = {s}"
                )));
            }
            let (g, residual) = exact_lp(space, u)?;
            (g, Some(residual))
        }
        GradientMode::LocalSearch => (local_search(space, u)?, None),
        GradientMode::Oracle => (vertex_oracle(space, u, s)?, None),
    };
    let gradient = GradientField::check(space, u, values, DEFAULT_TOL)?;
    if !gradient.admissible {
        return Err(Error::invariant(format!(
            "{mode} produced an inadmissible gradient (slack {})",
            gradient.slack
        )));
    }
    let norm = gradient.norm(space, s)?;
    Ok(MinimalGradient {
        gradient,
        norm,
        mode,
        certificate_residual,
    })
}

/// Solves `min Σ mass·g  s.t. g(x)+g(y) ≥ D(x,y), g ≥ 0` through its packing
/// dual `max Σ D·λ  s.t. Σ_{e∋x} λ_e ≤ mass(x), λ ≥ 0`; `g` is read off the
/// simplex multipliers. Returns `g` and the complementary-slackness residual.
fn exact_lp(space: &MetricMeasureSpace, u: &ScalarField) -> Result<(Vec<f64>, f64)> {
    let n = space.len();
    if n > EXACT_LP_MAX_POINTS {
        return Err(Error::Resource(format!(
            "exact-lp is limited to {EXACT_LP_MAX_POINTS} points, space has {n}"
        )));
    }
    let uv = u.values();
    let mut lp = PackingLp::new(space.masses().to_vec())?;
    let mut pairs = Vec::new();
    for x in 0..n {
        for y in (x + 1)..n {
            let d = quotient(space, uv, x, y);
            if d > 0.0 {
                lp.add_column(d, vec![(x, 1.0), (y, 1.0)])?;
                pairs.push((x, y, d));
            }
        }
    }
    let sol = lp.solve()?;
    let g: Vec<f64> = sol.dual.iter().map(|v| v.max(0.0)).collect();

    let scale = pairs.iter().fold(1.0f64, |a, p| a.max(p.2));
    let mut residual: f64 = 0.0;
    let mut load = vec![0.0; n];
    for (k, &(x, y, d)) in pairs.iter().enumerate() {
        let lam = sol.primal[k];
        load[x] += lam;
        load[y] += lam;
        let gap = g[x] + g[y] - d;
        residual = residual.max(-gap).max((lam * gap).abs());
    }
    for x in 0..n {
        let m = space.mass(x);
        residual = residual
            .max(-sol.dual[x])
            .max(load[x] - m)
            .max((g[x] * (m - load[x])).abs());
    }
    let primal_obj: f64 = g.iter().zip(space.masses()).map(|(a, m)| a * m).sum();
    residual = residual.max((primal_obj - sol.objective).abs());
    let residual = residual / scale;
    if residual >= LP_CERTIFICATE_TOL {
        return Err(Error::invariant(format!(
            "LP optimality certificate residual {residual:e} exceeds {LP_CERTIFICATE_TOL:e}"
        )));
    }
    Ok((g, residual))
}

/// Coordinate descent from the half-max candidate: each coordinate is lowered
/// to the smallest value its constraints allow, until a sweep moves nothing.
fn local_search(space: &MetricMeasureSpace, u: &ScalarField) -> Result<Vec<f64>> {
    let mut g = halfmax_gradient(space, u)?.values;
    let uv = u.values();
    loop {
        let mut moved = false;
        for x in space.ids() {
            let floor = space
                .ids()
                .filter(|&y| y != x)
                .map(|y| quotient(space, uv, x, y) - g[y])
                .fold(0.0, f64::max);
            if floor < g[x] - DESCENT_STEP {
                g[x] = floor;
                moved = true;
            }
        }
        if !moved {
            return Ok(g);
        }
    }
}

/// Exact minimum of `Σ mass·g^s` by enumerating every vertex of the
/// constraint polyhedron. The objective is concave for `s ≤ 1`, so the
/// minimum sits at a vertex.
fn vertex_oracle(space: &MetricMeasureSpace, u: &ScalarField, s: f64) -> Result<Vec<f64>> {
    let n = space.len();
    if n > ORACLE_MAX_POINTS {
        return Err(Error::Resource(format!(
            "vertex enumeration is limited to {ORACLE_MAX_POINTS} points, space has {n}"
        )));
    }
    if s > 1.0 {
        return Err(Error::Unsupported(format!(
            "vertex enumeration is exact only for concave objectives (s ≤ 1), got s = {s}"
        )));
    }
    let uv = u.values();
    let mut poly = Polyhedron::new(n);
    for x in 0..n {
        let mut row = vec![0.0; n];
        row[x] = 1.0;
        poly.push(row, 0.0)?;
    }
    let mut scale: f64 = 1.0;
    for x in 0..n {
        for y in (x + 1)..n {
            let d = quotient(space, uv, x, y);
            scale = scale.max(d);
            let mut row = vec![0.0; n];
            row[x] = 1.0;
            row[y] = 1.0;
            poly.push(row, d)?;
        }
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    poly.for_each_vertex(1e-12 * scale, |g| {
        let obj: f64 = g
            .iter()
            .zip(space.masses())
            .map(|(v, m)| if *v > 0.0 { v.powf(s) * m } else { 0.0 })
            .sum();
        if best.as_ref().is_none_or(|(b, _)| obj < *b) {
            best = Some((obj, g.iter().map(|v| v.max(0.0)).collect()));
        }
    });
    best.map(|(_, g)| g)
        .ok_or_else(|| Error::invariant("constraint polyhedron has no vertex"))
}

/// `u(p) = log log (1 / (κ · max(dist(x0, p), floor_dist)))` with
/// `κ = e⁻¹ / diam`, i.e. distances are measured after rescaling the space to
/// diameter `e⁻¹`. The field is capped at `x0`.
pub fn loglog_field(
    space: &MetricMeasureSpace,
    x0: PointId,
    floor_dist: f64,
) -> Result<ScalarField> {
    space.check_id(x0)?;
    if !(floor_dist >= space.resolution_h() && floor_dist.is_finite()) {
        return Err(Error::domain(format!(
            "floor distance {floor_dist} must be at least the resolution {}",
            space.resolution_h()
        )));
    }
    if space.diam() <= 0.0 {
        return Err(Error::domain(
            "log-log field needs a space with positive diameter",
        ));
    }
    let kappa = (-1.0f64).exp() / space.diam();
    if kappa * floor_dist >= 1.0 {
        return Err(Error::domain(format!(
            "floor distance {floor_dist} rescales beyond 1; log log is undefined"
        )));
    }
    ScalarField::from_fn(space, |p| {
        let d = space.dist(x0, p).max(floor_dist) * kappa;
        (1.0 / d).ln().ln()
    })
}
