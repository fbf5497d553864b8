//! Finite metric measure spaces.
//!
//! A [`MetricMeasureSpace`] is a point cloud with ambient coordinates, point
//! masses, a declared dimension `s`, and a metric that is the Euclidean
//! distance raised to a snowflake exponent. Balls are open:
//! `p ∈ B(x, r)` iff `dist(x, p) < r`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type PointId = usize;

/// Absolute slack used by inequality checks on O(1)-normalized quantities.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Largest point count for which a dense distance table may be materialized.
pub const DENSE_CACHE_LIMIT: usize = 4096;

/// Default number of radii per center when profiling regularity.
pub const DEFAULT_PROFILE_RADII: usize = 32;
/// Default cap on profiled centers.
pub const DEFAULT_PROFILE_CENTERS: usize = 64;

#[derive(Clone, Debug)]
pub struct MetricMeasureSpace {
    dim: usize,
    coords: Vec<f64>,
    mass: Vec<f64>,
    resolution_h: f64,
    s: f64,
    snowflake_eps: f64,
    diam: f64,
    dense: Option<Vec<f64>>,
}

impl MetricMeasureSpace {
    /// Builds a space from per-point coordinates and masses.
    ///
    /// Rejects empty input, ragged or non-finite coordinates, non-positive
    /// masses, coincident points and out-of-range parameters.
    pub fn new(
        coords: Vec<Vec<f64>>,
        mass: Vec<f64>,
        s: f64,
        resolution_h: f64,
        snowflake_eps: f64,
    ) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::domain("a space needs at least one point"));
        }
        if coords.len() != mass.len() {
            return Err(Error::domain(format!(
                "{} coordinate records but {} masses",
                coords.len(),
                mass.len()
            )));
        }
        let dim = coords[0].len();
        if dim == 0 {
            return Err(Error::domain("points need at least one coordinate"));
        }
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::domain(format!(
                "dimension s must be positive, got {s}"
            )));
        }
        if !(resolution_h > 0.0 && resolution_h.is_finite()) {
            return Err(Error::domain(format!(
                "resolution_h must be positive, got {resolution_h}"
            )));
        }
        if !(snowflake_eps > 0.0 && snowflake_eps <= 1.0) {
            return Err(Error::domain(format!(
                "snowflake exponent must lie in (0, 1], got {snowflake_eps}"
            )));
        }
        let mut flat = Vec::with_capacity(coords.len() * dim);
        for (id, c) in coords.iter().enumerate() {
            if c.len() != dim {
                return Err(Error::domain(format!(
                    "point {id} has {} coordinates, expected {dim}",
                    c.len()
                )));
            }
            if c.iter().any(|v| !v.is_finite()) {
                return Err(Error::domain(format!(
                    "point {id} has a non-finite coordinate"
                )));
            }
            flat.extend_from_slice(c);
        }
        if let Some((id, m)) = mass
            .iter()
            .enumerate()
            .find(|(_, m)| !(**m > 0.0 && m.is_finite()))
        {
            return Err(Error::domain(format!(
                "point {id} has non-positive mass {m}"
            )));
        }

        let mut space = MetricMeasureSpace {
            dim,
            coords: flat,
            mass,
            resolution_h,
            s,
            snowflake_eps,
            diam: 0.0,
            dense: None,
        };
        if let Some((a, b)) = space.find_coincident_pair() {
            return Err(Error::domain(format!("points {a} and {b} coincide")));
        }
        space.diam = space.compute_diameter();
        Ok(space)
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn ambient_dim(&self) -> usize {
        self.dim
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn resolution_h(&self) -> f64 {
        self.resolution_h
    }

    pub fn snowflake_eps(&self) -> f64 {
        self.snowflake_eps
    }

    pub fn diam(&self) -> f64 {
        self.diam
    }

    pub fn coords(&self, id: PointId) -> &[f64] {
        &self.coords[id * self.dim..(id + 1) * self.dim]
    }

    pub fn mass(&self, id: PointId) -> f64 {
        self.mass[id]
    }

    pub fn masses(&self) -> &[f64] {
        &self.mass
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum()
    }

    pub fn ids(&self) -> std::ops::Range<PointId> {
        0..self.len()
    }

    pub fn check_id(&self, id: PointId) -> Result<()> {
        if id < self.len() {
            Ok(())
        } else {
            Err(Error::domain(format!(
                "unknown point id {id} (space has {} points)",
                self.len()
            )))
        }
    }

    /// Materializes an n×n distance table when `n ≤ DENSE_CACHE_LIMIT`;
    /// larger spaces are returned unchanged.
    pub fn with_dense_cache(mut self) -> Self {
        let n = self.len();
        if n <= DENSE_CACHE_LIMIT && self.dense.is_none() {
            let table: Vec<f64> = (0..n)
                .into_par_iter()
                .flat_map_iter(|i| {
                    let this = &self;
                    (0..n).map(move |j| this.raw_dist(i, j))
                })
                .collect();
            self.dense = Some(table);
        }
        self
    }

    pub fn has_dense_cache(&self) -> bool {
        self.dense.is_some()
    }

    fn raw_dist(&self, i: PointId, j: PointId) -> f64 {
        if i == j {
            return 0.0;
        }
        let a = self.coords(i);
        let b = self.coords(j);
        let e = if self.dim == 1 {
            (a[0] - b[0]).abs()
        } else {
            a.iter()
                .zip(b)
                .map(|(x, y)| (x - y) * (x - y))
                .sum::<f64>()
                .sqrt()
        };
        if self.snowflake_eps == 1.0 {
            e
        } else {
            e.powf(self.snowflake_eps)
        }
    }

    /// Distance between two points.
    #[inline]
    pub fn dist(&self, i: PointId, j: PointId) -> f64 {
        match &self.dense {
            Some(t) => t[i * self.len() + j],
            None => self.raw_dist(i, j),
        }
    }

    /// Distances from `x` to every point, indexed by id.
    pub fn distances_from(&self, x: PointId) -> Vec<f64> {
        self.ids().map(|p| self.dist(x, p)).collect()
    }

    fn find_coincident_pair(&self) -> Option<(PointId, PointId)> {
        let mut order: Vec<PointId> = self.ids().collect();
        order.sort_by(|&a, &b| {
            self.coords(a)
                .partial_cmp(self.coords(b))
                .unwrap_or(std::cmp::Ordering::Equal)
        });
        order
            .windows(2)
            .find(|w| self.coords(w[0]) == self.coords(w[1]))
            .map(|w| (w[0].min(w[1]), w[0].max(w[1])))
    }

    fn compute_diameter(&self) -> f64 {
        let n = self.len();
        if n < 2 {
            return 0.0;
        }
        if self.dim == 1 {
            let (lo, hi) = self
                .coords
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                    (lo.min(v), hi.max(v))
                });
            let e = hi - lo;
            return if self.snowflake_eps == 1.0 {
                e
            } else {
                e.powf(self.snowflake_eps)
            };
        }
        (0..n)
            .into_par_iter()
            .map(|i| {
                ((i + 1)..n)
                    .map(|j| self.raw_dist(i, j))
                    .fold(0.0, f64::max)
            })
            .reduce(|| 0.0, f64::max)
    }

    /// Returns the same point set with metric `d^eps`, where `d` is the
    /// current metric. Dimension and resolution transform accordingly.
    pub fn snowflaked(&self, eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps <= 1.0) {
            return Err(Error::domain(format!(
                "snowflake exponent must lie in (0, 1], got {eps}"
            )));
        }
        let coords = self.ids().map(|p| self.coords(p).to_vec()).collect();
        MetricMeasureSpace::new(
            coords,
            self.mass.clone(),
            self.s / eps,
            self.resolution_h.powf(eps),
            self.snowflake_eps * eps,
        )
    }

    /// Overrides the declared dimension.
    pub fn with_dimension(mut self, s: f64) -> Result<Self> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::domain(format!(
                "dimension s must be positive, got {s}"
            )));
        }
        self.s = s;
        Ok(self)
    }

    /// Ids of the open ball, ascending.
    pub fn ball_members(&self, ball: &Ball) -> Result<Vec<PointId>> {
        self.check_id(ball.center)?;
        Ok(self
            .ids()
            .filter(|&p| self.dist(ball.center, p) < ball.radius)
            .collect())
    }

    pub fn ball_measure(&self, ball: &Ball) -> Result<f64> {
        self.check_id(ball.center)?;
        Ok(self
            .ids()
            .filter(|&p| self.dist(ball.center, p) < ball.radius)
            .map(|p| self.mass[p])
            .sum())
    }

    /// `(Σ_{p ∈ region} f(p)^s · mass(p))^{1/s}`; zero on an empty region.
    pub fn ls_energy(&self, f: &[f64], region: &[PointId], s: f64) -> Result<f64> {
        self.check_field_len(f)?;
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::domain(format!(
                "exponent s must be positive, got {s}"
            )));
        }
        let mut acc = 0.0;
        for &p in region {
            self.check_id(p)?;
            let v = f[p];
            if !(v >= 0.0) {
                return Err(Error::domain(format!(
                    "negative or NaN value {v} at point {p}"
                )));
            }
            if v > 0.0 {
                acc += v.powf(s) * self.mass[p];
            }
        }
        Ok(acc.powf(1.0 / s))
    }

    /// [`ls_energy`](Self::ls_energy) over the whole space.
    pub fn ls_norm(&self, f: &[f64], s: f64) -> Result<f64> {
        let all: Vec<PointId> = self.ids().collect();
        self.ls_energy(f, &all, s)
    }

    pub(crate) fn check_field_len(&self, f: &[f64]) -> Result<()> {
        if f.len() != self.len() {
            return Err(Error::domain(format!(
                "field has {} values but the space has {} points",
                f.len(),
                self.len()
            )));
        }
        Ok(())
    }

    /// Evenly spaced ids, at most `cap` of them.
    pub fn spread_centers(&self, cap: usize) -> Vec<PointId> {
        let n = self.len();
        let m = cap.min(n).max(1);
        (0..m).map(|k| k * n / m).collect()
    }

    /// `count` radii log-uniformly spaced on `[resolution_h, diam)`.
    pub fn profile_radii(&self, count: usize) -> Vec<f64> {
        log_grid(self.resolution_h, self.diam, count)
    }

    /// Smallest `C_A ≥ 1` with `C_A⁻¹ r^s ≤ μ(B(x, r)) ≤ C_A r^s` on the
    /// sampled balls. Radii at or beyond the diameter are excluded.
    pub fn ahlfors_profile(
        &self,
        s: f64,
        radii_per_center: usize,
        centers: &[PointId],
    ) -> Result<AhlforsProfile> {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::domain(format!(
                "exponent s must be positive, got {s}"
            )));
        }
        for &c in centers {
            self.check_id(c)?;
        }
        let radii = self.profile_radii(radii_per_center);
        let samples: Vec<AhlforsSample> = centers
            .par_iter()
            .flat_map_iter(|&center| {
                let mut by_dist: Vec<(f64, f64)> = self
                    .ids()
                    .map(|p| (self.dist(center, p), self.mass[p]))
                    .collect();
                by_dist.sort_by(|a, b| a.0.total_cmp(&b.0));
                let mut prefix = Vec::with_capacity(by_dist.len() + 1);
                prefix.push(0.0);
                let mut acc = 0.0;
                for &(_, m) in &by_dist {
                    acc += m;
                    prefix.push(acc);
                }
                let radii = &radii;
                radii.iter().map(move |&radius| {
                    let k = by_dist.partition_point(|&(d, _)| d < radius);
                    AhlforsSample {
                        center,
                        radius,
                        measure: prefix[k],
                    }
                })
            })
            .collect();
        Ok(AhlforsProfile::from_samples(s, samples))
    }

    /// Profile with the default sampling density.
    pub fn ahlfors_profile_default(&self, s: f64) -> Result<AhlforsProfile> {
        let centers = self.spread_centers(DEFAULT_PROFILE_CENTERS);
        self.ahlfors_profile(s, DEFAULT_PROFILE_RADII, &centers)
    }

    pub fn to_document(&self) -> SpaceDocument {
        SpaceDocument {
            s: self.s,
            snowflake_eps: self.snowflake_eps,
            resolution_h: self.resolution_h,
            points: self
                .ids()
                .map(|id| PointRecord {
                    id,
                    coords: self.coords(id).to_vec(),
                    mass: self.mass[id],
                })
                .collect(),
        }
    }

    pub fn from_document(doc: SpaceDocument) -> Result<Self> {
        let n = doc.points.len();
        let mut coords = vec![Vec::new(); n];
        let mut mass = vec![0.0; n];
        let mut seen = vec![false; n];
        for rec in doc.points {
            if rec.id >= n || seen[rec.id] {
                return Err(Error::domain(format!(
                    "point ids must be a permutation of 0..{n}; bad id {}",
                    rec.id
                )));
            }
            seen[rec.id] = true;
            coords[rec.id] = rec.coords;
            mass[rec.id] = rec.mass;
        }
        MetricMeasureSpace::new(coords, mass, doc.s, doc.resolution_h, doc.snowflake_eps)
    }
}

/// `count` values log-uniformly spaced on `[lo, hi)`.
pub fn log_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 0 || !(lo < hi) {
        return Vec::new();
    }
    let ratio = (hi / lo).ln();
    (0..count)
        .map(|k| lo * (ratio * k as f64 / count as f64).exp())
        .filter(|&r| r < hi)
        .collect()
}

/// Open ball `{p : dist(center, p) < radius}`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Ball {
    pub center: PointId,
    pub radius: f64,
}

impl Ball {
    pub fn new(center: PointId, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::domain(format!(
                "ball radius must be positive, got {radius}"
            )));
        }
        Ok(Ball { center, radius })
    }

    /// Concentric ball with twice the radius.
    pub fn doubled(&self) -> Ball {
        Ball {
            center: self.center,
            radius: 2.0 * self.radius,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AhlforsSample {
    pub center: PointId,
    pub radius: f64,
    pub measure: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AhlforsProfile {
    pub s: f64,
    pub c_a_lower: f64,
    pub c_a_upper: f64,
    pub c_a: f64,
    pub samples: Vec<AhlforsSample>,
}

impl AhlforsProfile {
    pub fn from_samples(s: f64, samples: Vec<AhlforsSample>) -> Self {
        let mut lower: f64 = 1.0;
        let mut upper: f64 = 1.0;
        for smp in &samples {
            let rs = smp.radius.powf(s);
            lower = lower.max(rs / smp.measure);
            upper = upper.max(smp.measure / rs);
        }
        AhlforsProfile {
            s,
            c_a_lower: lower,
            c_a_upper: upper,
            c_a: lower.max(upper),
            samples,
        }
    }

    /// Re-checks every recorded sample against `c_a` with relative slack `tol`.
    pub fn recheck(&self, tol: f64) -> bool {
        self.samples.iter().all(|smp| {
            let rs = smp.radius.powf(self.s);
            rs / self.c_a <= smp.measure * (1.0 + tol) && smp.measure <= self.c_a * rs * (1.0 + tol)
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointRecord {
    pub id: PointId,
    pub coords: Vec<f64>,
    pub mass: f64,
}

/// Serialized form of a space. Distances are derived, never stored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpaceDocument {
    pub s: f64,
    pub snowflake_eps: f64,
    pub resolution_h: f64,
    pub points: Vec<PointRecord>,
}
