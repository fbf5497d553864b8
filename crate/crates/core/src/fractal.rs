//! Level-n discretizations of self-similar attractors.
//!
//! Points are images of the origin under every length-n composition of the
//! system's maps, so for systems with a map fixing the origin they lie on the
//! attractor itself. Each point carries the natural self-similar mass
//! `Π ratio_i^s` over its word.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{MetricMeasureSpace, PointId};

/// Default cap on `(number of maps)^level`.
pub const DEFAULT_POINT_BUDGET: usize = 1 << 20;

const ORTHOGONALITY_TOL: f64 = 1e-9;
const MORAN_TOL: f64 = 1e-12;
/// Point count used when a system's attractor diameter must be estimated.
const DIAMETER_PROBE_POINTS: usize = 4096;

/// `x ↦ ratio · M x + offset` with `M` orthogonal (identity when absent).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimilarityMap {
    pub ratio: f64,
    pub offset: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
}

impl SimilarityMap {
    pub fn new(ratio: f64, offset: Vec<f64>) -> Self {
        SimilarityMap {
            ratio,
            offset,
            matrix: None,
        }
    }

    fn apply(&self, x: &[f64], out: &mut Vec<f64>) {
        match &self.matrix {
            None => out.extend(x.iter().zip(&self.offset).map(|(v, o)| self.ratio * v + o)),
            Some(m) => out.extend(m.iter().zip(&self.offset).map(|(row, o)| {
                let rv: f64 = row.iter().zip(x).map(|(a, b)| a * b).sum();
                self.ratio * rv + o
            })),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IfsSystem {
    pub maps: Vec<SimilarityMap>,
    pub ambient_dim: usize,
    /// Declared by the caller; not verified.
    #[serde(default = "default_true")]
    pub open_set_condition: bool,
    /// Diameter of the attractor when known in closed form.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base_diameter: Option<f64>,
}

fn default_true() -> bool {
    true
}

/// Custom-system file layout: `{maps: [{ratio, offset, matrix?}]}`.
#[derive(Clone, Debug, Deserialize)]
pub struct IfsDocument {
    pub maps: Vec<SimilarityMap>,
    #[serde(default)]
    pub base_diameter: Option<f64>,
}

impl IfsSystem {
    pub fn new(maps: Vec<SimilarityMap>) -> Result<Self> {
        let ambient_dim = maps.first().map(|m| m.offset.len()).unwrap_or(0);
        let sys = IfsSystem {
            maps,
            ambient_dim,
            open_set_condition: true,
            base_diameter: None,
        };
        sys.validate()?;
        Ok(sys)
    }

    pub fn from_document(doc: IfsDocument) -> Result<Self> {
        let mut sys = IfsSystem::new(doc.maps)?;
        if let Some(d) = doc.base_diameter {
            if !(d > 0.0 && d.is_finite()) {
                return Err(Error::domain(format!(
                    "base_diameter must be positive, got {d}"
                )));
            }
            sys.base_diameter = Some(d);
        }
        Ok(sys)
    }

    pub fn validate(&self) -> Result<()> {
        if self.maps.len() < 2 {
            return Err(Error::domain("an IFS needs at least 2 maps"));
        }
        if self.ambient_dim == 0 {
            return Err(Error::domain("ambient dimension must be positive"));
        }
        let d = self.ambient_dim;
        for (i, m) in self.maps.iter().enumerate() {
            if !(m.ratio > 0.0 && m.ratio < 1.0) {
                return Err(Error::domain(format!(
                    "map {i}: ratio {} not in (0,1)",
                    m.ratio
                )));
            }
            if m.offset.len() != d || m.offset.iter().any(|v| !v.is_finite()) {
                return Err(Error::domain(format!(
                    "map {i}: offset must be {d} finite reals"
                )));
            }
            if let Some(mat) = &m.matrix {
                if mat.len() != d || mat.iter().any(|row| row.len() != d) {
                    return Err(Error::domain(format!("map {i}: matrix must be {d}×{d}")));
                }
                for a in 0..d {
                    for b in 0..d {
                        let dot: f64 = (0..d).map(|k| mat[k][a] * mat[k][b]).sum();
                        let want = if a == b { 1.0 } else { 0.0 };
                        if (dot - want).abs() > ORTHOGONALITY_TOL {
                            return Err(Error::domain(format!(
                                "map {i}: matrix is not orthogonal"
                            )));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn ratios(&self) -> Vec<f64> {
        self.maps.iter().map(|m| m.ratio).collect()
    }

    pub fn max_ratio(&self) -> f64 {
        self.maps.iter().map(|m| m.ratio).fold(0.0, f64::max)
    }

    pub fn similarity_dimension(&self) -> Result<f64> {
        moran_dimension(&self.ratios())
    }

    fn has_equal_ratios(&self) -> bool {
        let r0 = self.maps[0].ratio;
        self.maps.iter().all(|m| m.ratio == r0)
    }

    /// Ternary Cantor set: `x/3` and `x/3 + 2/3`.
    pub fn cantor3() -> Self {
        IfsSystem {
            maps: vec![
                SimilarityMap::new(1.0 / 3.0, vec![0.0]),
                SimilarityMap::new(1.0 / 3.0, vec![2.0 / 3.0]),
            ],
            ambient_dim: 1,
            open_set_condition: true,
            base_diameter: Some(1.0),
        }
    }

    /// Four-corner Cantor dust in the unit square.
    pub fn cantor_dust() -> Self {
        let t = 2.0 / 3.0;
        IfsSystem {
            maps: [[0.0, 0.0], [t, 0.0], [0.0, t], [t, t]]
                .iter()
                .map(|o| SimilarityMap::new(1.0 / 3.0, o.to_vec()))
                .collect(),
            ambient_dim: 2,
            open_set_condition: true,
            base_diameter: Some(std::f64::consts::SQRT_2),
        }
    }

    /// Unit interval as the attractor of `x/2` and `x/2 + 1/2`.
    pub fn interval() -> Self {
        IfsSystem {
            maps: vec![
                SimilarityMap::new(0.5, vec![0.0]),
                SimilarityMap::new(0.5, vec![0.5]),
            ],
            ambient_dim: 1,
            open_set_condition: true,
            base_diameter: Some(1.0),
        }
    }
}

/// Solves `Σ ratio_i^s = 1` for `s` by bisection.
pub fn moran_dimension(ratios: &[f64]) -> Result<f64> {
    if ratios.is_empty() {
        return Err(Error::domain("moran_dimension needs at least one ratio"));
    }
    if let Some(r) = ratios.iter().find(|r| !(**r > 0.0 && **r < 1.0)) {
        return Err(Error::domain(format!("ratio {r} not in (0,1)")));
    }
    if ratios.len() < 2 {
        return Err(Error::domain(
            "a single ratio has no positive similarity dimension",
        ));
    }
    let excess = |s: f64| ratios.iter().map(|r| r.powf(s)).sum::<f64>() - 1.0;
    let mut lo = 0.0;
    let mut hi = 1.0;
    while excess(hi) > 0.0 {
        lo = hi;
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::domain("similarity dimension exceeds 1e6"));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if excess(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let s = if excess(lo).abs() < excess(hi).abs() {
        lo
    } else {
        hi
    };
    let residual = excess(s).abs();
    if residual >= MORAN_TOL {
        return Err(Error::invariant(format!(
            "bisection left residual {residual:e} on the Moran equation"
        )));
    }
    Ok(s)
}

/// Attractor discretization at a fixed level.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub level: usize,
    pub space: MetricMeasureSpace,
    words: Vec<u32>,
}

impl Discretization {
    /// Length-`level` map-index word that generated `id`.
    pub fn word_of_point(&self, id: PointId) -> &[u32] {
        &self.words[id * self.level..(id + 1) * self.level]
    }

    pub fn into_space(self) -> MetricMeasureSpace {
        self.space
    }
}

struct RawPoints {
    coords: Vec<f64>,
    words: Vec<u32>,
    mass: Vec<f64>,
}

fn enumerate_words(system: &IfsSystem, level: usize, s: f64) -> RawPoints {
    let d = system.ambient_dim;
    let equal = system.has_equal_ratios();
    let weights: Vec<f64> = system.maps.iter().map(|m| m.ratio.powf(s)).collect();
    let mut pts = RawPoints {
        coords: vec![0.0; d],
        words: Vec::new(),
        mass: vec![1.0],
    };
    for k in 0..level {
        let count = pts.mass.len();
        let blocks: Vec<RawPoints> = system
            .maps
            .par_iter()
            .enumerate()
            .map(|(i, map)| {
                let mut coords = Vec::with_capacity(count * d);
                let mut words = Vec::with_capacity(count * (k + 1));
                let mut mass = Vec::with_capacity(count);
                for p in 0..count {
                    map.apply(&pts.coords[p * d..(p + 1) * d], &mut coords);
                    words.push(i as u32);
                    words.extend_from_slice(&pts.words[p * k..(p + 1) * k]);
                    mass.push(weights[i] * pts.mass[p]);
                }
                RawPoints {
                    coords,
                    words,
                    mass,
                }
            })
            .collect();
        let mut next = RawPoints {
            coords: Vec::with_capacity(count * system.maps.len() * d),
            words: Vec::with_capacity(count * system.maps.len() * (k + 1)),
            mass: Vec::with_capacity(count * system.maps.len()),
        };
        for b in blocks {
            next.coords.extend(b.coords);
            next.words.extend(b.words);
            next.mass.extend(b.mass);
        }
        pts = next;
    }
    if equal {
        let n = pts.mass.len();
        pts.mass = vec![1.0 / n as f64; n];
    }
    pts
}

fn point_count(system: &IfsSystem, level: usize, budget: usize) -> Result<usize> {
    let mut count: usize = 1;
    for _ in 0..level {
        count = count
            .checked_mul(system.maps.len())
            .filter(|&c| c <= budget)
            .ok_or_else(|| {
                Error::Resource(format!(
                    "{}^{level} points exceed the point budget {budget}",
                    system.maps.len()
                ))
            })?;
    }
    Ok(count)
}

fn find_collision(pts: &RawPoints, d: usize, tol: f64) -> Option<(usize, usize)> {
    let n = pts.mass.len();
    let c = |i: usize| &pts.coords[i * d..(i + 1) * d];
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| c(a)[0].total_cmp(&c(b)[0]).then(a.cmp(&b)));
    for (k, &a) in order.iter().enumerate() {
        for &b in &order[k + 1..] {
            if c(b)[0] - c(a)[0] > tol {
                break;
            }
            let d2: f64 = c(a).iter().zip(c(b)).map(|(x, y)| (x - y) * (x - y)).sum();
            if d2.sqrt() <= tol {
                return Some((a.min(b), a.max(b)));
            }
        }
    }
    None
}

fn estimate_base_diameter(system: &IfsSystem) -> f64 {
    let mut level = 0;
    let mut count = 1;
    while count * system.maps.len() <= DIAMETER_PROBE_POINTS {
        count *= system.maps.len();
        level += 1;
    }
    let pts = enumerate_words(system, level, 1.0);
    let d = system.ambient_dim;
    let c = |i: usize| &pts.coords[i * d..(i + 1) * d];
    (0..count)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..count)
                .map(|j| {
                    c(i).iter()
                        .zip(c(j))
                        .map(|(x, y)| (x - y) * (x - y))
                        .sum::<f64>()
                        .sqrt()
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max)
}

/// Builds the level-`level` discretization with the default point budget.
pub fn build(system: &IfsSystem, level: usize) -> Result<Discretization> {
    build_with_budget(system, level, DEFAULT_POINT_BUDGET)
}

pub fn build_with_budget(
    system: &IfsSystem,
    level: usize,
    budget: usize,
) -> Result<Discretization> {
    system.validate()?;
    point_count(system, level, budget)?;
    let s = system.similarity_dimension()?;
    let base_diameter = match system.base_diameter {
        Some(d) => d,
        None => estimate_base_diameter(system),
    };
    let pts = enumerate_words(system, level, s);
    let d = system.ambient_dim;
    if let Some((a, b)) = find_collision(&pts, d, 1e-12 * base_diameter.max(f64::MIN_POSITIVE)) {
        let w = |i: usize| pts.words[i * level..(i + 1) * level].to_vec();
        return Err(Error::Construction(format!(
            "words {:?} and {:?} map the seed to the same point",
            w(a),
            w(b)
        )));
    }
    let resolution_h = system.max_ratio().powi(level as i32) * base_diameter;
    let coords: Vec<Vec<f64>> = pts.coords.chunks(d).map(|c| c.to_vec()).collect();
    let space = MetricMeasureSpace::new(coords, pts.mass, s, resolution_h, 1.0)?;
    Ok(Discretization {
        level,
        space,
        words: pts.words,
    })
}

/// Named systems available without a definition file.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Builtin {
    Cantor3,
    CantorDust,
    Interval,
    SnowflakeInterval(f64),
}

impl FromStr for Builtin {
    type Err = Error;

    fn from_str(name: &str) -> Result<Self> {
        match name {
            "cantor3" => Ok(Builtin::Cantor3),
            "cantor-dust" | "cantor_dust" => Ok(Builtin::CantorDust),
            "interval" => Ok(Builtin::Interval),
            other => {
                let eps = other
                    .strip_prefix("snowflake:")
                    .or_else(|| other.strip_prefix("snowflake_interval:"))
                    .ok_or_else(|| Error::domain(format!("unknown system '{other}'")))?;
                let eps: f64 = eps
                    .parse()
                    .map_err(|_| Error::domain(format!("bad snowflake exponent '{eps}'")))?;
                Ok(Builtin::SnowflakeInterval(eps))
            }
        }
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Builtin::Cantor3 => write!(f, "cantor3"),
            Builtin::CantorDust => write!(f, "cantor-dust"),
            Builtin::Interval => write!(f, "interval"),
            Builtin::SnowflakeInterval(eps) => write!(f, "snowflake:{eps}"),
        }
    }
}

pub fn builtin(which: Builtin, level: usize) -> Result<Discretization> {
    match which {
        Builtin::Cantor3 => build(&IfsSystem::cantor3(), level),
        Builtin::CantorDust => build(&IfsSystem::cantor_dust(), level),
        Builtin::Interval => build(&IfsSystem::interval(), level),
        Builtin::SnowflakeInterval(eps) => {
            if !(eps > 0.0 && eps < 1.0) {
                return Err(Error::domain(format!(
                    "snowflake exponent must lie in (0,1), got {eps}"
                )));
            }
            let mut disc = build(&IfsSystem::interval(), level)?;
            disc.space = disc.space.snowflaked(eps)?;
            Ok(disc)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::space::Ball;

    #[test]
    fn moran_examples() {
        let s = moran_dimension(&[1.0 / 3.0, 1.0 / 3.0]).unwrap();
        assert!((s - 2f64.ln() / 3f64.ln()).abs() < 1e-12);
        assert!((s - 0.6309297536).abs() < 1e-10);
        assert!((moran_dimension(&[0.5, 0.5]).unwrap() - 1.0).abs() < 1e-12);
        let s4 = moran_dimension(&[1.0 / 3.0; 4]).unwrap();
        // substitution check of 4·(1/3)^s = 1
        assert!((4.0 * (1.0f64 / 3.0).powf(s4) - 1.0).abs() < 1e-12);
        assert!((s4 - 1.2618595071).abs() < 1e-10);
    }

    #[test]
    fn moran_rejects_bad_ratios() {
        assert!(moran_dimension(&[]).is_err());
        assert!(moran_dimension(&[0.5, 1.0]).is_err());
        assert!(moran_dimension(&[0.0, 0.5]).is_err());
    }

    #[test]
    fn moran_monotone() {
        let base = [0.3, 0.25, 0.4];
        let s = moran_dimension(&base).unwrap();
        let more = moran_dimension(&[0.3, 0.25, 0.4, 0.1]).unwrap();
        assert!(more > s);
        let scaled: Vec<f64> = base.iter().map(|r| r * 0.9).collect();
        assert!(moran_dimension(&scaled).unwrap() < s);
    }

    #[test]
    fn cantor_level_one() {
        let d = builtin(Builtin::Cantor3, 1).unwrap();
        assert_eq!(d.space.coords(0), &[0.0]);
        assert!((d.space.coords(1)[0] - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(d.space.masses(), &[0.5, 0.5]);
        assert_eq!(d.word_of_point(1), &[1]);
    }

    #[test]
    fn level_zero_is_single_point() {
        for b in [Builtin::Cantor3, Builtin::CantorDust, Builtin::Interval] {
            let d = builtin(b, 0).unwrap();
            assert_eq!(d.space.len(), 1);
            assert_eq!(d.space.mass(0), 1.0);
        }
    }

    // Oracle: base-3 expansions with digits in {0, 2}.
    #[test]
    fn cantor_matches_ternary_expansions() {
        let n = 7;
        let d = builtin(Builtin::Cantor3, n).unwrap();
        let mut expected: Vec<f64> = (0..1u32 << n)
            .map(|bits| {
                (0..n)
                    .map(|k| {
                        let digit = if bits >> (n - 1 - k) & 1 == 1 {
                            2.0
                        } else {
                            0.0
                        };
                        digit / 3f64.powi(k as i32 + 1)
                    })
                    .sum()
            })
            .collect();
        expected.sort_by(f64::total_cmp);
        let mut got: Vec<f64> = d.space.ids().map(|p| d.space.coords(p)[0]).collect();
        got.sort_by(f64::total_cmp);
        assert_eq!(got.len(), 128);
        for (a, b) in got.iter().zip(&expected) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(got.iter().all(|&x| (0.0..=1.0).contains(&x)));
    }

    #[test]
    fn cantor_dust_level_two() {
        let d = builtin(Builtin::CantorDust, 2).unwrap();
        assert_eq!(d.space.len(), 16);
        assert!(d.space.masses().iter().all(|&m| m == 1.0 / 16.0));
        assert!((d.space.s() - 4f64.ln() / 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn interval_and_snowflake() {
        let d = builtin(Builtin::Interval, 5).unwrap();
        assert_eq!(d.space.len(), 32);
        assert!((d.space.s() - 1.0).abs() < 1e-12);
        assert!((d.space.resolution_h() - 1.0 / 32.0).abs() < 1e-15);
        let sf = builtin(Builtin::SnowflakeInterval(0.5), 5).unwrap();
        assert!((sf.space.s() - 2.0).abs() < 1e-12);
        assert!((sf.space.dist(0, 1) - (1.0f64 / 32.0).sqrt()).abs() < 1e-15);
        assert!(builtin(Builtin::SnowflakeInterval(1.0), 3).is_err());
    }

    #[test]
    fn mass_conservation_and_word_order() {
        let sys = IfsSystem::new(vec![
            SimilarityMap::new(0.5, vec![0.0]),
            SimilarityMap::new(0.25, vec![0.75]),
        ])
        .unwrap();
        let d = build(&sys, 6).unwrap();
        assert!((d.space.total_mass() - 1.0).abs() < 1e-12);
        let s = d.space.s();
        for p in d.space.ids() {
            let expect: f64 = d
                .word_of_point(p)
                .iter()
                .map(|&i| sys.maps[i as usize].ratio.powf(s))
                .product();
            assert!((d.space.mass(p) - expect).abs() < 1e-15);
        }
        for p in 1..d.space.len() {
            assert!(d.word_of_point(p - 1) < d.word_of_point(p));
        }
    }

    // Corner-centred balls only isolate a sub-cell in 1-D gapped systems.
    #[test]
    fn nesting_consistency() {
        let quarter = IfsSystem::new(vec![
            SimilarityMap::new(0.25, vec![0.0]),
            SimilarityMap::new(0.25, vec![0.75]),
        ])
        .unwrap();
        for sys in [IfsSystem::cantor3(), quarter] {
            let d = build(&sys, 6).unwrap();
            let sp = &d.space;
            for map in &sys.maps {
                let center = sp
                    .ids()
                    .find(|&p| (sp.coords(p)[0] - map.offset[0]).abs() < 1e-12)
                    .unwrap();
                let r = map.ratio * sp.diam() + sp.resolution_h();
                let m = sp.ball_measure(&Ball::new(center, r).unwrap()).unwrap();
                assert!((m - map.ratio.powf(sp.s())).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn budget_and_collisions() {
        let err = build_with_budget(&IfsSystem::cantor3(), 11, 1024).unwrap_err();
        assert!(matches!(err, Error::Resource(_)));
        let overlapping = IfsSystem::new(vec![
            SimilarityMap::new(0.5, vec![0.0]),
            SimilarityMap::new(0.5, vec![0.25]),
            SimilarityMap::new(0.5, vec![0.5]),
        ])
        .unwrap();
        let err = build(&overlapping, 3).unwrap_err();
        assert!(matches!(err, Error::Construction(_)), "{err}");
    }

    #[test]
    fn rotated_maps_and_estimated_diameter() {
        let sys = IfsSystem::new(vec![
            SimilarityMap {
                ratio: 0.4,
                offset: vec![0.0, 0.0],
                matrix: Some(vec![vec![0.0, -1.0], vec![1.0, 0.0]]),
            },
            SimilarityMap::new(0.4, vec![0.6, 0.0]),
        ])
        .unwrap();
        let d = build(&sys, 4).unwrap();
        assert_eq!(d.space.len(), 16);
        assert!(d.space.resolution_h() > 0.0);
        let bad = IfsSystem::new(vec![
            SimilarityMap {
                ratio: 0.4,
                offset: vec![0.0, 0.0],
                matrix: Some(vec![vec![2.0, 0.0], vec![0.0, 1.0]]),
            },
            SimilarityMap::new(0.4, vec![0.6, 0.0]),
        ]);
        assert!(bad.is_err());
    }

    #[test]
    fn parses_builtin_names() {
        assert_eq!("cantor3".parse::<Builtin>().unwrap(), Builtin::Cantor3);
        assert_eq!(
            "cantor-dust".parse::<Builtin>().unwrap(),
            Builtin::CantorDust
        );
        assert_eq!(
            "snowflake:0.5".parse::<Builtin>().unwrap(),
            Builtin::SnowflakeInterval(0.5)
        );
        assert!("koch".parse::<Builtin>().is_err());
    }
}
