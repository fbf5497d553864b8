//! Disjoint shrinking-ball chains around a point.
//!
//! Given a root ball `B(x, r)` in a regular space, the chain consists of balls
//! `B_i = B(x_i, C0^i r)`, `i = 1, 2, ...`, each sitting in the annulus
//! `B(x, C0^{i-1} r) \ B(x, C0^i r)`. Centers are annulus witnesses at scale
//! `C1^{2i-1} r`. Finite resolution truncates the chain once `C0^i r` drops
//! below the space's resolution.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::space::{Ball, MetricMeasureSpace, PointId};

pub const DEFAULT_SAFETY: f64 = 0.9;

/// `(√5 − 1)/2`, the cap on `C1` that keeps `C1(1 + C1) ≤ 1`.
pub const GOLDEN_CAP: f64 = 0.618_033_988_749_894_9;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChainConstants {
    pub c: f64,
    pub c1: f64,
    pub c0: f64,
    /// Regularity constant the annulus parameter was derived from.
    pub c_a: f64,
    pub s: f64,
    pub safety: f64,
}

fn capped_c1(c: f64) -> f64 {
    (c / 2.0).min(GOLDEN_CAP)
}

impl ChainConstants {
    fn assemble(c: f64, c_a: f64, s: f64, safety: f64) -> Result<Self> {
        let c1 = capped_c1(c);
        let k = ChainConstants {
            c,
            c1,
            c0: c1 * c1,
            c_a,
            s,
            safety,
        };
        k.check()?;
        Ok(k)
    }

    /// Checks the two containment conditions the chain relies on:
    /// `c − C1 ≥ C1` and `C1 (1 + C1) ≤ 1`.
    pub fn check(&self) -> Result<()> {
        let in_unit = |v: f64| v > 0.0 && v < 1.0;
        if !(in_unit(self.c) && in_unit(self.c1) && in_unit(self.c0)) {
            return Err(Error::invariant(format!(
                "chain constants outside (0,1): c={}, C1={}, C0={}",
                self.c, self.c1, self.c0
            )));
        }
        if self.c - self.c1 < self.c1 {
            return Err(Error::invariant(format!(
                "c - C1 < C1 (c={}, C1={})",
                self.c, self.c1
            )));
        }
        if self.c1 * (1.0 + self.c1) > 1.0 {
            return Err(Error::invariant(format!("C1(1+C1) > 1 (C1={})", self.c1)));
        }
        Ok(())
    }
}

/// Constants for a space with regularity constant `c_a` in dimension `s`:
/// `c = safety · C_A^{-2/s}`, `C1 = min{c/2, (√5−1)/2}`, `C0 = C1²`.
pub fn chain_constants(c_a: f64, s: f64, safety: f64) -> Result<ChainConstants> {
    if !(c_a >= 1.0 && c_a.is_finite()) {
        return Err(Error::domain(format!(
            "C_A must be a finite value ≥ 1, got {c_a}"
        )));
    }
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::domain(format!("s must be positive, got {s}")));
    }
    if !(safety > 0.0 && safety < 1.0) {
        return Err(Error::domain(format!(
            "safety must lie in (0,1), got {safety}"
        )));
    }
    // C0 = min(c/2, golden)² must be a normal float (with a factor e of
    // headroom for rounding); decide in log space.
    let ln_c0 =
        2.0 * (safety.ln() - 2.0 / s * c_a.ln() - std::f64::consts::LN_2).min(GOLDEN_CAP.ln());
    if ln_c0 < f64::MIN_POSITIVE.ln() + 1.0 {
        return Err(Error::domain(format!(
            "chain constants underflow for C_A={c_a}, s={s}: ln C0 = {ln_c0}"
        )));
    }
    let c = safety * c_a.powf(-2.0 / s);
    ChainConstants::assemble(c, c_a, s, safety)
}

/// A point `y` with `c·r ≤ dist(x, y) < r`: the farthest such point, ties
/// broken by smallest id.
pub fn annulus_witness(space: &MetricMeasureSpace, x: PointId, r: f64, c: f64) -> Result<PointId> {
    space.check_id(x)?;
    if !(r > 0.0 && r.is_finite()) {
        return Err(Error::domain(format!("radius must be positive, got {r}")));
    }
    if !(c > 0.0 && c < 1.0) {
        return Err(Error::domain(format!(
            "annulus parameter must lie in (0,1), got {c}"
        )));
    }
    let inner = c * r;
    let mut best: Option<(f64, PointId)> = None;
    for p in space.ids() {
        let d = space.dist(x, p);
        if d >= inner && d < r && best.is_none_or(|(bd, _)| d > bd) {
            best = Some((d, p));
        }
    }
    match best {
        Some((_, p)) => Ok(p),
        None => Err(Error::AnnulusEmpty {
            center: x,
            radius: r,
            c,
            outer_measure: space.ball_measure(&Ball {
                center: x,
                radius: r,
            })?,
            inner_measure: space.ball_measure(&Ball {
                center: x,
                radius: inner,
            })?,
        }),
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainBall {
    /// 1-based position in the chain.
    pub index: usize,
    pub ball: Ball,
    /// Annulus witness (also the ball's center) and the scale it was found at.
    pub witness: PointId,
    pub witness_scale: f64,
    pub witness_distance: f64,
    pub members: Vec<PointId>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct ChainChecks {
    pub disjoint: bool,
    pub annulus_containment: bool,
    pub distance_sandwich: bool,
    pub consecutive_bound: bool,
}

impl ChainChecks {
    pub fn all(&self) -> bool {
        self.disjoint
            && self.annulus_containment
            && self.distance_sandwich
            && self.consecutive_bound
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BallChain {
    pub root: Ball,
    pub constants: ChainConstants,
    pub balls: Vec<ChainBall>,
    /// Number of balls emitted before the resolution cut-off.
    pub truncated_at: usize,
    pub checks: ChainChecks,
}

impl BallChain {
    pub fn len(&self) -> usize {
        self.balls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.balls.is_empty()
    }

    /// `C0^i · r`, with `i = 0` giving the root radius.
    pub fn radius_at(&self, i: usize) -> f64 {
        self.constants.c0.powi(i as i32) * self.root.radius
    }
}

/// Rejects roots outside `0 < r < diam(X)`.
pub fn check_root(space: &MetricMeasureSpace, root: &Ball) -> Result<()> {
    space.check_id(root.center)?;
    if !(root.radius > 0.0 && root.radius < space.diam()) {
        return Err(Error::domain(format!(
            "precondition 0<r<diam(X) violated: r = {}, diam = {}",
            root.radius,
            space.diam()
        )));
    }
    Ok(())
}

pub fn build_chain(
    space: &MetricMeasureSpace,
    root: Ball,
    constants: ChainConstants,
) -> Result<BallChain> {
    check_root(space, &root)?;
    constants.check()?;
    let x = root.center;
    let h = space.resolution_h();
    let mut balls = Vec::new();
    for i in 1.. {
        let radius = constants.c0.powi(i as i32) * root.radius;
        if radius < h {
            break;
        }
        let scale = constants.c1.powi(2 * i as i32 - 1) * root.radius;
        let witness = annulus_witness(space, x, scale, constants.c)?;
        let ball = Ball {
            center: witness,
            radius,
        };
        let members = space.ball_members(&ball)?;
        let singleton = members.len() == 1;
        balls.push(ChainBall {
            index: i,
            ball,
            witness,
            witness_scale: scale,
            witness_distance: space.dist(x, witness),
            members,
        });
        if singleton {
            break;
        }
    }
    let mut chain = BallChain {
        root,
        constants,
        truncated_at: balls.len(),
        balls,
        checks: ChainChecks::default(),
    };
    chain.checks = verify_chain(space, &chain)?;
    Ok(chain)
}

/// Builds one chain per root, in parallel; results keep the input order.
pub fn build_chains(
    space: &MetricMeasureSpace,
    roots: &[Ball],
    constants: ChainConstants,
) -> Vec<Result<BallChain>> {
    roots
        .par_iter()
        .map(|&root| build_chain(space, root, constants))
        .collect()
}

/// Set-level verification of a chain. Disjointness and annulus containment
/// are exact; a failure is reported as an invariant violation.
pub fn verify_chain(space: &MetricMeasureSpace, chain: &BallChain) -> Result<ChainChecks> {
    let x = chain.root.center;
    let mut owner = vec![usize::MAX; space.len()];
    for b in &chain.balls {
        for &p in &b.members {
            if owner[p] != usize::MAX {
                return Err(Error::invariant(format!(
                    "balls {} and {} share point {p}",
                    owner[p], b.index
                )));
            }
            owner[p] = b.index;
        }
    }
    for b in &chain.balls {
        let outer = chain.radius_at(b.index - 1);
        let inner = chain.radius_at(b.index);
        if inner != b.ball.radius {
            return Err(Error::invariant(format!(
                "ball {} has radius {} instead of C0^i r = {inner}",
                b.index, b.ball.radius
            )));
        }
        for &z in &b.members {
            let d = space.dist(x, z);
            if !(d < outer && d >= inner) {
                return Err(Error::invariant(format!(
                    "point {z} of ball {} lies at distance {d} from the root center, \
                     outside the annulus [{inner}, {outer})",
                    b.index
                )));
            }
            if d > inner / chain.constants.c0 {
                return Err(Error::invariant(format!(
                    "point {z} of ball {} violates dist(x,z) ≤ C0⁻¹ r_i",
                    b.index
                )));
            }
        }
    }
    for pair in chain.balls.windows(2) {
        let bound = 2.0 * pair[0].ball.radius / chain.constants.c0;
        for &z in &pair[0].members {
            for &w in &pair[1].members {
                if space.dist(z, w) > bound {
                    return Err(Error::invariant(format!(
                        "points {z} (ball {}) and {w} (ball {}) exceed 2·C0⁻¹·r_i",
                        pair[0].index, pair[1].index
                    )));
                }
            }
        }
    }
    Ok(ChainChecks {
        disjoint: true,
        annulus_containment: true,
        distance_sandwich: true,
        consecutive_bound: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fractal::{builtin, Builtin};

    #[test]
    fn constants_limit_case() {
        let k = chain_constants(1.0, 1.0, 1.0 - 1e-12).unwrap();
        assert!((k.c - 1.0).abs() < 1e-11);
        assert!((k.c1 - 0.5).abs() < 1e-11);
        assert!((k.c0 - 0.25).abs() < 1e-11);
    }

    #[test]
    fn golden_cap_branch() {
        // Only reachable for c ≥ √5 − 1, i.e. outside (0,1); checked on the raw formula.
        assert_eq!(capped_c1(1.3), GOLDEN_CAP);
        assert!((GOLDEN_CAP - (5f64.sqrt() - 1.0) / 2.0).abs() < 1e-16);
        assert!((GOLDEN_CAP * GOLDEN_CAP - 0.3819660112501051).abs() < 1e-15);
        let g = capped_c1(2.0);
        assert!(g * (1.0 + g) <= 1.0 + 1e-15);
    }

    #[test]
    fn constants_cantor_example() {
        let s = 2f64.ln() / 3f64.ln();
        let k = chain_constants(4.0, s, 0.9).unwrap();
        let c = 0.9 * 4f64.powf(-2.0 / s);
        assert!((k.c - c).abs() < 1e-15);
        assert!((k.c - 0.0111).abs() < 1e-3);
        assert_eq!(k.c1, k.c / 2.0);
        assert_eq!(k.c0, k.c1 * k.c1);
    }

    #[test]
    fn constants_reject_bad_safety() {
        assert!(chain_constants(2.0, 1.0, 0.0).is_err());
        assert!(chain_constants(2.0, 1.0, 1.0).is_err());
        assert!(chain_constants(0.5, 1.0, 0.5).is_err());
    }

    #[test]
    fn witness_on_interval() {
        let sp = builtin(Builtin::Interval, 6).unwrap().space;
        let y = annulus_witness(&sp, 0, 0.5, 0.5).unwrap();
        let c = sp.coords(y)[0];
        assert!((0.25..0.5).contains(&c));
        // farthest candidate wins
        assert!((c - (0.5 - 1.0 / 64.0)).abs() < 1e-15);
    }

    // Brute-force oracle over the 64 level-6 points.
    #[test]
    fn witness_on_cantor() {
        let sp = builtin(Builtin::Cantor3, 6).unwrap().space;
        let y = annulus_witness(&sp, 0, 1.0, 0.4).unwrap();
        let candidates: Vec<PointId> = sp
            .ids()
            .filter(|&p| sp.dist(0, p) >= 0.4 && sp.dist(0, p) < 1.0)
            .collect();
        assert!(candidates.iter().all(|&p| sp.coords(p)[0] >= 2.0 / 3.0));
        assert!(candidates.contains(&y));
        assert!(sp.coords(y)[0] >= 2.0 / 3.0);
    }

    #[test]
    fn witness_failure_reports_measures() {
        let sp = builtin(Builtin::Cantor3, 2).unwrap().space;
        let err = annulus_witness(&sp, 0, 1.0 / 3.0 - 1e-9, 0.9).unwrap_err();
        match err {
            Error::AnnulusEmpty {
                outer_measure,
                inner_measure,
                ..
            } => assert_eq!(outer_measure, inner_measure),
            other => panic!("unexpected {other}"),
        }
    }

    #[test]
    fn small_root_gives_empty_chain() {
        let sp = builtin(Builtin::Interval, 6).unwrap().space;
        let k = chain_constants(2.0, 1.0, 0.9).unwrap();
        let chain = build_chain(&sp, Ball::new(5, sp.resolution_h() * 0.5).unwrap(), k).unwrap();
        assert!(chain.is_empty());
        assert_eq!(chain.truncated_at, 0);
    }

    #[test]
    fn root_at_diameter_is_rejected() {
        let sp = builtin(Builtin::Interval, 6).unwrap().space;
        let k = chain_constants(2.0, 1.0, 0.9).unwrap();
        let err = build_chain(&sp, Ball::new(0, sp.diam()).unwrap(), k).unwrap_err();
        assert!(err.to_string().contains("0<r<diam(X)"));
    }

    #[test]
    fn interval_chain_length_matches_geometric_decay() {
        let d = builtin(Builtin::Interval, 10).unwrap();
        let sp = d.space;
        let prof = sp.ahlfors_profile_default(1.0).unwrap();
        let k = chain_constants(prof.c_a, 1.0, DEFAULT_SAFETY).unwrap();
        let mid = sp.len() / 2;
        let r = 0.4;
        let chain = build_chain(&sp, Ball::new(mid, r).unwrap(), k).unwrap();
        let predicted = ((r / sp.resolution_h()).ln() / (1.0 / k.c0).ln()).floor() as usize;
        assert_eq!(chain.len(), predicted);
        for b in &chain.balls {
            assert_eq!(b.ball.radius, k.c0.powi(b.index as i32) * r);
        }
        assert!(chain.checks.all());
    }

    #[test]
    fn cantor_chain_with_profiled_constants() {
        let sp = builtin(Builtin::Cantor3, 10).unwrap().space;
        let prof = sp.ahlfors_profile_default(sp.s()).unwrap();
        let k = chain_constants(prof.c_a, sp.s(), DEFAULT_SAFETY).unwrap();
        let chain = build_chain(&sp, Ball::new(0, 0.9).unwrap(), k).unwrap();
        assert!(!chain.is_empty());
        assert!(chain.checks.all());
    }
}
