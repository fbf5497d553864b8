//! Oscillation estimates for Hajłasz gradients.
//!
//! For `s ≤ 1` and admissible `g`, the oscillation of `u` over a ball `B` is
//! controlled by `(Σ_{2B} g^s μ)^{1/s}`. This module measures the ratio on
//! sampled balls, replays the chain argument behind the estimate as a list of
//! checked inequalities, and tracks a log-log field across refinement levels
//! for `s > 1`.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::chain::{build_chain, BallChain, ChainConstants};
use crate::error::{Error, Result};
use crate::fractal::{builtin, Builtin};
use crate::gradient::{halfmax_gradient, is_admissible, loglog_field, GradientField, ScalarField};
use crate::space::{Ball, MetricMeasureSpace, PointId, DEFAULT_TOL};

/// `max − min` of `u` over the members of `ball`.
pub fn oscillation(space: &MetricMeasureSpace, u: &ScalarField, ball: &Ball) -> Result<f64> {
    space.check_field_len(u.values())?;
    let members = space.ball_members(ball)?;
    if members.is_empty() {
        return Err(Error::domain(format!(
            "ball around {} with radius {} is empty",
            ball.center, ball.radius
        )));
    }
    Ok(spread(u.values(), &members))
}

fn spread(u: &[f64], members: &[PointId]) -> f64 {
    let (lo, hi) = members
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &p| {
            (lo.min(u[p]), hi.max(u[p]))
        });
    hi - lo
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct OscillationReport {
    pub ball: Ball,
    pub osc: f64,
    /// `s`-energy of `g` over the doubled ball.
    pub rhs: f64,
    /// `osc / rhs`; `0` when both vanish, `+∞` when only `rhs` does.
    pub ratio: f64,
    /// Same quantities with the energy taken over `B` itself.
    pub rhs_inner: f64,
    pub ratio_inner: f64,
    /// `rhs = 0 < osc` for an admissible `g`: impossible up to tolerance.
    pub violation: bool,
}

fn ratio(osc: f64, rhs: f64) -> f64 {
    if rhs > 0.0 {
        osc / rhs
    } else if osc > 0.0 {
        f64::INFINITY
    } else {
        0.0
    }
}

fn ball_report(
    space: &MetricMeasureSpace,
    u: &[f64],
    g: &[f64],
    ball: Ball,
    s: f64,
) -> Result<OscillationReport> {
    let members = space.ball_members(&ball)?;
    let osc = spread(u, &members);
    let rhs_inner = space.ls_energy(g, &members, s)?;
    let rhs = space.ls_energy(g, &space.ball_members(&ball.doubled())?, s)?;
    Ok(OscillationReport {
        ball,
        osc,
        rhs,
        ratio: ratio(osc, rhs),
        rhs_inner,
        ratio_inner: ratio(osc, rhs_inner),
        violation: rhs == 0.0 && osc > 0.0,
    })
}

fn require_admissible(
    space: &MetricMeasureSpace,
    u: &ScalarField,
    g: &GradientField,
    tol: f64,
) -> Result<()> {
    let adm = is_admissible(space, u, g.values(), tol)?;
    if !adm.admissible {
        let (x, y) = adm.worst_pair.unwrap_or((0, 0));
        return Err(Error::domain(format!(
            "g is not a Hajłasz gradient of u: slack {} at pair ({x}, {y})",
            adm.slack
        )));
    }
    Ok(())
}

fn check_exponent(s: f64) -> Result<()> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(Error::domain(format!(
            "exponent s must be positive, got {s}"
        )));
    }
    Ok(())
}

/// Compares `osc_B u` with `(Σ_{2B} g^s μ)^{1/s}` on one ball.
pub fn verify_star(
    space: &MetricMeasureSpace,
    u: &ScalarField,
    g: &GradientField,
    ball: &Ball,
    s: f64,
) -> Result<OscillationReport> {
    check_exponent(s)?;
    require_admissible(space, u, g, DEFAULT_TOL)?;
    ball_report(space, u.values(), g.values(), *ball, s)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScanConfig {
    pub centers: usize,
    pub radii: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ScanReport {
    pub config: ScanConfig,
    pub s: f64,
    /// Largest finite ratio over the scanned balls (`0` if there is none).
    #[serde(rename = "C_emp")]
    pub c_emp: f64,
    pub c_emp_inner: f64,
    pub violations: usize,
    pub balls: Vec<OscillationReport>,
}

/// Seeded ball sample: distinct centers, radii log-uniform in `[h, diam/2)`.
pub fn sample_balls(space: &MetricMeasureSpace, config: &ScanConfig) -> Result<Vec<Ball>> {
    let lo = space.resolution_h();
    let hi = space.diam() / 2.0;
    if !(lo < hi) {
        return Err(Error::domain(format!(
            "no admissible radii: resolution {lo} is not below diam/2 = {hi}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut centers = sample(&mut rng, space.len(), config.centers.min(space.len())).into_vec();
    centers.sort_unstable();
    let span = (hi / lo).ln();
    let below_hi = f64::from_bits(hi.to_bits() - 1);
    let mut balls = Vec::with_capacity(centers.len() * config.radii);
    for center in centers {
        for _ in 0..config.radii {
            let t: f64 = rng.gen();
            let radius = (lo * (span * t).exp()).min(below_hi);
            balls.push(Ball { center, radius });
        }
    }
    Ok(balls)
}

/// Empirical constant for the oscillation estimate over a seeded ball sample.
pub fn best_constant_scan(
    space: &MetricMeasureSpace,
    u: &ScalarField,
    g: &GradientField,
    s: f64,
    config: ScanConfig,
) -> Result<ScanReport> {
    best_constant_scan_with_tol(space, u, g, s, config, DEFAULT_TOL)
}

/// [`best_constant_scan`] with an explicit admissibility tolerance.
pub fn best_constant_scan_with_tol(
    space: &MetricMeasureSpace,
    u: &ScalarField,
    g: &GradientField,
    s: f64,
    config: ScanConfig,
    tol: f64,
) -> Result<ScanReport> {
    check_exponent(s)?;
    require_admissible(space, u, g, tol)?;
    let balls = sample_balls(space, &config)?;
    let reports = balls
        .par_iter()
        .map(|&b| ball_report(space, u.values(), g.values(), b, s))
        .collect::<Result<Vec<_>>>()?;
    let finite_max = |f: fn(&OscillationReport) -> f64| {
        reports
            .iter()
            .map(f)
            .filter(|r| r.is_finite())
            .fold(0.0, f64::max)
    };
    Ok(ScanReport {
        config,
        s,
        c_emp: finite_max(|r| r.ratio),
        c_emp_inner: finite_max(|r| r.ratio_inner),
        violations: reports.iter().filter(|r| r.violation).count(),
        balls: reports,
    })
}

/// One checked inequality `lhs ≤ rhs`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateCheck {
    pub name: String,
    pub index: Option<usize>,
    pub lhs: f64,
    pub rhs: f64,
}

impl CertificateCheck {
    pub fn holds(&self, tol: f64) -> bool {
        self.lhs <= self.rhs + tol * self.rhs.abs().max(1.0)
    }
}

/// Direct pair estimate `|u(a) − u(b)| ≤ dist(a,b)(g(a) + g(b))`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PairBridge {
    pub from: PointId,
    pub to: PointId,
    pub difference: f64,
    pub bound: f64,
}

fn pair_bridge(
    space: &MetricMeasureSpace,
    u: &[f64],
    g: &[f64],
    a: PointId,
    b: PointId,
) -> PairBridge {
    PairBridge {
        from: a,
        to: b,
        difference: (u[a] - u[b]).abs(),
        bound: space.dist(a, b) * (g[a] + g[b]),
    }
}

/// The telescoping estimate for one endpoint.
#[derive(Clone, Debug, Serialize)]
pub struct ChainEstimate {
    pub point: PointId,
    pub chain: BallChain,
    /// `z_i = argmin_{B_i} g`, ties to the smallest id.
    pub selected: Vec<PointId>,
    /// `(Σ_{B_i} g^s μ)^{1/s}`.
    pub ball_energies: Vec<f64>,
    /// `dist(z_i, z_{i+1}) (g(z_i) + g(z_{i+1}))`.
    pub terms: Vec<f64>,
    pub telescoping_sum: f64,
    /// Replaces the infinite tail: the pair estimate from `z_k` to the point.
    pub tail: PairBridge,
    /// Energy of `g` over the root ball.
    pub root_energy: f64,
    /// `C_cert · root_energy + tail.bound`.
    pub endpoint_bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ChainCertificate {
    pub s: f64,
    pub root: Ball,
    /// Lower regularity constant actually used: the chain's `C_A`, raised if
    /// some chain ball has `μ(B_i) < r_i^s / C_A`.
    pub c_a_eff: f64,
    /// `2 C_A^{1/s} (C0⁻¹ + C0⁻²)`.
    pub c_cert: f64,
    pub x: ChainEstimate,
    pub y: ChainEstimate,
    /// Pair estimate between the first selected points of the two chains.
    pub bridge: PairBridge,
    /// `8 C_A^{1/s} C0⁻¹ (Σ_{B(x,2r)} g^s μ)^{1/s}`.
    pub bridge_bound: f64,
    pub difference: f64,
    pub total_bound: f64,
    pub checks: Vec<CertificateCheck>,
}

struct Partial {
    point: PointId,
    chain: BallChain,
    selected: Vec<PointId>,
    ball_energies: Vec<f64>,
    terms: Vec<f64>,
    tail: PairBridge,
    root_energy: f64,
    c_a_needed: f64,
}

fn partial_estimate(
    space: &MetricMeasureSpace,
    u: &[f64],
    g: &[f64],
    point: PointId,
    r: f64,
    s: f64,
    constants: ChainConstants,
) -> Result<Partial> {
    let chain = build_chain(space, Ball::new(point, r)?, constants)?;
    if chain.is_empty() {
        return Err(Error::Construction(format!(
            "chain around {point} with radius {r} is empty at resolution {}",
            space.resolution_h()
        )));
    }
    let mut selected = Vec::with_capacity(chain.len());
    let mut ball_energies = Vec::with_capacity(chain.len());
    let mut c_a_needed: f64 = 1.0;
    for b in &chain.balls {
        let z = b.members.iter().copied().fold(
            b.members[0],
            |best, p| if g[p] < g[best] { p } else { best },
        );
        selected.push(z);
        ball_energies.push(space.ls_energy(g, &b.members, s)?);
        let mu: f64 = b.members.iter().map(|&p| space.mass(p)).sum();
        c_a_needed = c_a_needed.max(b.ball.radius.powf(s) / mu);
    }
    let terms = selected
        .windows(2)
        .map(|w| space.dist(w[0], w[1]) * (g[w[0]] + g[w[1]]))
        .collect();
    let last = *selected.last().expect("chain is nonempty");
    let root_members = space.ball_members(&chain.root)?;
    Ok(Partial {
        point,
        tail: pair_bridge(space, u, g, last, point),
        root_energy: space.ls_energy(g, &root_members, s)?,
        chain,
        selected,
        ball_energies,
        terms,
        c_a_needed,
    })
}

#[allow(clippy::too_many_arguments)]
fn push_chain_checks(
    checks: &mut Vec<CertificateCheck>,
    space: &MetricMeasureSpace,
    u: &[f64],
    g: &[f64],
    s: f64,
    c_a: f64,
    c_cert: f64,
    label: &str,
    est: &ChainEstimate,
) {
    let c0 = est.chain.constants.c0;
    let k = c_a.powf(1.0 / s);
    let mut check = |name: &str, index: Option<usize>, lhs: f64, rhs: f64| {
        checks.push(CertificateCheck {
            name: format!("{label}:{name}"),
            index,
            lhs,
            rhs,
        })
    };
    for (i, b) in est.chain.balls.iter().enumerate() {
        let mu: f64 = b.members.iter().map(|&p| space.mass(p)).sum();
        let mean = (est.ball_energies[i].powf(s) / mu).powf(1.0 / s);
        check("selection", Some(b.index), g[est.selected[i]], mean);
        check("regularity", Some(b.index), b.ball.radius.powf(s), c_a * mu);
    }
    for (i, term) in est.terms.iter().enumerate() {
        let bound = 2.0 * k * (est.ball_energies[i] / c0 + est.ball_energies[i + 1] / (c0 * c0));
        check("telescoping-term", Some(i + 1), *term, bound);
    }
    let energy_sum: f64 = est.ball_energies.iter().sum();
    check(
        "telescoping-sum",
        None,
        est.telescoping_sum,
        c_cert * energy_sum,
    );
    check("reverse-minkowski", None, energy_sum, est.root_energy);
    check("tail-bridge", None, est.tail.difference, est.tail.bound);
    let z1 = est.selected[0];
    let lhs = (u[z1] - u[est.point]).abs();
    check("endpoint", None, lhs, est.telescoping_sum + est.tail.bound);
    check("endpoint-bound", None, lhs, est.endpoint_bound);
}

fn finish(p: Partial, c_cert: f64) -> ChainEstimate {
    let telescoping_sum = p.terms.iter().sum();
    ChainEstimate {
        endpoint_bound: c_cert * p.root_energy + p.tail.bound,
        point: p.point,
        chain: p.chain,
        selected: p.selected,
        ball_energies: p.ball_energies,
        terms: p.terms,
        telescoping_sum,
        tail: p.tail,
        root_energy: p.root_energy,
    }
}

/// Replays the chain argument for the ball `B(x, r)` and a second point `y`
/// in it (by default the member of `B(x, r)` farthest from `x`).
///
/// Every inequality of the argument is evaluated on the data and recorded in
/// `checks`; if one fails beyond `tol`, the error names it and its index.
/// The reverse Minkowski step needs `s ≤ 1`.
#[allow(clippy::too_many_arguments)]
pub fn chain_certificate(
    space: &MetricMeasureSpace,
    u: &ScalarField,
    g: &GradientField,
    x: PointId,
    r: f64,
    y: Option<PointId>,
    s: f64,
    constants: ChainConstants,
    tol: f64,
) -> Result<ChainCertificate> {
    check_exponent(s)?;
    if s > 1.0 {
        return Err(Error::domain(format!(
            "the chain certificate needs s ≤ 1, got {s}"
        )));
    }
    space.check_id(x)?;
    require_admissible(space, u, g, tol)?;
    let root = Ball::new(x, r)?;
    let root_members = space.ball_members(&root)?;
    let y = match y {
        Some(y) => {
            space.check_id(y)?;
            if space.dist(x, y) >= r {
                return Err(Error::domain(format!(
                    "second point {y} lies outside B({x}, {r})"
                )));
            }
            y
        }
        None => root_members.iter().copied().fold(x, |best, p| {
            if space.dist(x, p) > space.dist(x, best) {
                p
            } else {
                best
            }
        }),
    };
    let (uv, gv) = (u.values(), g.values());
    let px = partial_estimate(space, uv, gv, x, r, s, constants)?;
    let py = partial_estimate(space, uv, gv, y, r, s, constants)?;

    let c_a_eff = constants.c_a.max(px.c_a_needed).max(py.c_a_needed);
    let k = c_a_eff.powf(1.0 / s);
    let c0 = constants.c0;
    let c_cert = 2.0 * k * (1.0 / c0 + 1.0 / (c0 * c0));
    let xe = finish(px, c_cert);
    let ye = finish(py, c_cert);

    let double = space.ball_members(&root.doubled())?;
    let double_energy = space.ls_energy(gv, &double, s)?;
    let bridge = pair_bridge(space, uv, gv, xe.selected[0], ye.selected[0]);
    let bridge_bound = 8.0 * k / c0 * double_energy;
    let difference = (uv[x] - uv[y]).abs();
    let total_bound = xe.endpoint_bound + bridge_bound + ye.endpoint_bound;

    let mut checks = Vec::new();
    push_chain_checks(&mut checks, space, uv, gv, s, c_a_eff, c_cert, "x", &xe);
    push_chain_checks(&mut checks, space, uv, gv, s, c_a_eff, c_cert, "y", &ye);
    let mut push = |name: &str, lhs: f64, rhs: f64| {
        checks.push(CertificateCheck {
            name: name.to_string(),
            index: None,
            lhs,
            rhs,
        })
    };
    push("bridge", bridge.difference, bridge.bound);
    push("bridge-bound", bridge.bound, bridge_bound);
    push("total", difference, total_bound);

    if let Some(bad) = checks.iter().find(|c| !c.holds(tol)) {
        let at = bad
            .index
            .map(|i| format!(" at index {i}"))
            .unwrap_or_default();
        return Err(Error::invariant(format!(
            "certificate inequality {}{at} fails: {} > {} (root {x}, r = {r})",
            bad.name, bad.lhs, bad.rhs
        )));
    }
    Ok(ChainCertificate {
        s,
        root,
        c_a_eff,
        c_cert,
        x: xe,
        y: ye,
        bridge,
        bridge_bound,
        difference,
        total_bound,
        checks,
    })
}

/// How the spike point of the log-log field is chosen at each level.
#[derive(Clone, Debug, PartialEq)]
pub enum SpikePoint {
    /// The point generated by the all-zero word (the base point).
    First,
    /// The point nearest to the given coordinates, ties to the smallest id.
    Nearest(Vec<f64>),
}

impl SpikePoint {
    fn locate(&self, space: &MetricMeasureSpace) -> Result<PointId> {
        match self {
            SpikePoint::First => Ok(0),
            SpikePoint::Nearest(target) => {
                if target.len() != space.ambient_dim() {
                    return Err(Error::domain(format!(
                        "target has {} coordinates, space has {}",
                        target.len(),
                        space.ambient_dim()
                    )));
                }
                let d2 = |p: PointId| -> f64 {
                    space
                        .coords(p)
                        .iter()
                        .zip(target)
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum()
                };
                Ok(space
                    .ids()
                    .fold(0, |best, p| if d2(p) < d2(best) { p } else { best }))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeRow {
    pub level: usize,
    pub points: usize,
    pub resolution_h: f64,
    pub x0: PointId,
    pub grad_norm: f64,
    pub field_norm: f64,
    pub osc_at_rho: f64,
}

/// Log-log spike fields across levels: `u_n = loglog_field(x0, h_n)`,
/// `g_n = halfmax_gradient(u_n)`, norms in `L^s` with `s` the space dimension.
/// Works for any builtin; no dimension restriction.
pub fn loglog_trend(
    which: Builtin,
    levels: &[usize],
    x0: &SpikePoint,
    rho: f64,
) -> Result<Vec<ProbeRow>> {
    if !(rho > 0.0 && rho.is_finite()) {
        return Err(Error::domain(format!("rho must be positive, got {rho}")));
    }
    levels
        .iter()
        .map(|&level| {
            let space = builtin(which, level)?.space;
            let s = space.s();
            let p = x0.locate(&space)?;
            let u = loglog_field(&space, p, space.resolution_h())?;
            let g = halfmax_gradient(&space, &u)?;
            let abs_u: Vec<f64> = u.values().iter().map(|v| v.abs()).collect();
            Ok(ProbeRow {
                level,
                points: space.len(),
                resolution_h: space.resolution_h(),
                x0: p,
                grad_norm: g.norm(&space, s)?,
                field_norm: space.ls_norm(&abs_u, s)?,
                osc_at_rho: oscillation(&space, &u, &Ball::new(p, rho)?)?,
            })
        })
        .collect()
}

/// [`loglog_trend`] restricted to spaces of dimension `s > 1`, where the
/// oscillation estimate is not available. Reports numbers only.
pub fn conjecture_probe(
    which: Builtin,
    levels: &[usize],
    x0: &SpikePoint,
    rho: f64,
) -> Result<Vec<ProbeRow>> {
    let s = builtin(which, 0)?.space.s();
    if s <= 1.0 {
        return Err(Error::domain(format!(
            "conjecture probe needs dimension s > 1; {which} has s = {s}"
        )));
    }
    loglog_trend(which, levels, x0, rho)
}
