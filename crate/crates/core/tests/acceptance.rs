//! Acceptance suite. Runs without the libtest harness so that every
//! criterion prints exactly one PASS/FAIL line; the process fails if any
//! criterion does.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use hajlasz::chain::{build_chain, chain_constants, verify_chain, DEFAULT_SAFETY};
use hajlasz::fractal::{builtin, Builtin};
use hajlasz::gradient::{minimal_gradient, GradientField, GradientMode, ScalarField};
use hajlasz::oscillation::{
    best_constant_scan, chain_certificate, conjecture_probe, verify_star, ScanConfig, SpikePoint,
};
use hajlasz::space::{Ball, MetricMeasureSpace, DEFAULT_TOL};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn log_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    let r = lo * (hi / lo).powf(rng.gen::<f64>());
    r.min(f64::from_bits(hi.to_bits() - 1))
}

fn c1_chain_suite() -> Outcome {
    let mut summary = Vec::new();
    for which in [Builtin::Cantor3, Builtin::Interval] {
        for level in 6..=10 {
            let start = Instant::now();
            let space = builtin(which, level).map_err(|e| e.to_string())?.space;
            let c_a = space
                .ahlfors_profile_default(space.s())
                .map_err(|e| e.to_string())?
                .c_a;
            let k = chain_constants(c_a, space.s(), DEFAULT_SAFETY).map_err(|e| e.to_string())?;
            let mut rng = ChaCha8Rng::seed_from_u64(1000 + level as u64);
            let (lo, hi) = (8.0 * space.resolution_h(), space.diam() / 2.0);
            let (mut ok, mut nonempty) = (0, 0);
            for _ in 0..100 {
                let root = Ball {
                    center: rng.gen_range(0..space.len()),
                    radius: log_uniform(&mut rng, lo, hi),
                };
                let Ok(chain) = build_chain(&space, root, k) else {
                    continue;
                };
                let checks = verify_chain(&space, &chain)
                    .map_err(|e| format!("{which} level {level}: {e}"))?;
                ensure!(
                    checks.disjoint && checks.annulus_containment,
                    "{which} level {level}: set checks failed"
                );
                ok += 1;
                nonempty += usize::from(!chain.is_empty());
            }
            let elapsed = start.elapsed();
            ensure!(
                ok >= 95,
                "{which} level {level}: only {ok}/100 chains built"
            );
            ensure!(
                elapsed < Duration::from_secs(10),
                "{which} level {level} took {elapsed:?}"
            );
            summary.push(format!("{which}/{level}: {ok} ok ({nonempty} nonempty)"));
        }
    }
    Ok(summary.join(", "))
}

fn c2_constants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (mut ok, mut underflow) = (0, 0);
    for _ in 0..1000 {
        let c_a = rng.gen_range(1.0..=100.0);
        let s = 1.0 - rng.gen::<f64>(); // (0, 1]
                                        // Independent prediction of representability of C0 in log space.
        let ln_c1 = (DEFAULT_SAFETY.ln() - 2.0 / s * f64::ln(c_a) - std::f64::consts::LN_2)
            .min(((5f64.sqrt() - 1.0) / 2.0).ln());
        let representable = 2.0 * ln_c1 >= f64::MIN_POSITIVE.ln() + 1.0;
        match chain_constants(c_a, s, DEFAULT_SAFETY) {
            Ok(k) => {
                ensure!(k.c - k.c1 >= k.c1, "c − C1 < C1 at C_A={c_a}, s={s}");
                ensure!(
                    k.c1 * (1.0 + k.c1) <= 1.0,
                    "C1(1+C1) > 1 at C_A={c_a}, s={s}"
                );
                ensure!(k.c0 == k.c1 * k.c1, "C0 ≠ C1² at C_A={c_a}, s={s}");
                ok += 1;
            }
            Err(e) => {
                ensure!(
                    !representable,
                    "C_A={c_a}, s={s} rejected although representable: {e}"
                );
                underflow += 1;
            }
        }
    }
    Ok(format!(
        "{ok} samples satisfy both inequalities; {underflow} rejected as below f64 range"
    ))
}

fn tiny_spaces() -> Vec<(String, MetricMeasureSpace)> {
    let mut out = Vec::new();
    for (which, levels) in [
        (Builtin::Interval, vec![1, 2]),
        (Builtin::Cantor3, vec![1, 2]),
        (Builtin::CantorDust, vec![1]),
        (Builtin::SnowflakeInterval(0.5), vec![2]),
    ] {
        for level in levels {
            out.push((
                format!("{which}/{level}"),
                builtin(which, level).unwrap().space,
            ));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for n in [3usize, 5, 6] {
        let coords = (0..n)
            .map(|_| vec![rng.gen::<f64>(), rng.gen::<f64>()])
            .collect();
        let mass: Vec<f64> = (0..n).map(|_| rng.gen_range(0.1..1.0)).collect();
        out.push((
            format!("cloud/{n}"),
            MetricMeasureSpace::new(coords, mass, 1.0, 0.01, 1.0).unwrap(),
        ));
    }
    out
}

fn c3_oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let spaces = tiny_spaces();
    let mut worst: f64 = 0.0;
    for (name, space) in &spaces {
        for trial in 0..200 {
            let u = ScalarField::new(
                space,
                (0..space.len()).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            )
            .map_err(|e| e.to_string())?;
            let lp = minimal_gradient(space, &u, 1.0, GradientMode::ExactLp)
                .map_err(|e| e.to_string())?;
            let local = minimal_gradient(space, &u, 1.0, GradientMode::LocalSearch)
                .map_err(|e| e.to_string())?;
            for s in [0.5, 0.63, 1.0] {
                let oracle = minimal_gradient(space, &u, s, GradientMode::Oracle)
                    .map_err(|e| e.to_string())?;
                if s == 1.0 {
                    let gap = (lp.norm - oracle.norm).abs();
                    worst = worst.max(gap);
                    ensure!(
                        gap <= 1e-9,
                        "{name} trial {trial}: exact-lp {} vs oracle {}",
                        lp.norm,
                        oracle.norm
                    );
                }
                let local_norm = local.gradient.norm(space, s).map_err(|e| e.to_string())?;
                ensure!(
                    local.gradient.admissible,
                    "{name} trial {trial}: local search inadmissible"
                );
                ensure!(
                    local_norm >= oracle.norm - 1e-9,
                    "{name} trial {trial}, s={s}: local search {local_norm} below oracle {}",
                    oracle.norm
                );
            }
        }
    }
    Ok(format!(
        "{} spaces × 200 fields, max |lp − oracle| = {worst:.1e}",
        spaces.len()
    ))
}

fn even_grid(n: usize) -> MetricMeasureSpace {
    let h = 1.0 / n as f64;
    let coords = (0..n).map(|k| vec![k as f64 * h]).collect();
    MetricMeasureSpace::new(coords, vec![h; n], 1.0, h, 1.0).unwrap()
}

fn c4_interval_closed_form() -> Outcome {
    for n in [2usize, 4, 6, 8, 16, 64, 256] {
        let space = even_grid(n);
        let u = ScalarField::coordinate(&space, 0).unwrap();
        let lp =
            minimal_gradient(&space, &u, 1.0, GradientMode::ExactLp).map_err(|e| e.to_string())?;
        ensure!(
            (lp.norm - 0.5).abs() <= 1e-9,
            "n={n}: exact-lp norm {}",
            lp.norm
        );
        if n <= 8 {
            let oracle = minimal_gradient(&space, &u, 1.0, GradientMode::Oracle)
                .map_err(|e| e.to_string())?;
            ensure!(
                (oracle.norm - 0.5).abs() <= 1e-9,
                "n={n}: oracle norm {}",
                oracle.norm
            );
        }
    }
    let mut worst: f64 = 0.0;
    for level in 4..=10 {
        let space = builtin(Builtin::Interval, level).unwrap().space;
        let u = ScalarField::coordinate(&space, 0).unwrap();
        let g = GradientField::check(&space, &u, vec![0.5; space.len()], 0.0).unwrap();
        let ball = Ball::new(space.len() / 2, 0.25).unwrap();
        let rep = verify_star(&space, &u, &g, &ball, 1.0).map_err(|e| e.to_string())?;
        let tol = 2f64.powi(-(level as i32) + 2);
        ensure!(
            (rep.ratio - 1.0).abs() <= tol,
            "level {level}: ratio {} outside 1 ± {tol}",
            rep.ratio
        );
        worst = worst.max((rep.ratio - 1.0).abs() / tol);
    }
    Ok(format!(
        "norm 1/2 for n ∈ {{2,4,6,8,16,64,256}}; central ratio error ≤ {worst:.2} × 2^(2−level)"
    ))
}

fn c5_theorem_echo() -> Outcome {
    let start = Instant::now();
    let mut values = Vec::new();
    for level in 6..=9 {
        let space = builtin(Builtin::Cantor3, level).unwrap().space;
        let u = ScalarField::distance_to(&space, 0).unwrap();
        let g = GradientField::check(&space, &u, vec![0.5; space.len()], 0.0).unwrap();
        let cfg = ScanConfig {
            centers: 64,
            radii: 16,
            seed: 7,
        };
        let rep = best_constant_scan(&space, &u, &g, space.s(), cfg).map_err(|e| e.to_string())?;
        ensure!(
            rep.c_emp.is_finite() && rep.c_emp > 0.0,
            "level {level}: C_emp = {}",
            rep.c_emp
        );
        ensure!(
            rep.balls.iter().all(|b| b.ratio.is_finite()),
            "level {level}: infinite ratio"
        );
        values.push(rep.c_emp);
    }
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &v| (a.min(v), b.max(v)));
    let elapsed = start.elapsed();
    ensure!(hi / lo < 2.0, "C_emp spread {hi}/{lo} ≥ 2");
    ensure!(elapsed < Duration::from_secs(60), "scan took {elapsed:?}");
    let shown: Vec<String> = values.iter().map(|v| format!("{v:.4}")).collect();
    Ok(format!(
        "C_emp levels 6–9 = [{}], max/min = {:.4}",
        shown.join(", "),
        hi / lo
    ))
}

fn c6_certificates() -> Outcome {
    let space = builtin(Builtin::Cantor3, 10).unwrap().space;
    let s = space.s();
    let u = ScalarField::distance_to(&space, 0).unwrap();
    let g = GradientField::check(&space, &u, vec![0.5; space.len()], 0.0).unwrap();
    let c_a = space
        .ahlfors_profile_default(s)
        .map_err(|e| e.to_string())?
        .c_a;
    let k = chain_constants(c_a, s, DEFAULT_SAFETY).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    // Roots whose chains reach at least one ball at this resolution.
    let (lo, hi) = (2.0 * space.resolution_h() / k.c0, space.diam() / 2.0);
    let mut checks = 0;
    let mut longest = 0;
    for i in 0..50 {
        let x = rng.gen_range(0..space.len());
        let r = log_uniform(&mut rng, lo, hi);
        let cert = chain_certificate(&space, &u, &g, x, r, None, s, k, DEFAULT_TOL)
            .map_err(|e| format!("root {i} (x={x}, r={r}): {e}"))?;
        ensure!(
            cert.checks.iter().all(|c| c.holds(DEFAULT_TOL)),
            "root {i}: unchecked failure"
        );
        for name in [
            "x:selection",
            "x:telescoping-sum",
            "x:reverse-minkowski",
            "bridge-bound",
        ] {
            ensure!(
                cert.checks.iter().any(|c| c.name == name),
                "root {i}: missing check {name}"
            );
        }
        checks += cert.checks.len();
        longest = longest.max(cert.x.chain.len().max(cert.y.chain.len()));
    }
    Ok(format!(
        "50 roots, {checks} inequalities hold, longest chain {longest}"
    ))
}

fn c7_reverse_minkowski() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut strict = 0;
    let mut equal = 0;
    for trial in 0..1000 {
        let n = rng.gen_range(2..40);
        let coords = (0..n).map(|k| vec![k as f64]).collect();
        let mass: Vec<f64> = (0..n).map(|_| rng.gen_range(0.01..1.0)).collect();
        let space = MetricMeasureSpace::new(coords, mass, 1.0, 1.0, 1.0).unwrap();
        let f: Vec<f64> = (0..n)
            .map(|_| {
                if rng.gen_bool(0.3) {
                    0.0
                } else {
                    rng.gen_range(0.0..2.0)
                }
            })
            .collect();
        let k = rng.gen_range(1..6);
        let keep_one = rng.gen_bool(0.3).then(|| rng.gen_range(0..k));
        let mut regions = vec![Vec::new(); k];
        let mut union = Vec::new();
        let mut f = f;
        for (p, fp) in f.iter_mut().enumerate() {
            let slot = rng.gen_range(0..=k);
            if slot < k {
                if keep_one.is_some_and(|j| j != slot) {
                    *fp = 0.0;
                }
                regions[slot].push(p);
                union.push(p);
            }
        }
        union.sort_unstable();
        for s in [0.3, 0.63, 1.0] {
            let parts: Vec<f64> = regions
                .iter()
                .map(|r| space.ls_energy(&f, r, s).unwrap())
                .collect();
            let sum: f64 = parts.iter().sum();
            let whole = space.ls_energy(&f, &union, s).unwrap();
            let tol = 1e-12 * whole.max(1.0);
            let positive = parts.iter().filter(|&&e| e > 0.0).count();
            ensure!(sum <= whole + tol, "trial {trial}, s={s}: {sum} > {whole}");
            let is_equal = (whole - sum).abs() <= tol;
            if s < 1.0 {
                ensure!(
                    is_equal == (positive <= 1),
                    "trial {trial}, s={s}: equality {is_equal} with {positive} positive regions"
                );
            } else {
                // At s = 1 the energy is additive over disjoint regions.
                ensure!(
                    is_equal,
                    "trial {trial}: additivity fails at s = 1 ({sum} vs {whole})"
                );
            }
            if positive >= 2 && s < 1.0 {
                strict += 1;
            } else {
                equal += 1;
            }
        }
    }
    Ok(format!(
        "{strict} strict cases (s<1, ≥2 positive regions), {equal} equality cases; s=1 is additive, so equality holds for every split there"
    ))
}

fn c8_probe() -> Outcome {
    let rows = conjecture_probe(Builtin::CantorDust, &[3, 4, 5, 6], &SpikePoint::First, 0.05)
        .map_err(|e| e.to_string())?;
    ensure!(rows.len() == 4, "expected 4 rows");
    for w in rows.windows(2) {
        ensure!(
            w[1].osc_at_rho >= w[0].osc_at_rho,
            "osc_at_rho decreases from level {} to {}",
            w[0].level,
            w[1].level
        );
    }
    ensure!(
        conjecture_probe(Builtin::Cantor3, &[3], &SpikePoint::First, 0.05).is_err(),
        "cantor3 was not rejected"
    );
    let shown: Vec<String> = rows
        .iter()
        .map(|r| format!("{:.4}", r.osc_at_rho))
        .collect();
    Ok(format!("osc_at_rho = [{}]", shown.join(", ")))
}

fn cli(dir: &Path, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_hajlasz"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if !out.status.success() {
        return Err(format!(
            "{args:?} failed: {}",
            String::from_utf8_lossy(&out.stderr)
        ));
    }
    Ok(out.stdout)
}

fn c9_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let d = dir.path();
    cli(
        d,
        &[
            "build-space",
            "--system",
            "cantor3",
            "--level",
            "5",
            "--out",
            "space.json",
        ],
    )?;
    let space: serde_json::Value =
        serde_json::from_slice(&std::fs::read(d.join("space.json")).unwrap())
            .map_err(|e| e.to_string())?;
    let xs: Vec<f64> = space["points"]
        .as_array()
        .unwrap()
        .iter()
        .map(|p| p["coords"][0].as_f64().unwrap())
        .collect();
    let u = serde_json::json!({ "field": xs.iter().map(|x| (7.0 * x).sin()).collect::<Vec<_>>() });
    std::fs::write(d.join("u.json"), u.to_string()).unwrap();
    cli(
        d,
        &[
            "gradient",
            "--space",
            "space.json",
            "--field",
            "u.json",
            "--mode",
            "local-search",
            "--out",
            "g.json",
        ],
    )?;

    let commands: Vec<Vec<&str>> = vec![
        vec!["build-space", "--system", "cantor-dust", "--level", "3"],
        vec!["check-ahlfors", "--space", "space.json"],
        vec![
            "chain",
            "--space",
            "space.json",
            "--center",
            "3",
            "--radius",
            "0.6",
        ],
        vec!["gradient", "--space", "space.json", "--field", "u.json"],
        vec![
            "verify-osc",
            "--space",
            "space.json",
            "--field",
            "u.json",
            "--grad",
            "g.json",
            "--seed",
            "7",
        ],
        vec!["probe-conjecture", "--levels", "3..5", "--rho", "0.05"],
    ];
    for args in &commands {
        let first = cli(d, args)?;
        let second = cli(d, args)?;
        let mut single = args.clone();
        single.extend(["--threads", "1"]);
        let third = cli(d, &single)?;
        ensure!(!first.is_empty(), "{} produced no output", args[0]);
        ensure!(first == second, "{} output differs between runs", args[0]);
        ensure!(
            first == third,
            "{} output depends on the thread count",
            args[0]
        );
    }
    Ok(format!(
        "{} subcommands byte-identical across reruns and thread counts",
        commands.len()
    ))
}

fn main() {
    let criteria: [Criterion; 9] = [
        (
            "ball chains on cantor3 and interval, levels 6-10",
            c1_chain_suite,
        ),
        ("chain constants algebra", c2_constants),
        ("gradient oracle equivalence", c3_oracle_equivalence),
        ("interval closed form", c4_interval_closed_form),
        ("oscillation constant stability on cantor3", c5_theorem_echo),
        ("chain certificates on cantor3 level 10", c6_certificates),
        ("reverse Minkowski", c7_reverse_minkowski),
        ("log-log probe on cantor dust", c8_probe),
        ("CLI determinism", c9_determinism),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {}: {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {}: {name} ({secs:.1}s): {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
