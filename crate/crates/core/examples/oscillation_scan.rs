//! Empirical constant of the oscillation estimate on the Cantor set, level
//! by level.
//!
//! cargo run --example oscillation_scan

use hajlasz::fractal::{builtin, Builtin};
use hajlasz::gradient::{GradientField, ScalarField};
use hajlasz::oscillation::{best_constant_scan, ScanConfig};

fn main() -> hajlasz::Result<()> {
    let config = ScanConfig {
        centers: 64,
        radii: 16,
        seed: 7,
    };
    for level in 6..=10 {
        let space = builtin(Builtin::Cantor3, level)?.space;
        let u = ScalarField::distance_to(&space, 0)?;
        // u is 1-Lipschitz, so g ≡ 1/2 is admissible.
        let g = GradientField::check(&space, &u, vec![0.5; space.len()], 0.0)?;
        let report = best_constant_scan(&space, &u, &g, space.s(), config)?;
        let worst = report
            .balls
            .iter()
            .filter(|b| b.ratio.is_finite())
            .max_by(|a, b| a.ratio.total_cmp(&b.ratio))
            .expect("scan is nonempty");
        println!(
            "level {level:2}: C_emp = {:.6} (2B), {:.6} (B only); worst ball center {} radius {:.3e}",
            report.c_emp, report.c_emp_inner, worst.ball.center, worst.ball.radius
        );
    }
    Ok(())
}
