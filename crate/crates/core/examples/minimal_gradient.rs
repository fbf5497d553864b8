//! Minimal Hajłasz gradients by linear programming, vertex enumeration and
//! local search.
//!
//! cargo run --example minimal_gradient

use hajlasz::fractal::{builtin, Builtin};
use hajlasz::gradient::{halfmax_gradient, minimal_gradient, GradientMode, ScalarField};

fn main() -> hajlasz::Result<()> {
    // u(p) = p on an even grid: the L^1-minimal gradient has norm exactly 1/2.
    let grid = builtin(Builtin::Interval, 3)?.space;
    let u = ScalarField::coordinate(&grid, 0)?;
    for mode in [
        GradientMode::ExactLp,
        GradientMode::Oracle,
        GradientMode::LocalSearch,
    ] {
        let m = minimal_gradient(&grid, &u, 1.0, mode)?;
        println!(
            "interval, u(p) = p, {:>12}: ‖g‖_1 = {:.12}",
            mode.to_string(),
            m.norm
        );
    }

    let cantor = builtin(Builtin::Cantor3, 7)?.space;
    let u = ScalarField::from_fn(&cantor, |p| (9.0 * cantor.coords(p)[0]).cos())?;
    let exact = minimal_gradient(&cantor, &u, 1.0, GradientMode::ExactLp)?;
    let local = minimal_gradient(&cantor, &u, 1.0, GradientMode::LocalSearch)?;
    let half = halfmax_gradient(&cantor, &u)?.norm(&cantor, 1.0)?;
    println!(
        "cantor3 level 7, u = cos(9x): exact {:.6} (residual {:.1e}), local search {:.6}, half-max {:.6}",
        exact.norm,
        exact.certificate_residual.unwrap_or(0.0),
        local.norm,
        half
    );
    Ok(())
}
