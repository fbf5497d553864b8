//! Log-log spike fields on the Cantor dust (s > 1) and on the interval
//! (s = 1), level by level.
//!
//! cargo run --example conjecture_probe

use hajlasz::fractal::Builtin;
use hajlasz::oscillation::{conjecture_probe, loglog_trend, SpikePoint};

fn main() -> hajlasz::Result<()> {
    println!("cantor dust, rho = 0.05");
    println!("level  points   ‖g‖_s      ‖u‖_s      osc");
    for r in conjecture_probe(Builtin::CantorDust, &[3, 4, 5, 6], &SpikePoint::First, 0.05)? {
        println!(
            "{:5} {:7} {:9.4} {:9.4} {:9.4}",
            r.level, r.points, r.grad_norm, r.field_norm, r.osc_at_rho
        );
    }

    println!("interval, spike at the midpoint");
    for r in loglog_trend(
        Builtin::Interval,
        &[6, 7, 8, 9, 10],
        &SpikePoint::Nearest(vec![0.5]),
        0.05,
    )? {
        println!(
            "{:5} {:7} {:9.4} {:9.4} {:9.4}",
            r.level, r.points, r.grad_norm, r.field_norm, r.osc_at_rho
        );
    }
    Ok(())
}
