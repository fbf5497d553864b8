//! Replay the chain argument for one ball and print every checked step.
//!
//! cargo run --example chain_certificate

use hajlasz::chain::{chain_constants, DEFAULT_SAFETY};
use hajlasz::fractal::{builtin, Builtin};
use hajlasz::gradient::{halfmax_gradient, ScalarField};
use hajlasz::oscillation::chain_certificate;
use hajlasz::space::DEFAULT_TOL;

fn main() -> hajlasz::Result<()> {
    let space = builtin(Builtin::Cantor3, 10)?.space;
    let s = space.s();
    let u = ScalarField::from_fn(&space, |p| (5.0 * space.coords(p)[0]).sin())?;
    let g = halfmax_gradient(&space, &u)?;
    let c_a = space.ahlfors_profile_default(s)?.c_a;
    let k = chain_constants(c_a, s, DEFAULT_SAFETY)?;

    let cert = chain_certificate(&space, &u, &g, 40, 0.3, None, s, k, DEFAULT_TOL)?;
    println!(
        "x = {}, y = {}, |u(x) − u(y)| = {:.4e} ≤ {:.4e}",
        cert.x.point, cert.y.point, cert.difference, cert.total_bound
    );
    println!(
        "C_A used = {:.4}, C_cert = {:.4e}",
        cert.c_a_eff, cert.c_cert
    );
    println!(
        "chain from x: {} balls, telescoping sum {:.3e}, tail bridge {:.3e}",
        cert.x.chain.len(),
        cert.x.telescoping_sum,
        cert.x.tail.bound
    );
    for c in &cert.checks {
        let at = c.index.map(|i| format!("[{i}]")).unwrap_or_default();
        println!(
            "  {:<24} {:.4e} ≤ {:.4e}",
            format!("{}{at}", c.name),
            c.lhs,
            c.rhs
        );
    }
    Ok(())
}
