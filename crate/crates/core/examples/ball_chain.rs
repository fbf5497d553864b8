//! Build the disjoint shrinking-ball chain around a point of the Cantor set.
//!
//! cargo run --example ball_chain

use hajlasz::chain::{build_chain, chain_constants, DEFAULT_SAFETY};
use hajlasz::fractal::{builtin, Builtin};
use hajlasz::space::Ball;

fn main() -> hajlasz::Result<()> {
    let space = builtin(Builtin::Cantor3, 12)?.space;
    let c_a = space.ahlfors_profile_default(space.s())?.c_a;
    let k = chain_constants(c_a, space.s(), DEFAULT_SAFETY)?;
    println!(
        "C_A = {c_a:.4}: c = {:.4}, C1 = {:.4}, C0 = {:.3e}",
        k.c, k.c1, k.c0
    );

    let chain = build_chain(&space, Ball::new(0, 0.9)?, k)?;
    println!(
        "chain around point 0 with r = 0.9 has {} balls:",
        chain.len()
    );
    for b in &chain.balls {
        println!(
            "  B_{}: center {} at distance {:.3e}, radius {:.3e}, {} points",
            b.index,
            b.ball.center,
            b.witness_distance,
            b.ball.radius,
            b.members.len()
        );
    }
    println!("checks: {:?}", chain.checks);
    Ok(())
}
