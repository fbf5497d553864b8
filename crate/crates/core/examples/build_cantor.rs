//! Discretize the ternary Cantor set and a custom two-map system.
//!
//! cargo run --example build_cantor

use hajlasz::fractal::{build, builtin, moran_dimension, Builtin, IfsSystem, SimilarityMap};

fn main() -> hajlasz::Result<()> {
    let disc = builtin(Builtin::Cantor3, 4)?;
    let space = &disc.space;
    println!(
        "cantor3 level 4: {} points, s = {:.10}, h = {:.3e}, total mass = {}",
        space.len(),
        space.s(),
        space.resolution_h(),
        space.total_mass()
    );
    for id in [0, 1, space.len() - 1] {
        println!(
            "  point {id:2} at {:.6}  word {:?}",
            space.coords(id)[0],
            disc.word_of_point(id)
        );
    }

    // Unequal ratios give non-uniform self-similar masses.
    let system = IfsSystem::new(vec![
        SimilarityMap::new(0.2, vec![0.0]),
        SimilarityMap::new(0.5, vec![0.5]),
    ])?;
    let s = moran_dimension(&system.ratios())?;
    let d = build(&system, 3)?;
    let (lo, hi) = d
        .space
        .masses()
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(a, b), &m| (a.min(m), b.max(m)));
    println!(
        "custom system: s = {s:.6}, {} points, masses in [{lo:.4}, {hi:.4}]",
        d.space.len()
    );
    Ok(())
}
