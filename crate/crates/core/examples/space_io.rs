//! Save a snowflaked space to canonical JSON and load it back.
//!
//! cargo run --example space_io

use hajlasz::fractal::{builtin, Builtin};
use hajlasz::io::{read_json, write_canonical_json};
use hajlasz::space::{Ball, MetricMeasureSpace, SpaceDocument};

fn main() -> hajlasz::Result<()> {
    let space = builtin(Builtin::SnowflakeInterval(0.5), 5)?.space;
    let path = std::env::temp_dir().join("hajlasz_snowflake.json");
    write_canonical_json(&path, &space.to_document())?;
    let back = MetricMeasureSpace::from_document(read_json::<SpaceDocument>(&path)?)?;
    println!("wrote {} ({} points)", path.display(), back.len());
    println!(
        "s = {}, eps = {}, dist(0, 1) = {:.6} (Euclidean {:.6})",
        back.s(),
        back.snowflake_eps(),
        back.dist(0, 1),
        (back.coords(1)[0] - back.coords(0)[0]).abs()
    );
    let ball = Ball::new(16, 0.25)?;
    println!(
        "μ(B(16, 0.25)) = {} with {} members",
        back.ball_measure(&ball)?,
        back.ball_members(&ball)?.len()
    );
    Ok(())
}
