//! Empirical Ahlfors regularity constants across levels, and what happens
//! when the space is profiled at the wrong dimension.
//!
//! cargo run --example ahlfors_profile

use hajlasz::fractal::{builtin, Builtin};

fn main() -> hajlasz::Result<()> {
    println!("level   C_A(cantor3)   C_A(snowflake 1/2, s=2)");
    for level in 5..=9 {
        let cantor = builtin(Builtin::Cantor3, level)?.space;
        let snow = builtin(Builtin::SnowflakeInterval(0.5), level)?.space;
        let a = cantor.ahlfors_profile_default(cantor.s())?;
        let b = snow.ahlfors_profile_default(snow.s())?;
        println!("{level:5}   {:12.4}   {:12.4}", a.c_a, b.c_a);
    }

    let interval = builtin(Builtin::Interval, 10)?.space;
    for s in [1.0, 0.5] {
        let p = interval.ahlfors_profile_default(s)?;
        println!(
            "interval level 10 profiled at s = {s}: C_A = {:.3} (lower {:.3}, upper {:.3})",
            p.c_a, p.c_a_lower, p.c_a_upper
        );
    }
    Ok(())
}
