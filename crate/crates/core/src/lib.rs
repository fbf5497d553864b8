// Range checks are written as `!(lo < x && x < hi)` so that NaN fails them.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod cli;
pub mod error;
pub mod fractal;
pub mod gradient;
pub mod io;
pub mod lp;
pub mod oscillation;
pub mod space;
pub mod vertex;

pub use error::{Error, Result};
