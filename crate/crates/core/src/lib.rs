//! Learnable set aggregation with a small reverse-mode training stack.

pub mod baselines;
pub mod datasets;
pub mod error;
pub mod harness;
pub mod laf;
pub mod ndcore;
pub mod seed;

mod io_util;

pub use error::{Error, Result};
