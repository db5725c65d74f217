// `!(x > 0.0)` style checks are deliberate: they also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod abc;
pub mod cli;
pub mod diagnostics;
pub mod error;
pub mod linalg;
pub mod model;
pub mod observation;
pub mod pfilter;
pub mod pmcmc;
pub mod pool;
pub mod problem;
pub mod rng;
pub mod ssa;

pub use error::{Error, Result};
