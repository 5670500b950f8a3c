// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod dynamics;
pub mod error;
pub mod threshold;
pub mod run;
pub mod units;
pub mod wigner;

pub use error::{Error, Result};
