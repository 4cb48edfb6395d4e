//! Ranking of several stochastic response surfaces by sequential kriging
//! metamodels: classify each input by its best surface while spending
//! simulation budget where the ranking is uncertain.

// `!(x >= 0.0)` is the NaN-rejecting form used throughout validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod acquisition;
pub mod design;
pub mod error;
pub mod gp;
pub mod normal;
pub mod parallel;
pub mod problems;
pub mod ranking;

pub use error::{Error, Result};
