//! Covariance-insured screening and post-screening linear discriminant
//! analysis for ultrahigh-dimensional multiclass data.

// `!(x > 0.0)` is used on purpose so that NaN lands on the rejecting side.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod boundary;
pub mod cli;
pub mod classifier;
pub mod covgraph;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod linalg;
pub mod screening;
pub mod simgen;
pub mod tuning;

pub use error::{Error, Result};
