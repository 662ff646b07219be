#![allow(clippy::neg_cmp_op_on_partial_ord)] // NaN must fail these checks

pub mod cli;
pub mod competitors;
pub mod covariance;
pub mod error;
pub mod gof;
pub mod hotelling;
pub mod linstat;
pub mod procedure;
pub mod projections;
pub mod randsrc;
pub mod report;
pub mod simharness;
pub mod specfun;

pub use error::{Error, Result};
