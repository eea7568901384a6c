// NaN-rejecting range checks are written as negated comparisons on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analytic;
pub mod error;
pub mod limits;
pub mod measure;
pub mod ocp;
pub mod model;
pub mod ode;
pub mod rng;
pub mod runner;
pub mod speckit;
pub mod spp;
pub mod stats;

pub use error::{Error, Result};
pub use measure::GridMeasure;
