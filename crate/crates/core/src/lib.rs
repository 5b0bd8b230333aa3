//! Stochastic-geometry analysis and Monte Carlo simulation of NOMA-assisted
//! wireless caching: content pushing, content delivery, push-and-deliver and
//! D2D cache search.

// `!(x > 0.0)` guards also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod content_model;
pub mod error;
pub mod estimate;
pub mod experiment_runner;
pub mod monte_carlo;
pub mod noma_engine;
pub mod numerics;
pub mod pad_analysis;
pub mod point_fields;
pub mod ptd_analysis;

pub use error::{Error, Result};
pub use estimate::{Flag, ProbEstimate, Source};
