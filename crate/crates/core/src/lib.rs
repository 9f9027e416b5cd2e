//! Large-batch neural multi-objective Bayesian optimization.
//!
//! The optimizer alternates between training a deep-ensemble surrogate on
//! all evaluated designs and acquiring a large batch of new candidates with
//! NSGA-II run over the surrogate's predicted objectives *and* their
//! epistemic uncertainties. See [`optimizer::run`] for the outer loop.

pub mod acquisition;
pub mod dataset;
pub mod error;
pub mod metrics;
pub mod moea;
pub mod optimizer;
pub mod problems;
pub mod seed;
pub mod space;
pub mod surrogate;

pub use error::{Error, Result};
