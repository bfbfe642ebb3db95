//! Interventional text benchmarks generated from structural causal models,
//! plus the machinery to score concept-based explanation methods against the
//! reference causal effects those models make available.

pub mod adapters;
pub mod dgp;
pub mod eval;
pub mod explain;
pub mod digest;
mod error;
pub mod http;
pub mod pipeline;
pub mod render;
pub mod rng;
pub mod scm;

pub use error::{Error, ErrorClass, Result};
