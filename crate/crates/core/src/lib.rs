//! Reliability of maximum spanning tree identification in correlation
//! networks under a Gaussian/Student mixture.
//!
//! Pipeline: [`sampling`] draws from the mixture, [`similarity`] estimates
//! Pearson, Fechner (sign) and Kendall networks, [`mst`] extracts the
//! maximum spanning tree, [`metrics`] scores it against the true tree and
//! [`experiment`] runs the Monte Carlo sweep over the mixture weight.

pub mod cli;
pub mod error;
pub mod experiment;
pub mod ingest;
pub mod metrics;
pub mod mst;
pub mod sampling;
pub mod similarity;

pub use error::{Error, Result};
