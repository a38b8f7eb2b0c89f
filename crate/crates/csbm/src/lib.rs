//! Simulation and inference laboratory for community detection on graphs
//! with node covariates.
//!
//! The crate samples two-community block-model instances paired with
//! high-dimensional covariates (and their Gaussian surrogates), runs
//! linearized and full message passing, simulates density evolution by
//! population dynamics, and computes the closed-form predictions the
//! algorithms are checked against.
//!
//! Modules map onto the pipeline stages:
//!
//! * [`model`] — parameters and instance samplers,
//! * [`linbp`] / [`fullbp`] — message-passing algorithms on sampled graphs,
//! * [`de`] — density evolution: population dynamics and the moment map,
//! * [`spectral`] — the penalized spectral estimator for the Gaussian model,
//! * [`theory`] — thresholds and asymptotic values,
//! * [`metrics`] — overlap statistics,
//! * [`sweep`] / [`report`] — phase-diagram experiment harness and figures.

// Parameter validation deliberately writes `!(x > 0.0)` so NaN fails too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod de;
pub mod eigen;
mod error;
pub mod fullbp;
pub mod graph;
pub(crate) mod linalg;
pub mod linbp;
pub mod metrics;
pub mod model;
mod optim;
pub mod report;
pub mod rng;
pub mod spectral;
pub mod sweep;
pub mod theory;

pub use error::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
