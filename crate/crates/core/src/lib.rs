//! Information spreading on heterogeneous networks.
//!
//! - [`ensemble`]: degree distributions, correlation kernels, spectral
//!   thresholds.
//! - [`graph`]: graph generators and edge-list I/O.
//! - [`meanfield`]: degree-class ODE solver, sweeps and analytic predictions.
//! - [`montecarlo`]: agent-based simulation on explicit graphs.
//! - [`timevarying`]: the time-varying rate law and its cross-checks.
//! - [`fit`]: Levenberg–Marquardt fitting of the rate law.
//! - [`series`]: K-SC clustering, AR baselines, prediction experiments.

pub mod ensemble;
pub mod error;
pub mod fit;
pub mod graph;
pub mod meanfield;
pub mod montecarlo;
pub mod numeric;
pub mod ode;
pub mod series;
pub mod timevarying;

pub use error::{Error, Result};
