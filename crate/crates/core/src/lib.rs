//! Dual subgradient descent for online allocation with concave consumption
//! regularizers.
//!
//! Each period a request with linear reward `q` and cost matrix `b` arrives;
//! the algorithm takes the best response to the current dual prices, derives a
//! target consumption from the regularizer's conjugate, and moves the prices by
//! a projected weighted subgradient step. [`bounds`] computes offline dual
//! certificates and the regret bound; [`harness`] runs experiment sweeps.

pub mod bounds;
pub mod domain;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod norm;
#[cfg(any(test, feature = "oracle"))]
pub mod oracle;
pub mod regularizer;
pub mod solver;

pub use bounds::{
    bound_report, brute_force_opt, empirical_dual, minimize_dual, theoretical_bound,
    BoundConstants, BoundReport, ReportOptions,
};
pub use domain::{support_bounds, Action, Instance, Request, SupportBounds};
pub use error::{Error, Result};
pub use geometry::{descent_step, DescentContext};
pub use regularizer::{DualGeometry, Kind, Regularizer, RegularizerConfig, Variant};
pub use solver::{run, RunTrace, SolverConfig, StepRecord, WeightRule};
