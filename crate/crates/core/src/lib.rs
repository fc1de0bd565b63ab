//! Depth-weighted jackknife empirical likelihood for parameters defined by
//! U-statistic estimating equations.
//!
//! The pipeline is: an [`estimating::EstimatingEquation`] and a
//! [`estimating::Sample`] give jackknife pseudo-values ([`ustat`]); spatial depth
//! gives observation weights ([`depth`]); the weighted likelihood ratio is
//! solved in [`wjel`] and inverted into confidence intervals in [`inference`].
//! [`simlab`] runs Monte Carlo coverage experiments and [`cli`] wraps it all
//! in a command-line tool.

pub mod cli;
pub mod depth;
pub mod error;
pub mod estimating;
pub mod hull;
pub mod inference;
pub mod optim;
pub mod simlab;
pub mod special;
pub mod ustat;
pub mod wjel;

pub use depth::{depth_weights, spatial_depth, uniform_weights, WeightVector};
pub use error::{Error, Result};
pub use estimating::{
    EstimatingEquation, GiniCorrelation, GiniCorrelationComponent, GiniIndex, GiniTarget, Sample,
};
pub use inference::{confidence_interval, invert_ci, vj_interval, ConfidenceInterval, Method};
pub use ustat::{jackknife_pseudo_values, u_statistic, Jackknife, PseudoValueSet};
pub use wjel::{solve_lambda, wjel_ratio, SolverConfig, WjelEvaluation};
