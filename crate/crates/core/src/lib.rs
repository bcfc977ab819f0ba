//! Accelerated linearized augmented Lagrangian and ADMM solvers for linearly
//! constrained composite convex programs, with baselines, seeded instance
//! generators and a harness that audits the rate certificates while running.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod format;
pub mod functions;
pub mod harness;
pub mod ladmm;
pub mod lalm;
pub mod linalg;
pub mod operators;
pub mod par;
pub mod problems;
pub mod record;
pub mod rng;
pub mod spectral;
mod subproblem;

pub use error::{Error, Result};
pub use functions::{ProxFn, SmoothFn};
pub use ladmm::{
    run_ladmm, AdaptiveLadmmConfig, LadmmOptions, LadmmSchedule, LadmmState, TwoBlockProblem,
};
pub use lalm::{run_lalm, CompositeProblem, LalmOptions, LalmSchedule, LalmState};
pub use operators::{DenseMatrix, LinearMap, ScalingOperator};
pub use record::{RunRecord, TraceRow};
pub use subproblem::SubproblemInfo;
