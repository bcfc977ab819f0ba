//! Metrics, reference solutions, experiment plumbing and trace audits.

pub mod audit;
pub mod experiment;
pub mod metrics;
pub mod presets;
pub mod reference;

pub use audit::{audit_rows, AuditReport, Violation};
pub use experiment::{
    default_start, prepare_instance, run_experiment, run_suite, ExperimentConfig,
    ExperimentOutcome, LadmmScheduleSpec, LalmScheduleSpec, OutputSpec, RunSpec, RunStatus,
    RunSummary, ScalingSpec, SolverSpec, Suite,
};
pub use metrics::{
    bound_convert, feasibility_from_gap, kkt_residual, kkt_residual_two_block, log_log_slope,
    rate_fit, KktResidual, QuadraticGapBound,
};
pub use presets::{ladmm_preset, LadmmPreset};
pub use reference::{reference_solve, reference_solve_cached, ReferenceSolution};
