//! Simulation and exact theory for an evolving random multigraph with
//! vertex insertion, preferential edge insertion and uniform edge deletion.
//!
//! - [`params`]: parameters, regime classification and derived constants.
//! - [`sim`]: the multigraph process and seeded parallel trials.
//! - [`special`]: the integral kernels `u1`, `u2`, `u_c`.
//! - [`recurrence`]: the limiting degree sequence and a mean-field oracle.
//! - [`analysis`]: aggregation, tail fits and theory comparisons.

pub mod analysis;
pub mod params;
pub mod quad;
pub mod recurrence;
pub mod sim;
pub mod special;

use thiserror::Error;

pub use analysis::{
    aggregate, check_concentration, compare, fit_tail, AnalysisError, ComparisonReport,
    ConcentrationReport, DegreeHistogram, MeanProfile, TailFit, TailModel, TrajectorySample,
};
pub use params::{DerivedConstants, ModelParams, ParamError, Probability, RegimeLabel};
pub use recurrence::{
    build_particular, build_sequence, evolve_mean_field, leading_constant, ParticularSolution,
    RecurrenceError, TheoreticalSequence,
};
pub use sim::{
    run_trial, run_trials, ColdStart, MultigraphState, RngStream, SimConfig, SimError,
    StepOutcome, TrialOutput, TrialPlan,
};
pub use special::{KernelSpec, SpecialError, UTable};

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Special(#[from] SpecialError),
    #[error(transparent)]
    Recurrence(#[from] RecurrenceError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
}
