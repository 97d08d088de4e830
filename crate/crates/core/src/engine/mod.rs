//! Multi-client Local SGD with exact communication accounting, and the
//! stagewise outer loop that chains Local SGD calls.

mod fleet;
mod local_sgd;
mod stagewise;
mod trace;

pub use fleet::{average_models, ClientFleet};
pub use local_sgd::{local_sgd, EvalCadence, LocalSgdConfig, LocalSgdOutput, ReturnMode};
pub use stagewise::{run_stagewise, sample_stage_index, StagewiseOptions, StagewiseOutput};
pub use trace::{RunTrace, TraceRecord, TRACE_HEADER};

use thiserror::Error;

use crate::objectives::ObjectiveError;

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("the fleet needs at least one client")]
    NoClients,
    #[error("fleet has {fleet} clients but the objective has {objective}")]
    ClientCountMismatch { fleet: usize, objective: usize },
    #[error("iteration count T must be at least 1")]
    NoIterations,
    #[error("communication period k must be at least 1")]
    ZeroPeriod,
    #[error("return index {index} outside 0..{iterations}")]
    BadReturnIndex { index: usize, iterations: usize },
    #[error("stage plan is empty")]
    EmptyPlan,
    #[error("proximal stage objective needs a weakly convex objective with 1/gamma > rho (gamma = {gamma}, rho = {rho:?})")]
    ProxMisconfigured { gamma: f64, rho: Option<f64> },
    #[error("iterates became non-finite at t = {t} (eta = {eta:.3e}, k = {k}, stage = {stage})")]
    Diverged { t: u64, eta: f64, k: usize, stage: usize },
    #[error(transparent)]
    Objective(#[from] ObjectiveError),
}
