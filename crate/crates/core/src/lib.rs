//! Simulation library for communication-efficient distributed SGD.
//!
//! A fleet of simulated clients runs Local SGD (periodic model averaging) on a
//! finite-sum objective; stagewise drivers shrink the learning rate while
//! growing both the stage length and the communication period. Every run is
//! deterministic given its seed.
//!
//! All numerics are generic over [`Scalar`] (`f32` or `f64`); the `*64`
//! aliases at the crate root fix the common `f64` case.

pub mod data;
pub mod engine;
pub mod linalg;
pub mod metrics;
pub mod objectives;
pub mod rng;
pub mod scalar;
pub mod schedules;

pub use data::{Dataset, Example, PartitionSpec};
pub use engine::{
    local_sgd, run_stagewise, ClientFleet, EngineError, EvalCadence, LocalSgdConfig, ReturnMode, RunTrace,
    StagewiseOptions,
};
pub use objectives::{Objective, ObjectiveConstants, ObjectiveError, Optimum};
pub use scalar::Scalar;
pub use schedules::{StagePlan, Stage};

pub type Dataset64 = Dataset<f64>;
pub type LogisticObjective64 = objectives::LogisticObjective<f64>;
pub type QuadraticObjective64 = objectives::QuadraticObjective<f64>;
pub type PlObjective64 = objectives::PlObjective<f64>;
pub type ClientFleet64 = ClientFleet<f64>;
pub type LocalSgdConfig64 = LocalSgdConfig<f64>;
pub type StagePlan64 = StagePlan<f64>;
pub type RunTrace64 = RunTrace<f64>;

pub type Dataset32 = Dataset<f32>;
pub type ClientFleet32 = ClientFleet<f32>;
pub type StagePlan32 = StagePlan<f32>;
