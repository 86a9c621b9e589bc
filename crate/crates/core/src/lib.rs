//! Timely status updating from a unit-battery energy-harvesting sensor over
//! an erasure channel.
//!
//! The crate has two halves that check each other:
//!
//! * [`analytic`] evaluates the closed-form long-term average age of
//!   information (AoI) for threshold policies, with and without erasure
//!   feedback, for one or many sources, and solves for the optimal thresholds.
//! * [`sim`] is a discrete-event simulator of the same physical system whose
//!   epochs feed the renewal-reward estimator in [`stats`].
//!
//! The closed-form code is generic over the scalar type (`f32` or `f64`); the
//! simulator always runs in `f64`. Aliases for the common `f64` instantiations
//! live at the crate root.

pub mod analytic;
pub mod cli;
pub mod error;
pub mod model;
pub mod num;
pub mod sim;
pub mod stats;

pub use error::{Error, Result};
pub use model::{Feedback, Regime, Scheduler};
pub use num::Scalar;

/// Time in normalized units (mean energy inter-arrival time is 1).
pub type Time = f64;

pub type ChannelSpec = model::ChannelSpec<f64>;
pub type PolicySpec = model::PolicySpec<f64>;
pub type AnalyticSolution = model::AnalyticSolution<f64>;
pub type RootSolverConfig = analytic::RootSolverConfig<f64>;
pub type MaxMoments = analytic::MaxMoments<f64>;
pub type GammaOptimum = analytic::GammaOptimum<f64>;

pub type ChannelSpecF32 = model::ChannelSpec<f32>;
pub type AnalyticSolutionF32 = model::AnalyticSolution<f32>;
pub type RootSolverConfigF32 = analytic::RootSolverConfig<f32>;
