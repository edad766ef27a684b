//! Core library for the pyroswarm toolkit: wildfire suppression planning
//! with a drone fleet.
//!
//! The pipeline has three stages, mirrored by the module layout:
//!
//! * [`firegrid`] — a seeded stochastic fire-spread simulator on a fuel
//!   grid, plus training-pair generation and augmentation utilities.
//! * [`predictor`] — convex neural surrogates trained on simulator
//!   rollouts: per-cell burn classifiers and a scalar next-period burn
//!   cost that is convex in the suppression effort, with an exact
//!   value/subgradient oracle for optimization.
//! * [`model`] / [`solver`] — the one-period dispatch problem (which
//!   bases to activate, which drone serves which fire) with a
//!   distributionally robust period-time constraint, solved exactly by
//!   branch-and-cut inside a base-activation decomposition, on top of a
//!   from-scratch simplex.
//! * [`rollout`] — the myopic multi-period controller that replans each
//!   period while tracking fleet batteries and recharge state.
//! * [`baseline_ga`] — a penalty-based genetic-algorithm planner used as
//!   a baseline.
pub mod baseline_ga;
pub mod firegrid;
pub mod model;
pub mod predictor;
pub mod rollout;
pub mod solver;
#[cfg(test)]
pub(crate) mod testutil;

pub use baseline_ga::{GaConfig, GaOutcome};
pub use firegrid::{FireMap, SpreadConfig, Weather, WindDirection};
pub use model::{Decision, FleetSnapshot, Instance, Scenario, TimeModel};
pub use predictor::IcnnModel;
pub use rollout::{Episode, PlannerKind, RolloutConfig, Termination};
pub use solver::{PlanOptions, PlanOutcome, SolveStats};
