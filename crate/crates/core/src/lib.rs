//! Numerical laboratory for a repeated sender-receiver inspection game
//! with two-sided reputation.
//!
//! The public state is a pair of beliefs: the receiver's belief that the
//! sender is committed honest and the sender's belief that the receiver is
//! committed vigilant. The crate computes stationary equilibria of the
//! termination benchmark and its variants on a discretized belief grid,
//! solves the joint mixing-cutoff system, evaluates the closed-form
//! deterrence benchmark, constructs outcome-equivalent finite punishments,
//! and simulates belief paths to measure hazards, inspection tapering,
//! termination bunching and welfare.

pub mod bayes;
pub mod grid;
pub mod kernel;
pub mod cutoff;
pub mod params;
pub mod punishment;
pub mod report;
pub mod value;

pub use grid::{BeliefState, Grid, Mode, PolicyField, ValueField};
pub use kernel::{Kernel, KernelKind};
pub use params::{ModelParams, RunConfig, SimConfig, SolverConfig, VariantId};
pub use value::{EqOptions, EquilibriumResult};
