//! Simulation of age-related naive T cell depletion under two paradigms:
//! a deterministic stock-and-flow model integrated with fixed-step solvers,
//! and a stochastic agent-based model of individual cells. Both share the
//! rate functions in [`model`]; [`stats`] compares their outputs.

pub mod abm;
pub mod cli;
pub mod data;
pub mod error;
pub mod model;
pub mod ode;
pub mod plot;
pub mod stats;
pub mod trajectory;

pub use error::{Error, Result};
pub use model::{ActiveCellTable, ModelParams, Scenario, StateVector};
pub use trajectory::{Quantity, Trajectory};
