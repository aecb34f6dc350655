//! Reaction-diffusion population model with spatial harvesting on
//! gradually fragmented reserve landscapes.
//!
//! The crate is organised around the pipeline of an experiment:
//! [`landscape`] draws binary protected/harvested lattices with a prescribed
//! aggregation index, [`harvest`] turns a lattice and a strategy into a
//! removal term, [`solver`] integrates the model, [`observables`] reduces
//! trajectories to population, yield and flux diagnostics, and [`sweep`]
//! runs ensembles of landscapes against grids of harvesting intensities.

pub mod error;
pub mod harvest;
pub mod landscape;
pub mod observables;
pub mod solver;
pub mod sweep;

pub use error::{Error, Result};
pub use harvest::{HarvestStrategy, RemovalTerm, StrategyKind};
pub use landscape::{GeneratorConfig, Landscape};
pub use observables::Trajectory;
pub use solver::{Field, LinearSolverKind, ModelParams, NumericsConfig};
pub use sweep::{SweepConfig, SweepResult};
