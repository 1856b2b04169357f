//! Energy landscape, Glauber dynamics and exact potential theory for the
//! zero-field Ising and Potts models on three-dimensional boxes.
//!
//! The crate is organised bottom-up:
//!
//! * [`lattice`]: geometry, configurations, symmetry maps;
//! * [`energy`]: exact bond-count energies and decompositions;
//! * [`dynamics`]: Metropolis rates and event-driven simulation;
//! * [`canon`]: explicit configuration families and optimal paths;
//! * [`landscape`]: exhaustive and ceiling-restricted state spaces, barriers, typical sets;
//! * [`potential`]: capacities, hitting times, spectral gaps, auxiliary chains, test functions;
//! * [`cli`]: the batch front end used by the `potts3d` binary.

pub mod canon;
pub mod cli;
pub mod dynamics;
pub mod energy;
pub mod error;
pub mod landscape;
pub mod lattice;
pub mod potential;

pub use error::{Error, Result};
pub use lattice::{Boundary, LatticeSpec, Site, SpinConfig};
