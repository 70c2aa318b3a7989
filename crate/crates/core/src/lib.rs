//! Desk-scale laboratory for magnetic Schrödinger operators on flat tori
//! with random breather disorder.
//!
//! The crate builds gauge-phase finite-difference Hamiltonians on
//! integer-flux tori, certifies dilation-monotone single-site potentials,
//! compresses level projectors against unions of small balls to measure
//! unique-continuation constants, checks an abstract trace bound with its
//! explicit constant on random and physical instances, and runs seeded
//! Monte Carlo sweeps for eigenvalue-counting statistics and the empirical
//! integrated density of states.

pub mod cli;
pub mod error;
pub mod lattice;
pub mod linalg;
pub mod model;
pub mod report;
pub mod rng;
pub mod spectral;
pub mod ucp;
pub mod wegner;

pub use error::{Error, Result};
