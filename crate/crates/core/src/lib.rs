//! Simulation and estimation toolkit for the magnetic dipole–dipole
//! interaction between two trapped electron spins.

pub mod campaign;
pub mod error;
pub mod format;
pub mod inference;
pub mod instrument;
pub mod noise;
pub mod physics;
pub mod sim;
pub mod state;

pub use error::{Error, Result};

#[cfg(test)]
extern crate self as dipolar;
#[cfg(test)]
#[path = "../tests/support/oracle.rs"]
mod oracle;
#[cfg(test)]
mod invariants;
