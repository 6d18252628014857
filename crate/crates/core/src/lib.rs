//! Statistical ensembles of classical field states encoded in bosonic Fock
//! space, with symbolic and numerical checks of the correspondence between
//! classical Hamiltonian and Heisenberg dynamics.

pub mod algebra;
pub mod dynamics;
pub mod equivalence;
pub mod error;
pub mod expanded;
pub mod fock;
pub mod format;
pub mod lattice;

pub use error::{Error, Result};
