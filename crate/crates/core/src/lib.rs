//! Free-fermion entanglement dynamics in non-Hermitian Aubry-André-Harper
//! quasicrystals.

pub mod cli;
pub mod dynamics;
pub mod entanglement;
pub mod error;
pub mod fit;
pub mod io;
pub mod lattice;
pub mod oracle;
pub mod reproduce;
pub mod spectral;
pub mod sweep;

pub use error::{Error, Result};
