//! Differentiation index, Hilbert–Kolchin invariants and order bounds of
//! generic polynomial DAE systems, computed from ranks of Jacobian
//! prolongation windows.

pub mod cli;
pub mod coeff;
pub mod diffpoly;
pub mod error;
pub mod indexcore;
pub mod invariants;
pub mod parse;
pub mod prolong;
pub mod ranklab;
pub mod relfind;
pub mod report;
pub mod sysmodel;
pub mod transbasis;

pub use error::{Error, Result};
