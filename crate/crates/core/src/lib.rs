//! Vassiliev knot invariants from configuration-space integrals and from
//! exact combinatorics of chord diagrams and trivalent graphs.

pub mod configspace;
pub mod diagrams;
pub mod error;
pub mod integrate;
pub mod knots;
pub mod orientation;
pub mod tinkertoy;
pub mod weights;

pub use error::{Error, Result};
