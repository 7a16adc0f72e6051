//! Planar secular three-body toolkit.
//!
//! The crate covers the averaged interaction between an inner binary and an
//! outer body in the plane: Kepler solvers, the canonical charts, the
//! averaged potential with its renormalizing function, the two reduced
//! Hamiltonians, their flows, and a small Lie-series normal form engine.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod coords;
pub mod dynamics;
pub mod error;
pub mod hamiltonians;
pub mod kepler;
pub mod normalform;
pub mod potentials;

pub use coords::{ActionAngleState, Branch, Frame, HamiltonianIndex, MassParams, SecularState};
pub use error::{Error, Result};
pub use hamiltonians::{Chart, ChartState, HamiltonianSpec};
pub use potentials::QuadratureSpec;
