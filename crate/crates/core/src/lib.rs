//! Fisher discriminative least squares regression (FDLSR).
//!
//! FDLSR learns a linear projection `Q` (classes × features) by regressing
//! samples onto relaxed label targets. The targets are dragged away from the
//! strict one-hot labels along a sign pattern (`B ⊙ S`, with `S ≥ 0`) and are
//! regularized with a Fisher criterion that rewards intra-class compactness
//! and inter-class spread. Every update in the alternating solver is closed
//! form; the ridge kernel `Xᵀ(XXᵀ+βI)⁻¹` is computed once per fit.
//!
//! The crate also ships the plain LSR and DLSR baselines, a nearest-neighbour
//! head in the projected space, the repeated-split evaluation protocol, grid
//! search, and a set of deliberately naive reference implementations
//! ([`oracles`]) used by the test suites.
//!
//! Data matrices store samples as columns (`d × n`).

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classify;
pub mod cli;
pub mod dataset;
pub mod error;
pub mod eval;
pub mod fisher;
pub mod model;
pub mod oracles;
pub mod par;
pub mod solvers;

pub use error::{Error, Result};

/// Dense real matrix used throughout the crate.
pub type Matrix = nalgebra::DMatrix<f64>;
