//! Permute-and-predict (PaP) and leave-one-covariate-out (LOCO) variable
//! importance under a latent-variable collinearity model.
//!
//! The crate is organised bottom-up:
//!
//! * [`datagen`] draws `X = Z A` and `y = X beta + eps` with `A = delta J + (1 - delta) I`.
//! * [`linmodel`] fits OLS (through the origin by default) and reports t-statistics.
//! * [`forest`] is a small bagged CART regression forest.
//! * [`importance`] computes empirical PaP, LOCO and the absorption coefficient.
//! * [`theory`] evaluates the closed forms and their algebraic cross-checks.
//! * [`simlab`] runs the Monte Carlo grid and serialises results.

pub mod datagen;
pub mod error;
pub mod forest;
pub mod importance;
pub mod linmodel;
pub mod rng;
pub mod simlab;
pub mod theory;

pub use error::{Result, VimpError};

pub use nalgebra;
