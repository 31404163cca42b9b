//! Numerical laboratory for multilinear pseudo-differential operators
//! on periodic grids.
//!
//! The crate is organised bottom-up: [`grid`] holds the discretization and
//! transforms, [`norms`] the amalgam-type norms, [`weights`] the lattice
//! weight classes, [`decomp`] the frequency partitions, [`mpdo`] the
//! operator itself and [`sharpness`] the counterexample families.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bump;
pub mod decomp;
pub mod error;
pub mod fit;
pub mod grid;
pub mod mpdo;
pub mod norms;
pub mod par;
pub mod sharpness;
pub mod symbol;
pub mod weights;

pub use error::{Error, Result};
pub use grid::{Field, Grid, Side};
pub use num_complex::Complex64;
