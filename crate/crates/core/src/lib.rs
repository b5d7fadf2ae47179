//! Strain-gradient nanoplate Neumann problem: constitutive tensors, boundary
//! calculus, smooth-spline Galerkin discretization and solver, plus a
//! numerical laboratory for the unique-continuation estimates.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord, clippy::too_many_arguments)]

pub mod discretization;
pub mod error;
pub mod exec;
pub mod expr;
pub mod field;
pub mod geometry;
pub mod jet;
pub mod material;
pub mod neumann;
pub mod quadrature;
pub mod solver;
pub mod spectral;
pub mod spline;
pub mod uc_lab;

pub use error::{Error, Result};
