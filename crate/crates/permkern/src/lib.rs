//! Kernel symmetrizability analysis and permanental sampling.
//!
//! The crate answers three related questions about an n x n kernel K with
//! positive entries:
//!
//! * is K equivalent to a symmetric kernel under diagonal conjugation, and if
//!   so, which one (`symcheck`);
//! * when K is a shifted potential kernel, do its 3 x 3 blocks carry a
//!   nonvanishing cycle residual, possibly only asymptotically
//!   (`dichotomy`, `potential`);
//! * given a symmetric positive semi-definite K and rational alpha, draw
//!   vectors whose Laplace transform is det(I + K diag(s))^{-alpha} and
//!   audit the samples against the closed form (`permanental`).
//!
//! `matrix` holds the shared dense-kernel type with LU-based determinants and
//! solves; `kernels` builds the structured families (exponential Toeplitz,
//! min-kernel, diagonal-plus-constant, random diagonally dominant potentials)
//! that the rest of the crate tests itself against.

// Negated comparisons like `!(x > 0.0)` are deliberate: they reject NaN along
// with the out-of-range sign, which `x <= 0.0` would silently accept.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Index loops in the dense linear-algebra kernels read better than the
// iterator/enumerate rewrites clippy suggests.
#![allow(clippy::needless_range_loop)]

pub mod dichotomy;
pub mod error;
pub mod kernels;
pub mod matrix;
pub mod monotone;
pub mod permanental;
pub mod potential;
pub mod symcheck;

pub use error::{Error, Result};
pub use matrix::{DiagonalScaling, IndexSet, Kernel};
