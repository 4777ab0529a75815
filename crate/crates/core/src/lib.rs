//! Elementary symmetric functions and the sum-of-Hessian operator
//! `F = sigma_k + sum_s b_s sigma_{k-s}` on eigenvalue vectors.
//!
//! Everything here is pure arithmetic on small dense data: no IO, no
//! threads, no global state. The crate is `no_std` and needs only `alloc`.
//!
//! Index conventions: all public functions use 0-based indices. Degrees of
//! elementary symmetric functions are signed where the calculus needs
//! `sigma_{k-2}` with `k = 1`; negative degrees evaluate to zero.

#![no_std]
#![warn(rust_2018_idioms, unused_qualifications)]
// `!(x > 0.0)` rejects NaN on purpose; indexed loops follow the math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;

pub mod bigfloat;
pub mod concavity;
pub mod cones;
mod error;
pub mod linalg;
pub mod operator;
pub mod quotients;
pub mod sampling;
pub mod symfun;

pub use error::{Error, Result};
pub use symfun::{Spectrum, SymTable};

/// Complex scalar used for directions and Hermitian matrices.
pub type C64 = nalgebra::Complex<f64>;
