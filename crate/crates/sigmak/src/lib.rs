//! Batch verification harness, periodic torus solver and command-line
//! front end for sum-of-Hessian operators.

// `!(x > 0.0)` rejects NaN on purpose; indexed loops follow the math.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop, clippy::type_complexity)]

pub mod cli;
pub mod io;
pub mod problem;
pub mod solver;
pub mod sweep;
pub mod torus;
