//! Density-function feedback planning for planar navigation with a
//! reduced-order legged tracking stack.

// `!(x > 0.0)` is used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod density;
pub mod env;
pub mod io;
pub mod planner;
pub mod tracker;
