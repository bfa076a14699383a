//! Nash equilibria of the two-player game for the controlled linear heat
//! equation on an interval.
//!
//! Each player `i` steers `y_t - y_xx + a y = chi_1 u_1 + chi_2 u_2` through
//! a control supported on `omega_i` with `||u_i(t)|| <= M_i`, and wants the
//! terminal state close to its own target `y_i`. The crate provides an
//! implicit Euler discretization with an exactly transposed adjoint,
//! best-response solvers, an iterated best-response engine with
//! first-order and probe-based certificates, and saturation (bang-bang)
//! analysis of the equilibria it finds.

// `!(x > 0.0)` style checks also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod best_response;
pub mod cli;
pub mod config;
pub mod control;
pub mod error;
pub mod nash;
pub mod pde;

pub use error::{Error, Result};
