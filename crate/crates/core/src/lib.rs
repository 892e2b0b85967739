//! Alternating proximal minimization for `L(x, y) = f(x) + Q(x, y) + g(y)`
//! together with the tooling to check convergence claims on concrete runs:
//! exponent certificates, rate classification and a catalog of test problems.
//!
//! Everything numeric is generic over [`Scalar`] (`f32` or `f64`); the
//! `*64` aliases below fix the double-precision instantiation most callers
//! want.

// `!(a > b)` is used on purpose: it is also true when `a` is NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod model;
pub mod plk;
pub mod problems;
pub mod prox;
pub mod rates;
pub mod scalar;
pub mod solver;
pub mod trace_csv;

pub use error::{Error, Result};
pub use model::{
    evaluate, residual, BlockProx, ExtReal, IterateRecord, ObjectiveSpec, Point, RunTrace, Schedule,
    StepsizePolicy, TerminationReason,
};
pub use scalar::Scalar;
pub use solver::{run, SolverConfig};

pub type Point64 = Point<f64>;
pub type Objective64 = ObjectiveSpec<f64>;
pub type RunTrace64 = RunTrace<f64>;
pub type SolverConfig64 = SolverConfig<f64>;
pub type StepsizePolicy64 = StepsizePolicy<f64>;
