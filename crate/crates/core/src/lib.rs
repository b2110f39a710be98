//! Cyclic sums of Diananda type.
//!
//! For a nonnegative cyclic vector `x` of length `n` and a window length `k`,
//! the sum `S(n, k; x) = sum_i x_i / (x_{i+1} + ... + x_{i+k})` satisfies
//!
//! ```text
//! k (2^{1/k} - 1)  <=  inf_n (k/n) inf_x S(n, k; x)  <=  gamma_k
//! ```
//!
//! where `gamma_k` is the y-intercept of the common tangent to `e^{-x}` and
//! `g_k(x) = k (1 - e^{-x/k}) / (e^x - 1)`. This crate evaluates the sums,
//! the special functions and both bounds, builds the sparse-geometric witness
//! vectors that approach `gamma_k`, and numerically minimizes small instances.
//!
//! All numerics are generic over [`Scalar`] (`f32`, `f64`); the `*F64` aliases
//! below are what most callers want.

// `!(v > 0)` style guards are there to reject NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod checks;
mod error;
pub mod funcs;
pub mod io;
pub mod optimize;
mod scalar;
pub mod summation;
pub mod sums;
pub mod tangent;
pub mod witness;

pub use error::{Error, Result};
pub use funcs::FamilyIndex;
pub use scalar::Scalar;

pub type CyclicVectorF64 = sums::CyclicVector<f64>;
pub type CyclicVectorF32 = sums::CyclicVector<f32>;
pub type LogCyclicVectorF64 = sums::LogCyclicVector<f64>;
pub type BlockDiagnosticsF64 = sums::BlockDiagnostics<f64>;
pub type FamilyIndexF64 = FamilyIndex<f64>;
pub type TangentSolutionF64 = tangent::TangentSolution<f64>;
pub type TangentSolutionF32 = tangent::TangentSolution<f32>;
pub type WitnessSpecF64 = witness::WitnessSpec<f64>;
pub type MinimizationResultF64 = optimize::MinimizationResult<f64>;
pub type BoundsRowF64 = bounds::BoundsRow<f64>;
