//! Sparse polynomial expansions of the solution map of a parametric elliptic
//! diffusion equation on `D = (0,1)`.
//!
//! The crate computes Taylor, Jacobi/Legendre and Hermite coefficient
//! expansions of `y -> u(y)` where `-div(a(y) grad u) = f` with homogeneous
//! Dirichlet conditions, for affine (`a = abar + sum y_j psi_j`) and lognormal
//! (`a = exp(sum y_j psi_j)`) coefficient parametrizations. On top of the
//! coefficient engines it provides summability and layer-decay diagnostics,
//! optimal per-coefficient degrees-of-freedom allocation, joint space-parameter
//! best-N selection, and convergence-rate sweeps.
//!
//! The crate is `no_std` (with `alloc`); all IO, file formats and the CLI live
//! in the companion `sparpde-cli` crate.

#![no_std]
#![deny(unsafe_code)]
// negated comparisons like `!(x > 0.0)` are deliberate: they reject NaN,
// which the suggested `<=` form silently accepts
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// indexed loops in quadrature and assembly kernels mirror the math
#![allow(clippy::needless_range_loop)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod dof;
pub mod fem;
pub mod fit;
pub mod model;
pub mod multiindex;
pub mod ortho;
pub mod rng;
pub mod sweep;
pub mod taylor;

mod linalg;
mod real;

use alloc::string::String;

/// Errors shared by every module in the crate.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("integer overflow in {0}")]
    Overflow(&'static str),
    #[error("weight sequence must be strictly positive and finite")]
    InvalidWeights,
    #[error("envelope generation requires all weights > 1 (got rho_{j} = {value})")]
    SurrogateNotSummable { j: usize, value: f64 },
    #[error("index set is not downward closed near {0}")]
    NotDownwardClosed(String),
    #[error("essential infimum of the mean field is not positive (min = {0})")]
    NonPositiveMeanField(f64),
    #[error("uniform ellipticity violated: theta = {0} >= 1")]
    EllipticityViolated(f64),
    #[error("wavelet amplitude too large: theta = {theta} >= 1, reduce the amplitude")]
    WaveletAmplitudeTooLarge { theta: f64 },
    #[error("coefficient field is not positive on element {element} (value {value})")]
    NonPositiveCoefficient { element: usize, value: f64 },
    #[error("linear solve failed: {0}")]
    SingularSystem(&'static str),
    #[error("meshes are incompatible: {0}")]
    MeshMismatch(String),
    #[error("parameter out of range: {0}")]
    InvalidParameter(String),
    #[error("missing recursion ancestor for a stored index; index set corrupted")]
    MissingAncestor,
    #[error("quadrature grid too large: {nodes} tensor nodes exceeds the 10^6 cap")]
    QuadratureTooLarge { nodes: u128 },
    #[error("empty index selection")]
    EmptySelection,
    #[error("rate fit needs at least 4 points (got {0})")]
    TooFewPoints(usize),
}

pub type Result<T> = core::result::Result<T, Error>;
