//! Evaluation, discretization, and solution of mixed Hessian-quotient
//! equations on box domains.
//!
//! The equation solved here prescribes, for an unknown `u`, the value of
//!
//! ```text
//! G(U) = sigma_k(U)/sigma_{k-1}(U) - sum_{l=0}^{k-2} alpha_l(x) sigma_l(U)/sigma_{k-1}(U)
//! ```
//!
//! where `U = D^2 u + chi(x, u, Du)` is an augmented Hessian and `sigma_j`
//! acts on its eigenvalues. The crate provides:
//!
//! - exact-ish algebra for elementary symmetric functions, Garding cones,
//!   and Newton–MacLaurin gaps ([`symfn`]),
//! - spectral decompositions of small symmetric tensors, optionally with
//!   respect to a metric ([`spectral`]),
//! - the operator `G`, its eigenbasis derivative, ellipticity and concavity
//!   probes ([`operator`]),
//! - augmentation terms `chi` with a seeded structural validator ([`chi`]),
//! - box grids, finite-difference calculus, and grid-function I/O ([`grid`]),
//! - a damped-Newton continuation solver that tracks admissibility from a
//!   subsolution at `t = 0` to the target equation at `t = 1` ([`solver`]),
//! - manufactured problems ([`problems`]) and a seeded property-check engine
//!   with reproducible reports ([`properties`]).

pub mod chi;
pub mod error;
pub mod expr;
pub mod grid;
pub mod linsolve;
pub mod operator;
pub mod problems;
pub mod properties;
pub mod solver;
pub mod spectral;
pub mod symfn;

pub use error::{Error, Result};
pub use grid::{GridBox, GridFunction};
pub use operator::{OperatorEval, OperatorParams};
pub use solver::{
    Continuation, ContinuationRecord, NewtonIterRecord, ProblemSpec, ScalarField, SolveOutcome,
    SolverOpts,
};
pub use spectral::{SpectralDecomposition, SymTensor};
pub use symfn::EigenvalueVector;
