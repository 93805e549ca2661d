//! Error type shared across the crate.
//!
//! Every fallible operation returns [`Result`]. Variants are grouped by the
//! layer that raises them: algebraic kernels (symmetric functions, spectral
//! decompositions), the operator itself, the grid, and the solver stack.
//! Callers that need to map failures to process exit codes can rely on
//! [`Error::is_spec_error`] / [`Error::is_solver_failure`].

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A constructor or evaluation received structurally invalid data
    /// (wrong length, empty input, bad parameter range, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A value that must be finite was NaN or infinite.
    #[error("non-finite value in {context}")]
    NonFinite { context: String },

    /// A symmetric-function order was outside `0..=n` (or the restricted
    /// variant's `0..=n-1`).
    #[error("symmetric function order {order} out of range for {n} eigenvalues")]
    OrderOutOfRange { order: usize, n: usize },

    /// An eigenvalue/axis index was out of bounds.
    #[error("index {index} out of bounds for dimension {n}")]
    IndexOutOfBounds { index: usize, n: usize },

    /// The eigenvalue vector left the cone `Gamma_m`: some `sigma_i` with
    /// `i <= m` dropped to `value <= threshold`.
    #[error("cone violation: sigma_{order} = {value:.6e} <= {threshold:.6e}")]
    ConeViolation {
        order: usize,
        value: f64,
        threshold: f64,
    },

    /// A matrix handed to a symmetric routine was not symmetric.
    #[error("matrix not symmetric at ({i},{j}): {a_ij} vs {a_ji}")]
    NotSymmetric { i: usize, j: usize, a_ij: f64, a_ji: f64 },

    /// A metric (or other matrix required to be positive definite) had an
    /// eigenvalue at or below the relative floor.
    #[error("matrix not positive definite: eigenvalue {eigenvalue:.6e} (largest {largest:.6e})")]
    NotPositiveDefinite { eigenvalue: f64, largest: f64 },

    /// The Jacobi sweep limit was reached before the off-diagonal mass
    /// dropped below tolerance. Practically unreachable for finite input.
    #[error("eigendecomposition did not converge after {sweeps} sweeps (off-diagonal {off:.3e})")]
    EigenNoConvergence { sweeps: usize, off: f64 },

    /// Derivative or cross-derivative requested at a boundary node, where
    /// the centered stencil does not exist.
    #[error("boundary node {index:?}: interior-only operation")]
    BoundaryIndex { index: Vec<usize> },

    /// Two grid functions (or a field and a grid) do not live on the same grid.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// Scalar-expression parse failure with byte position into the source.
    #[error("parse error at byte {position}: {message}")]
    Parse { position: usize, message: String },

    /// A user-supplied curvature-term callback returned invalid data.
    #[error("curvature callback failed at x={x:?}, z={z}: {detail}")]
    ChiCallback { x: Vec<f64>, z: f64, detail: String },

    /// Problem data violates a structural requirement (boundary mismatch,
    /// inadmissible subsolution, malformed config, ...).
    #[error("problem specification rejected: {0}")]
    SpecViolation(String),

    /// Linearization found nodes where the current iterate is inadmissible.
    #[error("{count} inadmissible node(s); worst at {index:?}: sigma_{order} = {value:.6e}")]
    InadmissibleNodes {
        count: usize,
        index: Vec<usize>,
        order: usize,
        value: f64,
    },

    /// The damped line search exhausted its step halvings.
    #[error("line search failed at Newton iteration {iteration} (smallest step {step:.3e})")]
    LineSearchFailure { iteration: usize, step: f64 },

    /// Newton reached its iteration cap without meeting the tolerance.
    #[error("Newton did not converge in {iterations} iterations (residual {residual:.6e})")]
    NewtonStalled { iterations: usize, residual: f64 },

    /// The inner linear solve stagnated above the acceptance threshold.
    #[error("linear solve failed: relative residual {relative_residual:.6e} after {iterations} iterations")]
    LinearSolveFailure {
        iterations: usize,
        relative_residual: f64,
    },

    /// Continuation could not advance even at the minimum step size.
    #[error("continuation failed at t = {t:.6} (step {dt:.3e} below minimum)")]
    ContinuationFailure { t: f64, dt: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// True for failures that mean "the problem statement itself is bad"
    /// rather than "the solver gave up".
    pub fn is_spec_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidInput(_)
                | Error::NonFinite { .. }
                | Error::OrderOutOfRange { .. }
                | Error::IndexOutOfBounds { .. }
                | Error::NotSymmetric { .. }
                | Error::GridMismatch(_)
                | Error::Parse { .. }
                | Error::SpecViolation(_)
                | Error::ChiCallback { .. }
        )
    }

    /// True for failures raised by the nonlinear/linear solver stack.
    pub fn is_solver_failure(&self) -> bool {
        matches!(
            self,
            Error::LineSearchFailure { .. }
                | Error::NewtonStalled { .. }
                | Error::LinearSolveFailure { .. }
                | Error::ContinuationFailure { .. }
        )
    }
}
