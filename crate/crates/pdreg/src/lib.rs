//! Iterative regularization for linearly constrained convex programs by
//! primal-dual splitting, where the iteration count is the regularization
//! parameter and knowledge about the measurements is re-injected through
//! *activation operators* (row projections, Landweber steps, dual slab
//! projections) applied to the primal or dual variable at every step.
//!
//! The crate solves instances of
//!
//! ```text
//!     min J(x)   subject to   A x = b,
//! ```
//!
//! given only a noisy datum `b_delta` with `||b_delta - b|| <= delta`, via
//! two symmetric schemes: an activated primal-dual iteration (`Pda`) and an
//! activated dual-primal iteration (`Dpa`). Running averages of the iterates
//! satisfy explicit Lagrangian-gap and feasibility bounds that this crate
//! can evaluate next to the measured quantities, and early stopping turns
//! the iteration itself into the regularizer.
//!
//! Modules:
//!
//! * [`linops`] — matrix-free linear operators, diagonal metrics, power
//!   iteration norm estimates, step-size admissibility.
//! * [`proxops`] — proximal maps and the activation operator family with
//!   its per-operator error constants.
//! * [`solvers`] — the two iterations, run records, theorem-bound
//!   evaluation, and the forward-backward Tikhonov path and
//!   Douglas-Rachford baselines.
//! * [`imaging`] — discrete gradient/divergence, box blur, total-variation
//!   problem assembly, PGM I/O and image quality metrics.
//! * [`harness`] — seeded instance generation, benchmark drivers, CSV
//!   output, and the command-line entry point.
//!
//! Every random quantity in the crate flows from named ChaCha streams in
//! [`rng`], so a seed pins the whole experiment bit for bit.

pub mod harness;
pub mod imaging;
pub mod linops;
pub mod proxops;
pub mod rng;
pub mod solvers;

use std::fmt;

/// Crate-wide error type.
#[derive(Debug)]
pub enum Error {
    /// A vector or operator dimension does not match its context.
    Shape { what: &'static str, expected: usize, got: usize },
    /// The requested operation is not defined for this operator kind.
    Unsupported(String),
    /// An operator or metric is numerically degenerate (zero row, zero
    /// norm, non-positive metric entry).
    Degenerate(String),
    /// A step size, weight vector, or stop rule is outside its admissible
    /// range.
    InvalidConfig(String),
    /// The metrics violate the step condition `1 - ||G^0.5 A S^0.5||^2 > 0`.
    InadmissibleStep { alpha: f64 },
    /// Malformed text input (matrix files, PGM files, config files).
    Parse(String),
    Io(std::io::Error),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Shape { what, expected, got } => {
                write!(f, "dimension mismatch in {what}: expected {expected}, got {got}")
            }
            Error::Unsupported(msg) => write!(f, "unsupported operation: {msg}"),
            Error::Degenerate(msg) => write!(f, "degenerate input: {msg}"),
            Error::InvalidConfig(msg) => write!(f, "invalid configuration: {msg}"),
            Error::InadmissibleStep { alpha } => {
                write!(f, "step condition violated: alpha = {alpha:.6e} <= 0")
            }
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
            Error::Io(e) => write!(f, "io error: {e}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// Small dense-vector helpers shared across modules.
pub(crate) mod num {
    pub fn dot(a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    pub fn norm_sq(a: &[f64]) -> f64 {
        dot(a, a)
    }

    pub fn norm(a: &[f64]) -> f64 {
        norm_sq(a).sqrt()
    }

    /// y += alpha * x
    pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), y.len());
        for (yi, xi) in y.iter_mut().zip(x) {
            *yi += alpha * xi;
        }
    }

    pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
        debug_assert_eq!(a.len(), b.len());
        a.iter().zip(b).map(|(x, y)| x - y).collect()
    }
}
