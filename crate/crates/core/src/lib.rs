// SPDX-License-Identifier: MIT OR Apache-2.0

//! High-order, exactly divergence-free Stokes solver on triangular meshes.
//!
//! This crate discretizes the stationary Stokes equations with a conforming
//! mixed finite element pair on triangulated polygons: velocities are
//! piecewise polynomials of degree `k` that are C¹-continuous at non-corner
//! mesh vertices, pressures are piecewise polynomials of degree `k − 1` that
//! are C⁰ at non-corner vertices and discontinuous at corners of the domain.
//! The pair admits a discrete divergence operator whose range lies inside the
//! pressure space, so computed velocity fields are divergence-free at every
//! point of every element, not merely in a weak sense.
//!
//! The saddle-point system is reduced by element-local static condensation to
//! an interface Schur complement, which is solved by MINRES with a
//! block-diagonal additive Schwarz preconditioner:
//!
//! * one coupled block over all C⁰ vertex velocity functions,
//! * one 2×2 block per C¹ vertex derivative direction,
//! * one block per interior edge (both components of all edge functions),
//! * a diagonal metric on the pressure vertex and element-average functions.
//!
//! Besides solving, the crate computes the spectral diagnostics that
//! characterize the preconditioner: extremal eigenvalues of the
//! preconditioned Schur operator, inf-sup spectra, and the additive Schwarz
//! equivalence spectra, at "desk scale" via dense symmetric eigensolvers.
//!
//! # Modules
//!
//! The pipeline runs bottom-up through the modules:
//!
//! 1. [`polyquad`] — orthogonal polynomials, Bernstein polynomials, and
//!    quadrature rules on the reference triangle.
//! 2. [`refelem`] — pressure/velocity basis tables on the reference element.
//! 3. [`mesh`] — triangulations, vertex classification, built-in geometries,
//!    text-format I/O.
//! 4. [`dofmap`] — global degree-of-freedom numbering, direction sets at
//!    vertices, essential boundary-condition masks.
//! 5. [`assembly`] — element matrices and partitioned global blocks.
//! 6. [`condense`] — static condensation to the interface Schur complement.
//! 7. [`precond`] — the block-diagonal additive Schwarz preconditioner.
//! 8. [`minres`] — preconditioned MINRES with residual tracking.
//! 9. [`spectrum`] — dense generalized eigenvalue diagnostics.
//! 10. [`experiment`] — end-to-end drivers and machine-readable reports.
//!
//! # Example
//!
//! Solve the driven wedge-cavity problem at order `k = 5`:
//!
//! ```ignore
//! use stokes_hp::experiment::{ExperimentConfig, Problem, run_solve};
//!
//! let config = ExperimentConfig {
//!     problem: Problem::Moffatt,
//!     k: 5,
//!     ..Default::default()
//! };
//! let outcome = run_solve(&config).unwrap();
//! assert!(outcome.report.converged);
//! ```

#![warn(missing_docs)]
// Index-heavy numerical loops; `for i in 0..n` with multiple indexed arrays
// is often clearer than iterator chains in this kind of code.
#![allow(clippy::needless_range_loop)]

pub mod assembly;
pub mod condense;
pub mod dofmap;
pub mod experiment;
pub mod linalg;
pub mod mesh;
pub mod minres;
pub mod polyquad;
pub mod precond;
pub mod refelem;
pub mod spectrum;

/// Smallest supported polynomial order for the velocity space.
///
/// Orders below 4 leave the edge polynomial space empty and the C¹ vertex
/// construction degenerate.
pub const MIN_ORDER: usize = 4;

/// Largest supported polynomial order for the velocity space.
pub const MAX_ORDER: usize = 16;

/// Largest matrix dimension the dense diagnostic paths (direct saddle
/// solves, dense eigendecompositions) will materialize.
pub const MAX_DENSE_DIM: usize = 20_000;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Polynomial order outside the supported range.
    #[error("polynomial order k = {k} outside supported range [{min}, {max}]")]
    UnsupportedOrder {
        /// Requested order.
        k: usize,
        /// Smallest supported order.
        min: usize,
        /// Largest supported order.
        max: usize,
    },
    /// A request exceeded a built-in capability limit (quadrature degree,
    /// dense eigensolver size cap, mesh requirements for the solver).
    #[error("capability limit exceeded: {0}")]
    Capability(String),
    /// The mesh violates a structural assumption (nonconforming, degenerate
    /// element, inconsistent orientation).
    #[error("mesh structure error: {0}")]
    MeshStructure(String),
    /// A mesh file could not be parsed.
    #[error("parse error at line {line}: {msg}")]
    Parse {
        /// 1-based line number in the input file.
        line: usize,
        /// Description of the problem.
        msg: String,
    },
    /// Invalid user-supplied data (boundary data, vectors of wrong length).
    #[error("invalid input: {0}")]
    InvalidInput(String),
    /// Invalid configuration of a solver or experiment.
    #[error("invalid configuration: {0}")]
    Config(String),
    /// A factorization or solve broke down unexpectedly.
    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),
    /// Mismatched dimensions between cooperating objects.
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        /// What was being matched.
        what: String,
        /// Expected dimension.
        expected: usize,
        /// Actual dimension.
        got: usize,
    },
    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code associated with this error.
    ///
    /// `2` marks input problems (parse errors, invalid data, I/O), `3` marks
    /// capability limits (unsupported order, size caps, meshes outside the
    /// solver's assumptions).
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. }
            | Error::InvalidInput(_)
            | Error::Io(_)
            | Error::MeshStructure(_)
            | Error::DimensionMismatch { .. }
            | Error::NumericalBreakdown(_) => 2,
            Error::UnsupportedOrder { .. } | Error::Capability(_) | Error::Config(_) => 3,
        }
    }
}

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Validates a polynomial order against the supported range.
pub fn check_order(k: usize) -> Result<()> {
    if !(MIN_ORDER..=MAX_ORDER).contains(&k) {
        return Err(Error::UnsupportedOrder {
            k,
            min: MIN_ORDER,
            max: MAX_ORDER,
        });
    }
    Ok(())
}
