//! Numerical laboratory for decoherence-based quantum work accounting:
//! a small driven system coupled to a chaotic quantum bath, evolved
//! exactly, with estimators for decoherence and transition rates and for
//! the work statistics of slow control protocols.

pub mod decoherence;
pub mod error;
pub mod experiment;
pub mod hilbert;
mod lapack;
pub mod model;
pub mod propagation;
pub mod work;

pub use error::{Error, Result};

/// Low-level dense kernels (eigensolver, matrix products) backed by the
/// system LAPACK/BLAS.
pub mod linalg {
    pub use crate::lapack::{adjoint_mul, eigh, mat_mul, matvec, matvec_adjoint};
}
