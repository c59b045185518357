//! Lindbladian fitting for quantum process-tomography snapshots.
//!
//! Given an estimated transfer matrix `M` of a quantum channel, the crate searches the
//! branches of the matrix logarithm for the closest valid Lindblad generator. When none
//! lies within the error tolerance it reports the smallest amount of isotropic
//! depolarizing noise `mu` that would make one valid. Degenerate and nearly degenerate
//! spectra are handled by randomized eigenbasis reconstruction, and several snapshots
//! taken at different times can be fitted jointly.
//!
//! Conventions: matrices are row-stacked, so `vec(V)[j*d + k] = V[j][k]` and the unitary
//! `U` has transfer matrix `U ⊗ conj(U)`. All norms are Frobenius unless stated otherwise.

pub mod channel;
pub mod cli;
pub mod error;
pub mod fit;
pub mod io;
pub mod linalg;
pub mod mu;
pub mod multi;
pub mod pipeline;
pub mod preprocess;
pub mod rng;
pub mod solver;
pub mod tomography;

pub use error::{Error, Result};
pub use linalg::{CMatrix, CVector, C64};
