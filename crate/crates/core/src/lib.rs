//! Adiabatic elimination of fast subspaces in Lindblad master equations.
//!
//! The crate builds effective slow-subspace generators `L_eff(z)`, their
//! expansion `L0 + z L1 + ...`, the trace-correction factor `alpha`, nonlinear
//! (Keldysh) spectra, and exact reference propagation for a zoo of few-level
//! models coupled to discrete levels or wide-band continua.
//!
//! Conventions used throughout:
//!
//! * density matrices are vectorized by column stacking, so `rho[(a, b)]`
//!   lives at index `b * N + a` and `vec(A rho B^dag) = (conj(B) kron A) vec(rho)`;
//! * ground levels come first in every basis, so the slow projector `P`
//!   selects the leading block;
//! * Pauli matrices on a two-level slow space use `sigma_z |0> = +|0>`, where
//!   `|0>` is the first ground level.

pub mod effective;
pub mod error;
pub mod experiments;
pub(crate) mod linalg;
pub mod models;
pub mod policy;
pub mod propagation;
pub mod spectral;
pub mod superop;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
pub use policy::NumericPolicy;

/// Dense complex operator on the Hilbert space.
pub type Operator = faer::Mat<C64>;
/// Dense complex matrix acting on vectorized density matrices.
pub type SuperOperator = faer::Mat<C64>;
/// Column-stacked density matrix.
pub type StateVec = faer::Col<C64>;

pub use linalg::{eigenvalues, spectral_norm};
