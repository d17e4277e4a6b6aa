use serde::{Deserialize, Serialize};

/// Tolerances shared by every numerical decision in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NumericPolicy {
    /// Absolute max-norm deviation allowed for Hermitian and projector inputs.
    pub hermitian_tol: f64,
    /// Relative singular-value threshold for null-space extraction.
    pub kernel_rel_tol: f64,
    /// Relative singular-value threshold for rank decisions.
    pub rank_rel_tol: f64,
    /// Negative eigenvalues above `-psd_tol` are clipped to zero.
    pub psd_tol: f64,
    /// Distinct eigenvalues closer than this are treated as non-simple.
    pub cluster_tol: f64,
    /// Relative residual bound for nonlinear eigenpairs.
    pub residual_tol: f64,
    /// Distance to a pole below which an eigenvalue is flagged.
    pub pole_tol: f64,
    /// Step of central finite differences.
    pub fd_step: f64,
}

impl Default for NumericPolicy {
    fn default() -> Self {
        Self {
            hermitian_tol: 1e-12,
            kernel_rel_tol: 1e-9,
            rank_rel_tol: 1e-10,
            psd_tol: 1e-9,
            cluster_tol: 1e-8,
            residual_tol: 1e-8,
            pole_tol: 1e-6,
            fd_step: 1e-5,
        }
    }
}
