use crate::C64;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("operator is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("operator is not an orthogonal projector (max deviation {deviation:.3e})")]
    NotProjector { deviation: f64 },

    #[error("resolvent pole: z = {z} hits the spectrum (nearest eigenvalue {eigenvalue})")]
    ResolventPole { z: C64, eigenvalue: C64 },

    #[error("degenerate steady state: kernel dimension is {kernel_dim}, expected 1")]
    DegenerateSteadyState { kernel_dim: usize },

    #[error("kernel vector has vanishing trace")]
    TracelessKernel,

    #[error("matrix is not diagonal (largest off-diagonal entry {offdiag:.3e})")]
    NotDiagonal { offdiag: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("contour rank saturated at {rank}: increase probe dimension")]
    IncreaseProbeDimension { rank: usize },

    #[error("non-simple nonlinear eigenvalue near {0}")]
    NonSimpleEigenvalue(C64),

    #[error("family is not of single-pole rational form")]
    UnsupportedForm,

    #[error("eigenpairs are not normalized")]
    UnnormalizedPairs,

    #[error("non-finite values in {0}")]
    NonFinite(String),

    #[error("state is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    NotPositive { min_eigenvalue: f64 },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("decomposition failed: {0}")]
    Decomposition(String),
}
