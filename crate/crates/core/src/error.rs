use num_complex::Complex64;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("matrix is not Hermitian (symmetry defect {defect:.3e})")]
    NotHermitian { defect: f64 },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("state-space dimension {dim} exceeds the memory ceiling {ceiling} (set QPERT_MAX_DIM to override)")]
    Capacity { dim: u128, ceiling: usize },

    #[error("site set {0:?} is not inside the volume")]
    OutsideVolume(Vec<usize>),

    #[error("vector has zero overlap with the unperturbed vacuum; not normalizable to the exp ansatz")]
    NotNormalizable,

    #[error("perturbation too strong: update norm grew from {previous:.3e} to {current:.3e} on two consecutive iterations")]
    NonContraction { previous: f64, current: f64 },

    #[error("no convergence after {iterations} iterations (last residual {residual:.3e})")]
    MaxIterations { iterations: usize, residual: f64 },

    #[error("z = {z} lies in the forbidden disk |z - {level}| <= {radius:.4} around a free level")]
    InadmissibleZ { z: Complex64, level: f64, radius: f64 },

    #[error("resolvent series diverges: term norms {0:?} stopped decreasing")]
    SeriesDivergence(Vec<f64>),

    #[error("invalid contour: {0}")]
    Contour(String),

    #[error("Gram matrix is not positive definite (smallest eigenvalue {0:.3e})")]
    NotPositiveDefinite(f64),

    #[error("ill-conditioned least-squares solve (condition number {0:.3e})")]
    IllConditioned(f64),

    #[error("non-Hermitian hopping data: residual imaginary part {0:.3e}")]
    NonHermitianHopping(f64),

    #[error("aliasing detected (edge amplitude {0:.3e}); enlarge volume or grid")]
    Aliasing(f64),

    #[error("time {t} exceeds the wrap-around budget {budget:.3} for this volume")]
    TimeBudget { t: f64, budget: f64 },

    #[error("eigensolver did not converge: {0}")]
    NoConvergence(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
