use thiserror::Error;

/// Errors produced anywhere in the crate.
#[derive(Debug, Error)]
pub enum PamError {
    #[error("dimension n = {n} outside supported range [{min}, {max}]")]
    Dimension { n: usize, min: usize, max: usize },

    #[error("diffusion constant must be positive, got {0}")]
    NonPositiveKappa(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("potential has tied values at ranks {rank} and {}", rank + 1)]
    TiedPotential { rank: usize },

    #[error("potential field was not built from the coupled construction (no sigma sequence)")]
    MissingSigma,

    #[error("eigensolver did not converge after {iterations} iterations (best residual {best_residual:.3e})")]
    NonConvergence { iterations: usize, best_residual: f64 },

    #[error("principal eigenvector has a negative entry {value:.3e} at vertex {vertex} (residual {residual:.3e})")]
    PerronViolation { vertex: u32, value: f64, residual: f64 },

    #[error("time step underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("solution went negative ({value:.3e}) at vertex {vertex}")]
    NegativeSolution { vertex: u32, value: f64 },

    #[error("total mass is zero or not finite")]
    DegenerateMass,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, PamError>;
