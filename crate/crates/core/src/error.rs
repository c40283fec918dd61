use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("mass matrix is singular or ill-conditioned (condition estimate {condition:.3e})")]
    SingularMass { condition: f64 },

    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("integration diverged (non-finite state) at t = {t}")]
    Divergence { t: f64 },

    #[error("integration exceeded {max_steps} steps at t = {t}")]
    StepLimit { t: f64, max_steps: usize },

    #[error("{0}")]
    Domain(String),

    #[error("no convergence after {iterations} iterations (residual {residual:.3e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("configuration is not an equilibrium (|grad V| = {gradient_norm:.3e})")]
    NotEquilibrium { gradient_norm: f64 },

    #[error("equilibrium is not a minimum of the potential (stiffness not positive definite)")]
    SaddlePoint,

    #[error("unstable equilibrium: linearized eigenvalue {eigenvalue:.3e} is not positive")]
    UnstableEquilibrium { eigenvalue: f64 },

    #[error("invalid model parameters: {0}")]
    InvalidModel(String),

    #[error("model spec error: {0}")]
    Spec(String),

    #[error("branch point near E = {energy}: tangent is not unique")]
    BranchPoint { energy: f64 },

    #[error("corrector moved {ratio:.2} predictor steps away from the prediction")]
    Deviation { ratio: f64 },

    #[error("{0}")]
    Range(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
