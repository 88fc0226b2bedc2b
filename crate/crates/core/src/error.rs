use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid potential: {0}")]
    Potential(String),

    #[error("one-body state is not normalized (norm = {norm})")]
    NotNormalized { norm: f64 },

    #[error("coordinate {slot} out of range for a {n}-particle state")]
    SlotOutOfRange { slot: usize, n: usize },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("state space of dimension {dim} exceeds the cap {cap}")]
    TooLarge { dim: usize, cap: usize },

    #[error("hartree step at t = {time}: norm drift {drift:e}")]
    NormDrift { time: f64, drift: f64 },

    #[error("krylov expansion did not converge at step {step}: residual {residual:e}")]
    KrylovNonConvergence { step: usize, residual: f64 },

    #[error("generator `{0}` needs a hartree trajectory")]
    MissingTrajectory(&'static str),

    #[error("hartree trajectory does not cover step {step} (dt = {dt})")]
    TrajectoryTooShort { step: usize, dt: f64 },

    #[error("truncation tail mass {tail:e} exceeds {threshold:e} at t = {time}")]
    TailMass { tail: f64, threshold: f64, time: f64 },

    #[error("invariant drift {drift:e} at frame {frame}: {what}")]
    InvariantDrift {
        frame: usize,
        drift: f64,
        what: &'static str,
    },

    #[error("infeasible weight bound: {0}")]
    Infeasible(String),

    #[error("scaling fit needs at least 3 finite positive points, got {0}")]
    Fit(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}
