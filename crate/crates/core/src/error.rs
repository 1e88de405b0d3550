use thiserror::Error;

/// Errors produced by grid construction, solvers and diagnostics.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("fields live on different grids")]
    GridMismatch,

    #[error("sampled expression is not finite at node ({x}, {y})")]
    NonFiniteSample { x: f64, y: f64 },

    #[error("iterative linear solve stalled: residual {residual:.3e} after {sweeps} sweeps")]
    LinearNoConvergence { residual: f64, sweeps: usize },

    #[error(
        "active-set iteration did not stabilize after {iterations} solves \
         (last two active-set sizes {previous} -> {last})"
    )]
    PicardNoConvergence {
        iterations: usize,
        previous: usize,
        last: usize,
    },

    #[error("piecewise-linear solve left residual {residual:.3e} above the contract bound")]
    ResidualBound { residual: f64 },

    #[error("time step underflow at t={t:.6e} (floor {floor:.3e} reached)")]
    DtFloor { t: f64, floor: f64 },

    #[error("run reached the horizon t={t} before meeting the stationarity criterion")]
    NotConverged { t: f64 },

    #[error("runs have different snapshot time grids")]
    SnapshotMismatch,

    #[error("convergence fit: {0}")]
    Fit(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
