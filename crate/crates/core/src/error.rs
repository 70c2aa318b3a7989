use thiserror::Error;

/// Errors raised across the laboratory modules.
#[derive(Debug, Error)]
pub enum Error {
    /// The single-site potential admits no positive dilation-derivative
    /// constant on any candidate ball at the requested resolution.
    #[error("hypothesis violation: {0}")]
    HypothesisViolation(String),

    /// The grid is too coarse to resolve the magnetic structure: the
    /// per-plaquette flux fraction must stay below the validity threshold.
    #[error(
        "flux too coarse: per-plaquette flux fraction {flux_fraction:.6} >= limit {limit}; \
         increase grid_points_per_unit"
    )]
    FluxTooCoarse { flux_fraction: f64, limit: f64 },

    /// A disorder sample and a torus geometry disagree on the box side.
    #[error("box mismatch: sample box side {sample} != geometry box side {geometry}")]
    BoxMismatch { sample: f64, geometry: f64 },

    /// The dense Hermitian eigensolver failed to converge.
    #[error("eigensolver convergence failure: {0}")]
    ConvergenceFailure(String),

    /// An eigenvalue cluster does not have the expected flux-count size or
    /// is not well separated from the rest of the spectrum.
    #[error("cluster ambiguous at level {level}: {reason}")]
    ClusterAmbiguous { level: u32, reason: String },

    /// A supplied lower-bound constant for the compressed observable is not
    /// actually satisfied by the instance.
    #[error(
        "hypothesis failure: claimed lower bound c2 = {claimed} but measured smallest \
         compression eigenvalue is {measured}"
    )]
    HypothesisFailure { claimed: f64, measured: f64 },

    /// A scaling fit was requested with too few usable data points.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// Configuration file or parameter validation failure.
    #[error("config error: {0}")]
    ConfigError(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
