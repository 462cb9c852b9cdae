use thiserror::Error;

/// Errors raised anywhere in the simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid size {0}: must be a power of two and at least 64")]
    InvalidSize(usize),
    #[error("degenerate grid extent [{x_min}, {x_max}]")]
    DegenerateExtent { x_min: f64, x_max: f64 },
    #[error("non-finite derivative at t = {t}")]
    NonFiniteDerivative { t: f64 },
    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("ground state did not converge within {iterations} iterations (last energy change {last_change:e})")]
    NoConvergence { iterations: usize, last_change: f64 },
    #[error("boundary leakage {leakage:e} exceeds {bound:e}")]
    BoundaryLeakage { leakage: f64, bound: f64 },
    #[error("node detected at x = {x}")]
    NodeDetected { x: f64 },
    #[error("density underflow inside the trusted window at xi = {xi}")]
    DensityUnderflow { xi: f64 },

    #[error("classical trajectory left the safe interval at t = {t} (x = {x})")]
    TrajectoryEscape { t: f64, x: f64 },
    #[error("envelope collapsed at t = {t} (sigma = {sigma:e})")]
    Collapse { t: f64, sigma: f64 },
    #[error("expectation integrand not decayed at the trusted-window edge (relative weight {weight:e})")]
    ExpectationWindow { weight: f64 },
    #[error("time {t} outside covered span [{start}, {end}]")]
    TimeOutOfRange { t: f64, start: f64, end: f64 },

    #[error("wave packet does not fit the grid (needs [{lo}, {hi}])")]
    PacketOffGrid { lo: f64, hi: f64 },

    #[error("norm drift {drift:e} exceeds {bound:e}")]
    NormDrift { drift: f64, bound: f64 },
    #[error("time step {dt} aliases the populated kinetic band (phase {phase} per step)")]
    Aliasing { dt: f64, phase: f64 },
    #[error("particle escaped the trusted window at x = {x}")]
    ParticleEscape { x: f64 },

    #[error("{path}:{line}: parse error: {message}")]
    Parse { path: String, line: usize, message: String },
    #[error("validation error in `{field}`: {message}")]
    Validation { field: String, message: String },
    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }

    pub(crate) fn validation(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Validation { field: field.into(), message: message.into() }
    }

    /// Wraps an error with the pipeline stage it came from.
    pub fn in_stage(self, stage: &'static str) -> Self {
        Error::Stage { stage, source: Box::new(self) }
    }
}
