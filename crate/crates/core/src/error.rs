use thiserror::Error;

/// Errors raised by the model, solvers, simulators and verifiers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} states, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid {what}: {reason}")]
    Invalid { what: String, reason: String },

    #[error("ODE solver failed at t = {t}: {reason}")]
    Solver { t: f64, reason: String },

    #[error("Newton iteration failed after {iterations} iterations (residual {residual:e})")]
    NewtonDiverged { iterations: usize, residual: f64 },

    #[error("fixed-point verification failed at t = {t}: deviation {deviation:e} exceeds {tolerance:e}")]
    FixedPoint { t: f64, deviation: f64, tolerance: f64 },

    #[error("large-cap iteration did not saturate at state {state}")]
    NotSaturated { state: usize },

    #[error("value at state {state} is infinite")]
    InfiniteValue { state: usize },

    #[error("inadmissible weight: gamma({state}) = {gamma:e} is negative")]
    Inadmissible { state: usize, gamma: f64 },

    #[error("horizon {r} too short for time {t}: relative distance to the survival field is {ratio:e}")]
    HorizonMargin { t: f64, r: f64, ratio: f64 },

    #[error("event budget of {cap} exceeded at t = {t}")]
    EventCap { cap: u64, t: f64 },

    #[error("population cap of {cap} exceeded at t = {t}")]
    PopulationCap { cap: usize, t: f64 },

    #[error("unknown particle id {0}")]
    UnknownParticle(u64),

    #[error("time {t} outside the recorded range [0, {horizon}]")]
    TimeOutOfRange { t: f64, horizon: f64 },

    #[error("quadrature did not converge (estimated error {error:e})")]
    Quadrature { error: f64 },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(what: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what: what.into(),
            reason: reason.into(),
        }
    }

    /// True for errors that come from numerical solvers rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::Solver { .. }
                | Error::NewtonDiverged { .. }
                | Error::FixedPoint { .. }
                | Error::NotSaturated { .. }
                | Error::Quadrature { .. }
        )
    }

    /// True for violated mathematical preconditions of a check (as opposed to malformed input).
    pub fn is_precondition(&self) -> bool {
        matches!(
            self,
            Error::Inadmissible { .. } | Error::InfiniteValue { .. } | Error::HorizonMargin { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
