use thiserror::Error;

/// Slave capability flags, named after the interaction they gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Capability {
    PolynomialInputs,
    OutputDerivatives,
    StateAccess,
    Linearization,
    Rollback,
}

impl std::fmt::Display for Capability {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Capability::PolynomialInputs => "polynomial inputs",
            Capability::OutputDerivatives => "output derivatives",
            Capability::StateAccess => "state access",
            Capability::Linearization => "linearization",
            Capability::Rollback => "rollback",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("singular matrix: pivot {pivot:e} below threshold {threshold:e} at column {column}")]
    SingularMatrix {
        column: usize,
        pivot: f64,
        threshold: f64,
    },

    #[error("polynomial degree {degree} exceeds the maximum of {max}")]
    DegreeTooHigh { degree: usize, max: usize },

    #[error("expected {expected} input channels, got {actual}")]
    ChannelCountMismatch { expected: usize, actual: usize },

    #[error("channel {channel} out of range ({count} channels)")]
    ChannelOutOfRange { channel: usize, count: usize },

    #[error("polynomial input must be expressed on the local step frame")]
    WrongFrame,

    #[error("macro-step size {0:e} s is not positive (minimum 1e-12 s)")]
    NonPositiveStep(f64),

    #[error("Hermite interpolation needs two distinct times, got t1 = t2 = {0}")]
    CoincidentTimes(f64),

    #[error("Stehfest term count {0} must be even and within 4..=18")]
    OddTermCount(usize),

    #[error("slave `{slave}` lacks the {capability} capability")]
    CapabilityMissing {
        slave: String,
        capability: Capability,
    },

    #[error("input {0} is not driven by any output")]
    UnconnectedInput(usize),

    #[error("input {0} is driven by more than one output")]
    MultiplyDrivenInput(usize),

    #[error("connection index {index} out of range ({count} {kind})")]
    ConnectionOutOfRange {
        kind: &'static str,
        index: usize,
        count: usize,
    },

    #[error("solver diverged in `{slave}` at t = {time}")]
    SolverDiverged { slave: String, time: f64 },

    #[error(
        "Newton iteration did not converge within {max_iters} iterations (residual {residual:e})"
    )]
    NoConvergence { max_iters: usize, residual: f64 },

    #[error("macro-step {dt:e} s does not divide the simulated span {span} s")]
    GridMismatch { dt: f64, span: f64 },

    #[error("no trajectory column named `{0}`")]
    UnknownColumn(String),

    #[error("co-simulation step starting at t = {time} failed: {source}")]
    StepFailed {
        time: f64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn step_failed(time: f64, source: Error) -> Self {
        match source {
            // Avoid nesting when an inner master already wrapped the failure.
            e @ Error::StepFailed { .. } => e,
            e => Error::StepFailed {
                time,
                source: Box::new(e),
            },
        }
    }

    pub(crate) fn dims(context: &'static str, expected: usize, actual: usize) -> Self {
        Error::DimensionMismatch {
            context,
            expected,
            actual,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
