use thiserror::Error;

/// Coarse error classes, used by the CLI to pick an exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Bad input: schema violations, invalid arguments, unsupported transforms.
    Input,
    /// A numerical routine failed to converge or lost accuracy.
    Numerical,
    /// The problem exceeds a hard size cap.
    Capacity,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("unresolved parameter `{0}`")]
    UnresolvedParameter(String),

    #[error("missing bindings for parameters: {}", .0.join(", "))]
    UnboundParameters(Vec<String>),

    #[error("schema error at {field}: {message}")]
    Schema { field: String, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{what}: size {size} exceeds cap {cap}; {hint}")]
    Capacity {
        what: &'static str,
        size: usize,
        cap: usize,
        hint: &'static str,
    },

    #[error("inconsistent manifold: energies of {low} ({low_energy}) and {high} ({high_energy}) differ by more than {tol:e}")]
    InconsistentManifold {
        low: String,
        low_energy: f64,
        high: String,
        high_energy: f64,
        tol: f64,
    },

    #[error("first-order matrix is not identically zero; use first-order analysis")]
    OrderConflict,

    #[error("intermediate state {state} has gap {gap:e} <= tolerance; second-order denominator undefined")]
    DegenerateIntermediate { state: String, gap: f64 },

    #[error("{what} did not converge (residual {residual:e})")]
    NonConvergence { what: &'static str, residual: f64 },

    #[error("norm drift {drift:e} exceeded limit at t = {time}; reduce dt (currently {dt})")]
    StepSize { drift: f64, time: f64, dt: f64 },

    #[error("embedding error: {0}")]
    Embedding(String),

    #[error("unsupported transform: {0}")]
    UnsupportedTransform(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::NonConvergence { .. } | Error::StepSize { .. } => ErrorClass::Numerical,
            Error::Capacity { .. } => ErrorClass::Capacity,
            _ => ErrorClass::Input,
        }
    }

    pub(crate) fn schema(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            field: field.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
