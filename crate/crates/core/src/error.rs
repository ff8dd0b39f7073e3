use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A family parameter fell outside its admissible interval.
    #[error("parameter {theta} outside domain {domain}")]
    Domain { theta: f64, domain: String },

    #[error("invalid input: {0}")]
    Input(String),

    /// The requested operation is not available for this family or dimension.
    #[error("unsupported operation: {0}")]
    Capability(String),

    /// A model object failed validation at construction time.
    #[error("invalid specification: {0}")]
    Spec(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:.3e}){}", theta_suffix(.theta))]
    NonConvergence {
        residual: f64,
        iterations: usize,
        theta: Option<f64>,
    },
}

fn theta_suffix(theta: &Option<f64>) -> String {
    match theta {
        Some(t) => format!(" at theta = {t}"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }

    pub(crate) fn spec(msg: impl Into<String>) -> Self {
        Error::Spec(msg.into())
    }

    pub(crate) fn capability(msg: impl Into<String>) -> Self {
        Error::Capability(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    /// Attach the sweep parameter to a solver failure.
    pub fn at_theta(self, t: f64) -> Self {
        match self {
            Error::NonConvergence {
                residual, iterations, ..
            } => Error::NonConvergence {
                residual,
                iterations,
                theta: Some(t),
            },
            other => other,
        }
    }
}
