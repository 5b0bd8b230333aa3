use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    InvalidParameter { name: &'static str, reason: String },
    InvalidInterval { a: f64, b: f64 },
    NonFinite { node: f64 },
    ProbabilityOutOfRange { raw: f64 },
    AssumptionViolated(String),
    WindowBias { bound: f64, limit: f64 },
    Parse(String),
    Config(String),
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter { name, reason: reason.into() }
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidParameter { name, reason } => {
                write!(f, "invalid parameter `{name}`: {reason}")
            }
            Error::InvalidInterval { a, b } => {
                write!(f, "invalid integration interval [{a}, {b}]")
            }
            Error::NonFinite { node } => {
                write!(f, "integrand is not finite at node x = {node}")
            }
            Error::ProbabilityOutOfRange { raw } => {
                write!(f, "probability {raw} is too far outside [0, 1] to clamp")
            }
            Error::AssumptionViolated(msg) => write!(f, "model assumption violated: {msg}"),
            Error::WindowBias { bound, limit } => write!(
                f,
                "interference window bias bound {bound:.3e} exceeds the limit {limit:.3e}; enlarge sim_radius"
            ),
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
            Error::Config(msg) => write!(f, "configuration error: {msg}"),
            Error::Io(msg) => write!(f, "i/o error: {msg}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
