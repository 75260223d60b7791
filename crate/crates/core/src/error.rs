use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("unknown map `{0}`")]
    UnknownMap(String),
    #[error("unknown zoo system `{0}`")]
    UnknownSystem(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error("model has no points: {0}")]
    EmptyModel(String),
    #[error("capacity exceeded: {what} needs {needed}, cap is {cap}")]
    Capacity {
        what: String,
        needed: usize,
        cap: usize,
    },
    #[error("resolution {value} for {what} is below the model floor {floor}")]
    Resolution {
        what: String,
        value: f64,
        floor: f64,
    },
    #[error("model validation failed: {0}")]
    Validation(String),
    #[error("no witness: {0}")]
    NoWitness(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("io error: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn capacity(what: impl Into<String>, needed: usize, cap: usize) -> Self {
        Error::Capacity {
            what: what.into(),
            needed,
            cap,
        }
    }

    pub(crate) fn resolution(what: impl Into<String>, value: f64, floor: f64) -> Self {
        Error::Resolution {
            what: what.into(),
            value,
            floor,
        }
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Capacity { .. } => 3,
            _ => 2,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
