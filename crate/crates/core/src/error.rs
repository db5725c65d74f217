use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unknown species `{0}`")]
    UnknownSpecies(String),
    #[error("duplicate reaction name `{0}`")]
    DuplicateReaction(String),
    #[error("parameter `{0}` is referenced but never declared")]
    UndeclaredParameter(String),
    #[error("parameter `{0}` has no prior")]
    MissingPrior(String),
    #[error("invalid model: {0}")]
    InvalidModel(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },
    #[error("hazard of reaction `{reaction}` evaluated to {value}")]
    BadHazard { reaction: String, value: f64 },
    #[error("reaction `{reaction}` drove `{species}` negative")]
    NegativeCount { reaction: String, species: String },
    #[error("simulation exploded: more than {0} events")]
    Explosion(u64),
    #[error("query time {time} outside trajectory span [{start}, {end}]")]
    TimeOutOfRange { time: f64, start: f64, end: f64 },
    #[error("invalid observation: {0}")]
    InvalidObservation(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("proposal budget of {budget} exhausted after {accepted} of {wanted} acceptances")]
    BudgetExhausted {
        budget: u64,
        accepted: usize,
        wanted: usize,
    },
    #[error("kernel density underflow for particle {0}")]
    WeightUnderflow(usize),
    #[error("all distances are infinite")]
    AllDistancesInfinite,
    #[error("degenerate population: {0}")]
    DegeneratePopulation(String),
    #[error("particle count would exceed cap {cap} (last variance {variance}); inspect the model and data")]
    ParticleCap { cap: usize, variance: f64 },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("zero-variance series")]
    ZeroVariance,
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot write {path}: {source}")]
    Output {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Whether the error reflects bad input rather than a failure during a run.
    pub fn is_validation(&self) -> bool {
        if let Error::Csv(e) = self {
            return !matches!(e.kind(), csv::ErrorKind::Io(_));
        }
        matches!(
            self,
            Error::Syntax { .. }
                | Error::UnknownSpecies(_)
                | Error::DuplicateReaction(_)
                | Error::UndeclaredParameter(_)
                | Error::MissingPrior(_)
                | Error::InvalidModel(_)
                | Error::Shape(_)
                | Error::Dimension { .. }
                | Error::InvalidObservation(_)
                | Error::InvalidDataset(_)
                | Error::Config(_)
                | Error::Io { .. }
        )
    }

    pub(crate) fn output(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Output {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
