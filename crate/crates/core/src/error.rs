use thiserror::Error;

use crate::abc::SampleSet;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("matrix exponential failed: {0}")]
    Numerical(String),

    #[error("posterior has zero total mass on the quadrature grid")]
    DegeneratePosterior,

    #[error("prior density ratio undefined: both densities are zero")]
    UndefinedRatio,

    #[error("empty sample set")]
    EmptySamples,

    #[error("truncated prior acceptance fell below {floor:e} after {attempts} attempts")]
    DegenerateTruncation { floor: f64, attempts: u64 },

    #[error("simulation budget of {cap} exhausted with {accepted} of {requested} samples accepted")]
    BudgetExhausted {
        cap: u64,
        accepted: usize,
        requested: usize,
        partial: Box<SampleSet>,
    },

    #[error("level {level}: {source}")]
    Level {
        level: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("proposal kernel is degenerate: {0}")]
    KernelDegenerate(String),

    #[error("particle weights degenerated at stage {stage} (ess = {ess})")]
    Degeneracy { stage: usize, ess: f64 },

    #[error("nothing to estimate: all level variances are zero")]
    ZeroVariance,

    #[error("lattice mismatch")]
    LatticeMismatch,

    #[error("config: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn at_level(self, level: usize) -> Self {
        match self {
            Error::Level { .. } => self,
            other => Error::Level {
                level,
                source: Box::new(other),
            },
        }
    }
}
