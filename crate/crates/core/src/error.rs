use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("numerical failure in {context} (condition number {condition:.3e})")]
    Numerical { context: String, condition: f64 },

    #[error("simulation diverged at state {state:?}")]
    SimulationDiverged { state: Vec<f64> },

    #[error("trajectory optimization failed: {0}")]
    OptimizationFailed(String),

    #[error("training diverged (loss {loss}); try a lower learning rate")]
    TrainingDiverged { loss: f64 },

    #[error("world generation failed: {0}")]
    Generation(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("snapshot error: {0}")]
    Snapshot(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code for the CLI: 2 for configuration problems, 3 for
    /// numerical failures, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) => 2,
            Error::Numerical { .. }
            | Error::SimulationDiverged { .. }
            | Error::OptimizationFailed(_)
            | Error::TrainingDiverged { .. } => 3,
            _ => 1,
        }
    }

    pub(crate) fn numerical(context: impl Into<String>, condition: f64) -> Self {
        Error::Numerical {
            context: context.into(),
            condition,
        }
    }
}
