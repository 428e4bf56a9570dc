use metalens::dynamics::DynamicsError;
use metalens::fit::FitError;
use metalens::io::IoError;
use metalens::lens::DesignError;
use metalens::propagation::PropagationError;
use metalens::tweezer::TweezerError;
use thiserror::Error;

/// Failure classes, each with its own process exit code.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("input error: {0}")]
    Input(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Other(_) => 1,
            CliError::Config(_) => 3,
            CliError::Input(_) => 4,
            CliError::Numerical(_) => 5,
        }
    }

    /// For failures while writing results.
    pub fn output(e: IoError) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<IoError> for CliError {
    fn from(e: IoError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<DesignError> for CliError {
    fn from(e: DesignError) -> Self {
        CliError::Config(e.to_string())
    }
}

impl From<PropagationError> for CliError {
    fn from(e: PropagationError) -> Self {
        match e {
            PropagationError::FocusAtBoundary { .. }
            | PropagationError::MissingHalfCrossing
            | PropagationError::WaistOutsideWindow => CliError::Numerical(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<TweezerError> for CliError {
    fn from(e: TweezerError) -> Self {
        match e {
            TweezerError::Fit(f) => f.into(),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        match e {
            FitError::TooFewPoints { .. } => CliError::Input(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<DynamicsError> for CliError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::InvalidParameter(_) => CliError::Config(e.to_string()),
            DynamicsError::EmptyTrace => CliError::Input(e.to_string()),
            DynamicsError::Fit(f) => f.into(),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}
