use heatlab::HeatError;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Schema(String),
    #[error("solver: {0}")]
    Solver(String),
    #[error("io: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Schema(_) => 2,
            CliError::Solver(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Io(_) => "io",
            CliError::Schema(_) => "schema",
            CliError::Solver(_) => "solver",
        }
    }

    pub fn message(&self) -> &str {
        match self {
            CliError::Io(m) | CliError::Schema(m) | CliError::Solver(m) => m,
        }
    }

    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Payload<'a> {
            error: &'a str,
            message: &'a str,
            exit_code: i32,
        }
        serde_json::to_string(&Payload {
            error: self.kind(),
            message: self.message(),
            exit_code: self.exit_code(),
        })
        .expect("error payload serializes")
    }

    /// Prefixes the message with where it happened.
    pub fn context(self, what: &str) -> Self {
        match self {
            CliError::Io(m) => CliError::Io(format!("{what}: {m}")),
            CliError::Schema(m) => CliError::Schema(format!("{what}: {m}")),
            CliError::Solver(m) => CliError::Solver(format!("{what}: {m}")),
        }
    }
}

impl From<HeatError> for CliError {
    fn from(e: HeatError) -> Self {
        use HeatError::*;
        match e {
            InvalidGrid(_)
            | InvalidIntervals(_)
            | EmptyTimeSet
            | EmptyMask
            | DimensionMismatch { .. }
            | InvalidParameter(_)
            | TimeDependentPotential
            | Nesting(_) => CliError::Schema(e.to_string()),
            SingularStep { .. }
            | ZeroData(_)
            | TauNotFound { .. }
            | SingularGram { .. }
            | DegenerateFit(_) => CliError::Solver(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
