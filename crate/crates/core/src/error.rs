use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("no relevant events to fit on")]
    NoEvents,

    #[error("curve value {value} at knot {knot} is not positive; a positivity floor is required")]
    NonPositiveSurvival { knot: f64, value: f64 },

    #[error("Newton iteration did not converge after {iterations} steps (gradient norm {gradient_norm:e})")]
    NonConvergence { iterations: usize, gradient_norm: f64 },

    #[error("information matrix is singular")]
    SingularInformation,

    #[error("missing nuisance for method {method}: {what}")]
    MissingNuisance { method: String, what: &'static str },

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: row {row}: {message}")]
    Parse { path: String, row: usize, message: String },

    #[error("schema mismatch: {0}")]
    Schema(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Short machine-readable code, used in the results CSV `flag` column.
    pub fn code(&self) -> &'static str {
        match self {
            Error::InvalidInput(_) => "invalid_input",
            Error::EmptyDataset => "empty_dataset",
            Error::NoEvents => "no_events",
            Error::NonPositiveSurvival { .. } => "nonpositive_survival",
            Error::NonConvergence { .. } => "nonconvergence",
            Error::SingularInformation => "singular_information",
            Error::MissingNuisance { .. } => "missing_nuisance",
            Error::Config(_) => "config",
            Error::Parse { .. } => "parse",
            Error::Schema(_) => "schema",
            Error::Io(_) => "io",
            Error::Csv(_) => "csv",
            Error::Json(_) => "json",
        }
    }
}
