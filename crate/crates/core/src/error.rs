use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Surface or scenario parameters that cannot describe a valid layout.
    #[error("invalid configuration ({field}): {reason}")]
    Config { field: &'static str, reason: String },

    #[error("constraint violated: {0}")]
    Constraint(String),

    #[error("covariance factorization failed at jitter {jitter:e}; smallest eigenvalue estimate {min_eigenvalue:e}")]
    Factorization { jitter: f64, min_eigenvalue: f64 },

    #[error("no preset in subarea {subarea} keeps the minimum spacing to the elements already placed")]
    Infeasible { subarea: usize },

    #[error("exhaustive search refused: {combinations} combinations exceed the cap of {cap}")]
    SearchTooLarge { combinations: u128, cap: u128 },

    #[error("degenerate channel: {0}")]
    Degenerate(String),

    #[error("mixture component {component} collapsed (responsibility mass {mass:e}); reduce the number of components")]
    ComponentCollapse { component: usize, mass: f64 },

    #[error("line {line}: {key}: {reason}")]
    Parse {
        key: String,
        line: usize,
        reason: String,
    },

    #[error("unknown configuration keys: {}", .0.join(", "))]
    UnknownKeys(Vec<String>),

    #[error("missing required keys: {}\n{defaults}", .keys.join(", "))]
    MissingKeys { keys: Vec<String>, defaults: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Short machine-readable tag used on the CLI error line.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config { .. } => "config",
            Error::Constraint(_) => "constraint",
            Error::Factorization { .. } => "numerical",
            Error::Infeasible { .. } => "infeasible",
            Error::SearchTooLarge { .. } => "search_too_large",
            Error::Degenerate(_) => "degenerate",
            Error::ComponentCollapse { .. } => "component_collapse",
            Error::Parse { .. } => "parse",
            Error::UnknownKeys(_) => "unknown_keys",
            Error::MissingKeys { .. } => "missing_keys",
            Error::Io(_) => "io",
        }
    }
}
