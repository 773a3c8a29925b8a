use thiserror::Error;

/// Command failures, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Malformed config, CSV or parameter. Exit 2.
    #[error("schema violation: {0}")]
    Schema(String),
    /// The numerics failed on valid input. Exit 3.
    #[error("numerical failure: {0}")]
    Numerical(String),
    /// Filesystem and anything else. Exit 1.
    #[error("{0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) => 1,
            CliError::Schema(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }

    pub fn from_core(e: jumpflow::Error) -> Self {
        use jumpflow::Error as E;
        match e {
            _ if e.is_numerical() => CliError::Numerical(e.to_string()),
            E::Schema(m) => CliError::Schema(m),
            E::InvalidInput(_) | E::SizeCap(_) | E::GridTooCoarse { .. } => CliError::Schema(e.to_string()),
            other => CliError::Io(other.to_string()),
        }
    }

    /// Prefixes a schema error with the config field it came from.
    pub fn in_field(self, field: &str) -> Self {
        match self {
            CliError::Schema(m) if !m.starts_with('`') => CliError::Schema(format!("`{field}`: {m}")),
            other => other,
        }
    }
}

impl From<jumpflow::Error> for CliError {
    fn from(e: jumpflow::Error) -> Self {
        CliError::from_core(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
