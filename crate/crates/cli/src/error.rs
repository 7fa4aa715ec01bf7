//! CLI error kinds mapped onto process exit codes.

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug)]
pub enum CliError {
    /// Bad arguments or config file (exit 2).
    Config(String),
    /// Numerical/model failure from the core library (exit 3).
    Numerical(chaosmeter::Error),
    /// Filesystem failure (exit 4).
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Numerical(e) => write!(f, "numerical failure: {e}"),
            CliError::Io(e) => write!(f, "I/O failure: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<chaosmeter::Error> for CliError {
    fn from(e: chaosmeter::Error) -> Self {
        // precondition violations are configuration mistakes; the rest are
        // numerical failures
        match &e {
            chaosmeter::Error::InvalidInput(_) => CliError::Config(e.to_string()),
            _ => CliError::Numerical(e),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}
