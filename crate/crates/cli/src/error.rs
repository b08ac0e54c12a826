use std::fmt;

/// A failure classified by exit status.
#[derive(Debug)]
pub enum CliError {
    /// Bad arguments, configuration or input data (exit 1).
    Usage(String),
    /// Numerical failure or an error writing results (exit 2).
    Runtime(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        CliError::Runtime(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Usage(m) | CliError::Runtime(m) => f.write_str(m),
        }
    }
}

impl From<transl2e::Error> for CliError {
    fn from(e: transl2e::Error) -> Self {
        use transl2e::Error as E;
        match e {
            E::Input(_) | E::Domain(_) | E::Config(_) | E::Parse { .. } => CliError::Usage(e.to_string()),
            E::Numerical { .. } | E::Io(_) => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(format!("JSON encoding failed: {e}"))
    }
}
