use serde::Serialize;

#[derive(Debug)]
pub enum CliError {
    /// Unreadable, malformed or invalid configuration.
    Config { path: Option<String>, message: String },
    Numerical(skt_core::Error),
    Io(std::io::Error),
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError::Config { path: None, message: message.into() }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => 2,
            CliError::Numerical(_) | CliError::Io(_) => 3,
        }
    }

    pub fn diagnostic(&self, command: &str) -> Diagnostic {
        let (kind, path, message) = match self {
            CliError::Config { path, message } => ("config", path.clone(), message.clone()),
            CliError::Numerical(e) => ("numerical", None, e.to_string()),
            CliError::Io(e) => ("io", None, e.to_string()),
        };
        Diagnostic { command: command.to_string(), exit_code: self.exit_code(), kind, path, message }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config { path: Some(p), message } => write!(f, "config error at `{p}`: {message}"),
            CliError::Config { path: None, message } => write!(f, "config error: {message}"),
            CliError::Numerical(e) => write!(f, "numerical failure: {e}"),
            CliError::Io(e) => write!(f, "i/o failure: {e}"),
        }
    }
}

impl From<skt_core::Error> for CliError {
    fn from(e: skt_core::Error) -> Self {
        match e {
            skt_core::Error::Io(io) => CliError::Io(io),
            skt_core::Error::InvalidParams(m) => CliError::Config { path: None, message: m },
            other => CliError::Numerical(other),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e)
    }
}

#[derive(Debug, Serialize)]
pub struct Diagnostic {
    pub command: String,
    pub exit_code: i32,
    pub kind: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    pub message: String,
}
