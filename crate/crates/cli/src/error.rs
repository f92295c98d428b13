use std::fmt;
use std::process::ExitCode;

use serde_json::json;

/// Command failure, split by exit code: 1 for configuration, 2 for
/// everything that goes wrong after the configuration was accepted.
#[derive(Debug)]
pub enum CliError {
    Config { key: String, msg: String },
    Runtime(String),
}

impl CliError {
    pub fn config(key: impl Into<String>, msg: impl Into<String>) -> Self {
        CliError::Config {
            key: key.into(),
            msg: msg.into(),
        }
    }

    pub fn runtime(msg: impl fmt::Display) -> Self {
        CliError::Runtime(msg.to_string())
    }

    /// Rewrites the key of a config error, e.g. to add its table path.
    pub fn scoped(self, f: impl FnOnce(&str) -> String) -> Self {
        match self {
            CliError::Config { key, msg } => CliError::Config { key: f(&key), msg },
            other => other,
        }
    }

    pub fn exit_code(&self) -> ExitCode {
        match self {
            CliError::Config { .. } => ExitCode::from(1),
            CliError::Runtime(_) => ExitCode::from(2),
        }
    }

    /// One-line JSON record for stderr.
    pub fn to_json(&self) -> String {
        let body = match self {
            CliError::Config { key, msg } => json!({"kind": "config", "key": key, "message": msg}),
            CliError::Runtime(msg) => json!({"kind": "runtime", "message": msg}),
        };
        json!({ "error": body }).to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config { key, msg } => write!(f, "config error for `{key}`: {msg}"),
            CliError::Runtime(msg) => f.write_str(msg),
        }
    }
}

impl From<evidal::Error> for CliError {
    fn from(e: evidal::Error) -> Self {
        match e {
            evidal::Error::Config { key, msg } => CliError::Config { key, msg },
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Runtime(e.to_string())
    }
}
