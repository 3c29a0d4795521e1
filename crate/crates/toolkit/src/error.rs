use std::path::{Path, PathBuf};

use serde::Serialize;

/// Failures of a toolkit command, each with a fixed process exit code.
#[derive(Debug, thiserror::Error)]
pub enum ToolError {
    /// Schema or value error in a run configuration; `pointer` is a JSON
    /// pointer into the offending file (empty for the document root).
    #[error("config error at '{pointer}': {message}")]
    Config { pointer: String, message: String },

    #[error("data error: {0}")]
    Data(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("missing artifact {}: {hint}", path.display())]
    MissingArtifact { path: PathBuf, hint: String },

    #[error("io error on {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

pub type ToolResult<T> = Result<T, ToolError>;

impl ToolError {
    pub fn config(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        ToolError::Config { pointer: pointer.into(), message: message.into() }
    }

    pub fn data_in(path: &Path, message: impl std::fmt::Display) -> Self {
        ToolError::Data(format!("{}: {message}", path.display()))
    }

    pub fn missing(path: impl Into<PathBuf>, hint: impl Into<String>) -> Self {
        ToolError::MissingArtifact { path: path.into(), hint: hint.into() }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        ToolError::Io { path: path.to_path_buf(), source }
    }

    /// 0 is success; 2 config, 3 data (and IO), 4 divergence, 5 missing artifact.
    pub fn exit_code(&self) -> i32 {
        match self {
            ToolError::Config { .. } => 2,
            ToolError::Data(_) | ToolError::Io { .. } => 3,
            ToolError::Diverged(_) => 4,
            ToolError::MissingArtifact { .. } => 5,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ToolError::Config { .. } => "config",
            ToolError::Data(_) => "data",
            ToolError::Io { .. } => "io",
            ToolError::Diverged(_) => "diverged",
            ToolError::MissingArtifact { .. } => "missing_artifact",
        }
    }

    /// Machine-readable form printed on stderr by the CLI.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            kind: &'a str,
            exit_code: i32,
            message: String,
            #[serde(skip_serializing_if = "Option::is_none")]
            pointer: Option<&'a str>,
            #[serde(skip_serializing_if = "Option::is_none")]
            path: Option<String>,
        }
        #[derive(Serialize)]
        struct Envelope<'a> {
            error: Body<'a>,
        }
        let (pointer, path) = match self {
            ToolError::Config { pointer, .. } => (Some(pointer.as_str()), None),
            ToolError::MissingArtifact { path, .. } | ToolError::Io { path, .. } => (None, Some(path.display().to_string())),
            _ => (None, None),
        };
        let body = Body { kind: self.kind(), exit_code: self.exit_code(), message: self.to_string(), pointer, path };
        serde_json::to_string(&Envelope { error: body }).expect("error envelope serializes")
    }
}

impl From<dbacs_core::Error> for ToolError {
    fn from(e: dbacs_core::Error) -> Self {
        use dbacs_core::Error as E;
        match e {
            E::Config(m) => ToolError::config("", m),
            E::Diverged(m) => ToolError::Diverged(m),
            other => ToolError::Data(other.to_string()),
        }
    }
}
