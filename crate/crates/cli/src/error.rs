use std::path::{Path, PathBuf};

use serde_json::json;
use svp_core::Error as CoreError;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    #[error("{}: {message}", path.display())]
    Format { path: PathBuf, message: String },

    #[error("scene ids do not match (missing: {missing:?}, unexpected: {unexpected:?})")]
    Mismatch {
        missing: Vec<String>,
        unexpected: Vec<String>,
    },

    #[error("{}{source}", context_prefix(.context))]
    Core {
        context: Option<String>,
        source: CoreError,
    },

    #[error("{0}")]
    Usage(String),
}

fn context_prefix(context: &Option<String>) -> String {
    context.as_ref().map(|c| format!("{c}: ")).unwrap_or_default()
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn format(path: &Path, message: impl ToString) -> Self {
        Self::Format {
            path: path.to_path_buf(),
            message: message.to_string(),
        }
    }

    pub fn core(context: impl Into<String>, source: CoreError) -> Self {
        Self::Core {
            context: Some(context.into()),
            source,
        }
    }

    /// 0 ok, 1 other failure, 2 IO, 3 format, 4 consistency.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Io { .. } => 2,
            Self::Format { .. } => 3,
            Self::Mismatch { .. } => 4,
            Self::Core { source, .. } => match source {
                CoreError::Io(_) => 2,
                CoreError::Format(_) | CoreError::CorruptTable(_) => 3,
                _ => 1,
            },
            Self::Usage(_) => 1,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Self::Io { .. } => "io",
            Self::Format { .. } => "format",
            Self::Mismatch { .. } => "id-mismatch",
            Self::Core { source, .. } => match source {
                CoreError::InvalidArgument(_) => "invalid-argument",
                CoreError::DegenerateGeometry(_) => "degenerate-geometry",
                CoreError::DegenerateScale(_) => "degenerate-scale",
                CoreError::DegenerateAlignment(_) => "degenerate-alignment",
                CoreError::OrientationFlip(_) => "orientation-flip",
                CoreError::Format(_) => "format",
                CoreError::CorruptTable(_) => "corrupt-table",
                CoreError::Scorer(_) => "scorer",
                CoreError::Io(_) => "io",
            },
            Self::Usage(_) => "usage",
        }
    }

    /// One JSON object per line, for machine consumption.
    pub fn to_json_line(&self) -> String {
        let mut value = json!({
            "error": self.kind(),
            "exit_code": self.exit_code(),
            "message": self.to_string(),
        });
        if let Self::Mismatch { missing, unexpected } = self {
            value["missing"] = json!(missing);
            value["unexpected"] = json!(unexpected);
        }
        value.to_string()
    }
}

pub type CliResult<T> = Result<T, CliError>;
