use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("degenerate scale: {0}")]
    DegenerateScale(String),

    #[error("degenerate alignment: {0}")]
    DegenerateAlignment(String),

    #[error("alignment flips orientation (scale {0} <= 0)")]
    OrientationFlip(f64),

    #[error("format error: {0}")]
    Format(String),

    #[error("corrupt table: {0}")]
    CorruptTable(String),

    #[error("scorer failure: {0}")]
    Scorer(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
