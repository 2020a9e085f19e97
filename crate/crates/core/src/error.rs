use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("schema error: missing column `{0}`")]
    MissingColumn(String),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("image encoding: {0}")]
    Encode(#[source] image::ImageError),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error("consistency error: {0}")]
    Consistency(String),

    #[error("template: {0}")]
    Template(String),

    #[error("missing baseline cell(s): {}", .0.join(", "))]
    MissingBaseline(Vec<String>),

    #[error("baseline score is zero for {0}; scaling is undefined")]
    ZeroBaseline(String),

    #[error("invalid score: {0}")]
    Score(String),

    #[error("incomplete row {row}: missing {missing}")]
    IncompleteRow { row: String, missing: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
