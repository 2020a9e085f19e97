use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid endpoint config: {0}")]
    Config(String),

    #[error("credential variable `{0}` is not set")]
    MissingCredential(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("http client: {0}")]
    Http(#[from] reqwest::Error),

    #[error(transparent)]
    Core(#[from] gazeprompt_core::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("record writer stopped: {0}")]
    Writer(String),
}
