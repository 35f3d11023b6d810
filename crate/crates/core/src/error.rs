use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("invalid config {origin}: {message}")]
    Config { origin: String, message: String },

    #[error("{origin}:{line}: {message}")]
    Parse {
        origin: String,
        line: usize,
        message: String,
    },

    #[error("invalid span [{start}, {end})")]
    InvalidSpan { start: usize, end: usize },

    #[error("unknown code-class tag {0:?}")]
    UnknownCodeClass(String),

    #[error("cache error: {0}")]
    Cache(String),

    #[error("stale cache: {0}")]
    StaleCache(String),

    #[error("geoname id {0} is not present in the gazetteer")]
    UnknownGeonameId(u64),

    #[error("duplicate gold record for document {doc_id:?}, toponym {toponym:?}")]
    DuplicateGoldKey { doc_id: String, toponym: String },

    #[error("invalid cluster parameters: {0}")]
    ClusterParams(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
