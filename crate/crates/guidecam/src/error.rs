use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("missing bundle component: {0}")]
    MissingComponent(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("non-finite value in tensor `{tensor}` at flat index {index}")]
    NonFiniteData { tensor: String, index: usize },
    #[error("format error: {0}")]
    Format(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("model load error: {0}")]
    ModelLoad(String),
    #[error("annotation error: {0}")]
    Annotation(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("scorer error: {0}")]
    Scorer(String),
    #[error("value out of range: {0}")]
    Range(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<guidecam_core::Error> for Error {
    fn from(e: guidecam_core::Error) -> Self {
        use guidecam_core::Error as C;
        match e {
            C::Shape(m) => Error::Shape(m),
            C::Config(m) => Error::Config(m),
            C::Range(m) => Error::Range(m),
            C::Annotation(m) => Error::Annotation(m),
            C::Scorer(m) => Error::Scorer(m),
        }
    }
}
