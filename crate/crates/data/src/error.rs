use std::fmt;
use std::path::PathBuf;

#[derive(Debug)]
pub enum DataError {
    Io(std::io::Error),
    Image { path: PathBuf, source: image::ImageError },
    Http { url: String, msg: String },
    Json(serde_json::Error),
    EmptyDataset,
    DegenerateStats { channel: usize },
    InvalidInput(String),
    Tensor(albumgan_tensor::TensorError),
}

impl fmt::Display for DataError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DataError::Io(e) => write!(f, "io error: {e}"),
            DataError::Image { path, source } => {
                write!(f, "image error for {}: {source}", path.display())
            }
            DataError::Http { url, msg } => write!(f, "http error for {url}: {msg}"),
            DataError::Json(e) => write!(f, "json error: {e}"),
            DataError::EmptyDataset => write!(f, "dataset contains no images"),
            DataError::DegenerateStats { channel } => {
                write!(f, "channel {channel} has zero standard deviation")
            }
            DataError::InvalidInput(msg) => write!(f, "{msg}"),
            DataError::Tensor(e) => write!(f, "tensor error: {e}"),
        }
    }
}

impl std::error::Error for DataError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            DataError::Io(e) => Some(e),
            DataError::Image { source, .. } => Some(source),
            DataError::Json(e) => Some(e),
            DataError::Tensor(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for DataError {
    fn from(e: std::io::Error) -> Self {
        DataError::Io(e)
    }
}

impl From<serde_json::Error> for DataError {
    fn from(e: serde_json::Error) -> Self {
        DataError::Json(e)
    }
}

impl From<albumgan_tensor::TensorError> for DataError {
    fn from(e: albumgan_tensor::TensorError) -> Self {
        DataError::Tensor(e)
    }
}

pub type Result<T> = std::result::Result<T, DataError>;
