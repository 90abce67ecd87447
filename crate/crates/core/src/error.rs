use std::fmt;

#[derive(Debug)]
pub enum CoreError {
    Tensor(albumgan_tensor::TensorError),
    Data(albumgan_data::DataError),
    Io(std::io::Error),
    Image(image::ImageError),
    /// Checkpoint container violations (bad magic, version, truncation,
    /// missing entries).
    Checkpoint(String),
    InvalidConfig(String),
    /// A training run hit a non-finite loss; carries the iteration for the
    /// diagnostic.
    TrainingAborted {
        iter: u64,
        source: albumgan_tensor::TensorError,
    },
    InvalidInput(String),
}

impl fmt::Display for CoreError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CoreError::Tensor(e) => write!(f, "tensor error: {e}"),
            CoreError::Data(e) => write!(f, "data error: {e}"),
            CoreError::Io(e) => write!(f, "io error: {e}"),
            CoreError::Image(e) => write!(f, "image error: {e}"),
            CoreError::Checkpoint(msg) => write!(f, "checkpoint error: {msg}"),
            CoreError::InvalidConfig(msg) => write!(f, "invalid config: {msg}"),
            CoreError::TrainingAborted { iter, source } => {
                write!(f, "training aborted at iteration {iter}: {source}")
            }
            CoreError::InvalidInput(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for CoreError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            CoreError::Tensor(e) => Some(e),
            CoreError::Data(e) => Some(e),
            CoreError::Io(e) => Some(e),
            CoreError::Image(e) => Some(e),
            CoreError::TrainingAborted { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl From<albumgan_tensor::TensorError> for CoreError {
    fn from(e: albumgan_tensor::TensorError) -> Self {
        CoreError::Tensor(e)
    }
}

impl From<albumgan_data::DataError> for CoreError {
    fn from(e: albumgan_data::DataError) -> Self {
        CoreError::Data(e)
    }
}

impl From<std::io::Error> for CoreError {
    fn from(e: std::io::Error) -> Self {
        CoreError::Io(e)
    }
}

impl From<image::ImageError> for CoreError {
    fn from(e: image::ImageError) -> Self {
        CoreError::Image(e)
    }
}

pub type Result<T> = std::result::Result<T, CoreError>;
