use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration at `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("weight archive error{}: {message}", tensor_suffix(.tensor))]
    Archive {
        tensor: Option<String>,
        message: String,
    },

    #[error("missing weights: {}", .0.join(", "))]
    MissingWeights(Vec<String>),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("unknown agent {0}")]
    UnknownAgent(u32),

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn tensor_suffix(tensor: &Option<String>) -> String {
    match tensor {
        Some(name) => format!(" in tensor `{name}`"),
        None => String::new(),
    }
}

impl Error {
    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}
