use alloc::string::String;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch in {context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("infeasible budget: {0}")]
    InfeasibleBudget(String),

    #[error("sample weights are all zero")]
    ZeroWeights,

    #[error("validation set is empty")]
    EmptyValidation,

    #[error("dataset has no combo column; churn analysis needs combination keys")]
    MissingComboKeys,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("{field}: {message}")]
    Config { field: String, message: String },
}

impl Error {
    pub(crate) fn config(field: &str, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
