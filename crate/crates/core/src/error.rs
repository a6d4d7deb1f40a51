use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    /// A history or interaction violated strict action/percept alternation.
    #[error("alternation violation: {0}")]
    Alternation(String),

    #[error("{what} out of range: {value} (allowed {allowed})")]
    OutOfRange {
        what: &'static str,
        value: String,
        allowed: String,
    },

    #[error("decode failure at bit {position}: {reason}")]
    Decode { position: usize, reason: String },

    /// Conditioning on a history of probability zero.
    #[error("undefined conditional: {0}")]
    UndefinedConditional(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("policy is inconsistent with the history at cycle {cycle}")]
    InconsistentPolicy { cycle: usize },

    /// An exhaustive check would exceed its enumeration caps.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("not found: {0}")]
    NotFound(String),
}

impl Error {
    pub(crate) fn out_of_range(what: &'static str, value: impl ToString, allowed: impl ToString) -> Self {
        Error::OutOfRange {
            what,
            value: value.to_string(),
            allowed: allowed.to_string(),
        }
    }
}
