use std::io;

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("subset is not decodable")]
    NonDecodable,

    #[error("budget n={n} is smaller than the leaf count k={k}")]
    BudgetTooSmall { n: u64, k: u64 },

    #[error("cannot lose {l} elements from a multiset of weight {n}")]
    InvalidLoss { l: u64, n: u64 },

    #[error("decoding probability is zero; conditional cost is undefined")]
    DegenerateModel,

    #[error("bad codeword header: {0}")]
    BadHeader(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for errors that describe the data rather than the request
    /// (non-decodable subsets, infeasible budgets, degenerate models).
    pub fn is_domain(&self) -> bool {
        matches!(
            self,
            Error::NonDecodable
                | Error::BudgetTooSmall { .. }
                | Error::InvalidLoss { .. }
                | Error::DegenerateModel
        )
    }
}
