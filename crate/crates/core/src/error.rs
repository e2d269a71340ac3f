use thiserror::Error;

use crate::policy::AccessCategory;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// A disassociation referenced an access category with no associated stations.
    #[error("disassociation underflow: no associated {0} station to remove")]
    Underflow(AccessCategory),

    #[error("contention window requested for {0} stations; at least one is required")]
    Domain(u64),

    #[error("invalid scenario: {0}")]
    Config(String),

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("{0} traffic is not supported")]
    Unsupported(AccessCategory),

    /// A ratio metric was requested over an empty denominator.
    #[error("metric {metric} is undefined for scope {scope}: {reason}")]
    Undefined {
        metric: &'static str,
        scope: String,
        reason: &'static str,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
