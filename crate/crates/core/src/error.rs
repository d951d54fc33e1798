use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// A query point fell outside `[0, 1]`.
    #[error("{what} = {value} is outside [0, 1]")]
    Domain { what: &'static str, value: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("failed to parse distribution literal `{literal}`: {reason}")]
    Parse { literal: String, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    /// Emit/observe alternation was broken by the driver.
    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("episode exhausted: round {round} requested but horizon is {horizon}")]
    EpisodeExhausted { round: usize, horizon: usize },

    #[error("round {round}: {source}")]
    Round {
        round: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("sweep failed at T={horizon}, seed={seed}: {source}")]
    Sweep {
        horizon: usize,
        seed: u64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn check_unit(what: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::Domain { what, value })
    }
}
