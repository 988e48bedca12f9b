use thiserror::Error;

/// Unified error type for construction, coding, and measurement failures.
#[derive(Debug, Error)]
pub enum Error {
    /// Malformed inputs: wrong lengths, unknown variables, invalid symbols.
    #[error("structural error: {0}")]
    Structure(String),

    /// A probability block that does not sum to one within tolerance.
    #[error("normalization error: {0}")]
    Normalization(String),

    /// The design distribution breaks a required Markov chain.
    #[error("Markov violation: {0}")]
    Markov(String),

    /// Requested rates cannot be realized from the constructed index sets.
    #[error("rate infeasible at this N: {0}")]
    RateInfeasible(String),

    /// Exact-mode computation refused; the caller should fall back to
    /// Monte-Carlo estimation.
    #[error("exact mode refused: {0}")]
    ExactRefused(String),

    /// An enumeration whose state space exceeds the configured cap.
    #[error("state space too large: {0}")]
    TooLarge(String),

    /// Text-format parse failure with a 1-based line number.
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}
