use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("invalid word: symbol {symbol} at position {position} exceeds rule size {rule_size}")]
    InvalidWord {
        position: usize,
        symbol: usize,
        rule_size: usize,
    },

    #[error("symbol prefix exhausted: need {needed} symbols, have {available}")]
    PrefixExhausted { needed: usize, available: usize },

    #[error("level {level} too fine for depth {depth}; {}", match required_depth { Some(d) => format!("depth {d} is required"), None => "the symbol prefix is too short to reach it".to_string() })]
    LevelTooFine {
        level: u32,
        depth: usize,
        required_depth: Option<usize>,
    },

    #[error("resource limit exceeded: {0}")]
    Resource(String),
}

pub type Result<T> = std::result::Result<T, Error>;
