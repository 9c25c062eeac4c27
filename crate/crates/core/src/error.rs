use thiserror::Error;

/// Errors raised by the library. Codec failures that are part of normal
/// operation (encoder finds no typical codeword, decoder list spans several
/// cosets) are reported as values, not through this type.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("construction error: {0}")]
    Construction(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("enumeration budget exceeded: needs {needed_bits:.2} bits, budget is {budget_bits} bits")]
    Budget { needed_bits: f64, budget_bits: u32 },
    #[error("axis error: {0}")]
    Axis(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("not supported: {0}")]
    NotSupported(String),
    #[error("decode failure: {0}")]
    DecodeFailure(String),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Default enumeration budget in bits (2^24 items).
pub const DEFAULT_BUDGET_BITS: u32 = 24;

/// Fails with [`Error::Budget`] when `count_log2` exceeds `budget_bits`.
pub(crate) fn check_budget(count_log2: f64, budget_bits: u32) -> Result<()> {
    if count_log2 > budget_bits as f64 + 1e-9 {
        Err(Error::Budget {
            needed_bits: count_log2,
            budget_bits,
        })
    } else {
        Ok(())
    }
}
