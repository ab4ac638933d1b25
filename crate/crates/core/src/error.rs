use thiserror::Error;

/// Errors produced by every fallible operation in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("{0} is not a prime modulus")]
    NotPrime(u32),

    #[error("domain F_{p}^{n} does not fit in the platform index type")]
    DomainTooLarge { p: u32, n: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("label {label} outside [1, {range}]")]
    LabelOutOfRange { label: u32, range: u32 },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("{what}: needs {needed} steps, budget is {budget}")]
    BudgetExceeded {
        what: &'static str,
        needed: u128,
        budget: u128,
    },

    #[error("matrix is singular")]
    Singular,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("normal form violated: {0}")]
    NormalForm(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate factor: {0}")]
    RankDegenerate(String),

    #[error("subcell {subcell:?} of nonempty cell {cell:?} is empty")]
    EmptySubcell { cell: Vec<u32>, subcell: Vec<u32> },

    #[error("no subcell accepted within {attempts} attempts")]
    NoSubcellAccepted { attempts: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    /// True for errors caused by an enumeration or search budget.
    pub fn is_budget(&self) -> bool {
        matches!(self, Error::BudgetExceeded { .. })
    }

    pub(crate) fn budget(what: &'static str, needed: u128, budget: u128) -> Self {
        Error::BudgetExceeded {
            what,
            needed,
            budget,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

/// `base^exp` as a `u128`, or `None` on overflow.
pub(crate) fn checked_pow(base: u128, exp: usize) -> Option<u128> {
    let mut acc: u128 = 1;
    for _ in 0..exp {
        acc = acc.checked_mul(base)?;
    }
    Some(acc)
}

/// Fails with [`Error::BudgetExceeded`] unless `base^exp <= budget`.
pub(crate) fn ensure_budget(what: &'static str, base: u128, exp: usize, budget: u128) -> Result<u128> {
    match checked_pow(base, exp) {
        Some(v) if v <= budget => Ok(v),
        Some(v) => Err(Error::budget(what, v, budget)),
        None => Err(Error::budget(what, u128::MAX, budget)),
    }
}
