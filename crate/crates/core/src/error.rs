use thiserror::Error;

/// Failure of a partial operation during point or interval evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("division by zero (denominator is or may be 0)")]
    DivisionByZero,
    #[error("logarithm of a non-positive argument")]
    LogDomain,
    #[error("square root of a negative argument")]
    SqrtDomain,
    #[error("evaluation produced NaN")]
    NotANumber,
}

/// Expression text that could not be turned into an AST.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at position {position}: {message}")]
    Syntax { position: usize, message: String },
    #[error("undeclared variable `{name}` at position {position}")]
    UndeclaredVariable { name: String, position: usize },
    #[error("unknown function `{name}` at position {position}")]
    UnknownFunction { name: String, position: usize },
    #[error("exponent at position {position} is not a constant integer")]
    NonIntegerExponent { position: usize },
}

/// Problems detected while assembling or validating a verification problem.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProblemError {
    #[error("dimension mismatch in `{field}`: expected {expected}, found {found}")]
    Dimension {
        field: String,
        expected: usize,
        found: usize,
    },
    #[error("invalid box `{field}`: {message}")]
    InvalidBox { field: String, message: String },
    #[error("rate function rejected: {0}")]
    Gamma(String),
    #[error("state box does not provably contain the zero-superlevel set: {0}")]
    Containment(String),
    #[error("cannot parse `{field}`: {source}")]
    Parse {
        field: String,
        #[source]
        source: ParseError,
    },
    #[error("evaluation failed while checking `{field}`: {source}")]
    Eval {
        field: String,
        #[source]
        source: EvalError,
    },
    #[error("discretization: {0}")]
    Discretize(String),
    #[error("{0}")]
    Other(String),
}
