use thiserror::Error;

use crate::reader::{Position, ReadError};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("{pos}: unbound variable {name}")]
    UnboundVariable { name: String, pos: Position },
    #[error("{pos}: undefined function {name}")]
    UndefinedFunction { name: String, pos: Position },
    #[error("{pos}: not a function: {value}")]
    NotAFunction { value: String, pos: Position },
    #[error("{pos}: illegal function call, operator is {head}")]
    IllegalCall { head: String, pos: Position },
    #[error("{pos}: {callee} expects {expected} argument(s), got {got}")]
    ArityMismatch { callee: String, expected: usize, got: usize, pos: Position },
    #[error("{builtin}: {value} is not {expected}")]
    TypeError { builtin: String, value: String, expected: &'static str },
    #[error("{pos}: malformed {form}: {reason}")]
    Malformed { form: &'static str, reason: String, pos: Position },
    #[error("{pos}: {name} is bound twice in one let")]
    DuplicateBinding { name: String, pos: Position },
    #[error("stack overflow: depth limit {limit} exceeded")]
    StackOverflow { limit: usize },
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

/// Any failure of reading or evaluating source text.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("read error at {0}")]
    Read(#[from] ReadError),
    #[error("{0}")]
    Eval(#[from] EvalError),
}
