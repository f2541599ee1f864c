//! An interpreter for a small Lisp dialect that distinguishes ordinary
//! functions from closures, meters every evaluation step, and probes
//! empirical polynomial bounds on functionals.

pub mod builtins;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod list;
pub mod machine;
pub mod model;
pub mod probe;
pub mod reader;

pub use builtins::Builtin;
pub use error::{Error, EvalError};
pub use eval::Interpreter;
pub use machine::{CostCounters, Machine, Phase};
pub use model::{FunctionKind, FunctionObject, Value};
pub use reader::{read, ReadError, SExpr};
