//! Native operations reachable in operator position or through `#'name`.
//!
//! Each application costs 1 plus a per-builtin rule: arithmetic charges one
//! step per 64-bit limb of the larger operand of every binary step, list and
//! string operations one step per element touched.

use num_bigint::BigInt;
use num_traits::{One, Zero};

use crate::error::EvalError;
use crate::list::List;
use crate::model::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Builtin {
    Add,
    Sub,
    Mul,
    Inc,
    NumEq,
    Less,
    First,
    Second,
    Rest,
    Cons,
    List,
    Append,
    Length,
    Nth,
    Concatenate,
    Values,
    Print,
}

impl Builtin {
    pub const ALL: [Builtin; 17] = [
        Builtin::Add,
        Builtin::Sub,
        Builtin::Mul,
        Builtin::Inc,
        Builtin::NumEq,
        Builtin::Less,
        Builtin::First,
        Builtin::Second,
        Builtin::Rest,
        Builtin::Cons,
        Builtin::List,
        Builtin::Append,
        Builtin::Length,
        Builtin::Nth,
        Builtin::Concatenate,
        Builtin::Values,
        Builtin::Print,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Builtin::Add => "+",
            Builtin::Sub => "-",
            Builtin::Mul => "*",
            Builtin::Inc => "1+",
            Builtin::NumEq => "=",
            Builtin::Less => "<",
            Builtin::First => "first",
            Builtin::Second => "second",
            Builtin::Rest => "rest",
            Builtin::Cons => "cons",
            Builtin::List => "list",
            Builtin::Append => "append",
            Builtin::Length => "length",
            Builtin::Nth => "nth",
            Builtin::Concatenate => "concatenate",
            Builtin::Values => "values",
            Builtin::Print => "print",
        }
    }

    pub fn from_name(name: &str) -> Option<Builtin> {
        Builtin::ALL.iter().copied().find(|b| b.name() == name)
    }

    /// Accepted argument counts as `(min, max)`.
    fn arity(self) -> (usize, Option<usize>) {
        match self {
            Builtin::Add | Builtin::Mul | Builtin::List | Builtin::Append | Builtin::Values => (0, None),
            Builtin::Sub | Builtin::NumEq | Builtin::Less => (1, None),
            Builtin::Concatenate => (1, None),
            Builtin::Inc | Builtin::First | Builtin::Second | Builtin::Rest | Builtin::Length | Builtin::Print => {
                (1, Some(1))
            }
            Builtin::Cons | Builtin::Nth => (2, Some(2)),
        }
    }

    /// Applies the builtin. Returns the result and the step cost of the
    /// application. `print` is handled by the interpreter, which owns output.
    pub fn apply(self, args: &[Value]) -> Result<(Value, u64), EvalError> {
        let (min, max) = self.arity();
        if args.len() < min || max.is_some_and(|m| args.len() > m) {
            return Err(EvalError::TypeError {
                builtin: self.name().into(),
                value: format!("{} argument(s)", args.len()),
                expected: match max {
                    Some(m) if m == min => "the right number of arguments",
                    _ => "enough arguments",
                },
            });
        }
        match self {
            Builtin::Add => fold_arith(self, args, BigInt::zero(), |a, b| a + b),
            Builtin::Mul => fold_arith(self, args, BigInt::one(), |a, b| a * b),
            Builtin::Sub => {
                let first = self.int(&args[0])?;
                if args.len() == 1 {
                    return Ok((Value::Integer(-first), 1 + limbs(first)));
                }
                let (rest, cost) = fold_arith_from(self, &args[1..], first.clone(), |a, b| a - b)?;
                Ok((rest, cost))
            }
            Builtin::Inc => {
                let n = self.int(&args[0])?;
                Ok((Value::Integer(n + 1), 1 + limbs(n)))
            }
            Builtin::NumEq | Builtin::Less => {
                let mut cost = 1;
                let mut holds = true;
                let ints = args.iter().map(|a| self.int(a)).collect::<Result<Vec<_>, _>>()?;
                for pair in ints.windows(2) {
                    cost += limbs(pair[0]).max(limbs(pair[1]));
                    let ok = if self == Builtin::NumEq { pair[0] == pair[1] } else { pair[0] < pair[1] };
                    holds &= ok;
                }
                Ok((truth(holds), cost))
            }
            Builtin::First => {
                let l = self.list(&args[0])?;
                Ok((l.first().cloned().unwrap_or_else(Value::nil), 2))
            }
            Builtin::Second => {
                let l = self.list(&args[0])?;
                Ok((l.get(1).cloned().unwrap_or_else(Value::nil), 3))
            }
            Builtin::Rest => {
                let l = self.list(&args[0])?;
                Ok((Value::List(l.rest()), 2))
            }
            Builtin::Cons => {
                let tail = self.list(&args[1])?;
                Ok((Value::List(List::cons(args[0].clone(), tail.clone())), 2))
            }
            Builtin::List => Ok((Value::list(args.iter().cloned()), 1 + args.len() as u64)),
            Builtin::Append => {
                let Some((last, init)) = args.split_last() else { return Ok((Value::nil(), 1)) };
                let mut result = self.list(last)?.clone();
                let mut cost = 1;
                for a in init.iter().rev() {
                    let items: Vec<Value> = self.list(a)?.iter().cloned().collect();
                    cost += items.len() as u64;
                    result = result.prepend_all(&items);
                }
                Ok((Value::List(result), cost))
            }
            Builtin::Length => match &args[0] {
                Value::List(l) => {
                    let n = l.len() as u64;
                    Ok((Value::from(n as i64), 1 + n))
                }
                Value::Str(s) => {
                    let n = s.chars().count() as u64;
                    Ok((Value::from(n as i64), 1 + n))
                }
                other => Err(self.type_error(other, "a list or string")),
            },
            Builtin::Nth => {
                let index = self.int(&args[0])?;
                let l = self.list(&args[1])?;
                let Ok(i) = usize::try_from(index) else {
                    return Err(self.type_error(&args[0], "a non-negative index"));
                };
                let touched = (i as u64 + 1).min(l.len() as u64).max(1);
                Ok((l.get(i).cloned().unwrap_or_else(Value::nil), 1 + touched))
            }
            Builtin::Concatenate => {
                match &args[0] {
                    Value::Symbol(s) if s.name() == "string" => {}
                    other => return Err(self.type_error(other, "the result type 'string")),
                }
                let mut out = String::new();
                for a in &args[1..] {
                    match a {
                        Value::Str(s) => out.push_str(s),
                        other => return Err(self.type_error(other, "a string")),
                    }
                }
                let cost = 1 + out.chars().count() as u64;
                Ok((Value::str(&out), cost))
            }
            Builtin::Values => Ok((Value::Bundle(args.iter().cloned().collect()), 1 + args.len() as u64)),
            Builtin::Print => {
                let text = args[0].to_string();
                Ok((args[0].clone(), 1 + text.chars().count() as u64))
            }
        }
    }

    fn type_error(self, value: &Value, expected: &'static str) -> EvalError {
        EvalError::TypeError { builtin: self.name().into(), value: value.to_string(), expected }
    }

    fn int(self, v: &Value) -> Result<&BigInt, EvalError> {
        match v {
            Value::Integer(n) => Ok(n),
            other => Err(self.type_error(other, "an integer")),
        }
    }

    fn list(self, v: &Value) -> Result<&List, EvalError> {
        match v {
            Value::List(l) => Ok(l),
            other => Err(self.type_error(other, "a list")),
        }
    }
}

/// Machine words needed for `n`; at least one.
pub fn limbs(n: &BigInt) -> u64 {
    n.bits().div_ceil(64).max(1)
}

fn truth(b: bool) -> Value {
    if b {
        Value::from(1)
    } else {
        Value::nil()
    }
}

fn fold_arith(b: Builtin, args: &[Value], init: BigInt, op: impl Fn(&BigInt, &BigInt) -> BigInt) -> Result<(Value, u64), EvalError> {
    if args.is_empty() {
        return Ok((Value::Integer(init), 1));
    }
    let first = b.int(&args[0])?.clone();
    fold_arith_from(b, &args[1..], first, op)
}

fn fold_arith_from(
    b: Builtin,
    rest: &[Value],
    mut acc: BigInt,
    op: impl Fn(&BigInt, &BigInt) -> BigInt,
) -> Result<(Value, u64), EvalError> {
    let mut cost = 1 + if rest.is_empty() { limbs(&acc) } else { 0 };
    for v in rest {
        let x = b.int(v)?;
        cost += limbs(&acc).max(limbs(x));
        acc = op(&acc, x);
    }
    Ok((Value::Integer(acc), cost))
}
