//! Native monoids and the product bifunctor, used as oracles for the
//! in-language monoid kit.

use std::fmt;
use std::rc::Rc;

use num_bigint::BigInt;
use rand::Rng;
use thiserror::Error;

use crate::model::Value;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MonoidError {
    #[error("{0} is not a pair")]
    NotAPair(String),
    #[error("{0} is not an integer")]
    NotAnInteger(String),
    #[error("{0} is not a string")]
    NotAString(String),
}

type Operation = Rc<dyn Fn(&Value, &Value) -> Result<Value, MonoidError>>;
type Sampler = Rc<dyn Fn(&mut dyn rand::RngCore) -> Value>;

#[derive(Clone)]
pub struct MonoidOracle {
    pub name: String,
    pub identity: Value,
    operation: Operation,
    sampler: Sampler,
}

impl fmt::Debug for MonoidOracle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MonoidOracle({}, identity {})", self.name, self.identity)
    }
}

impl MonoidOracle {
    pub fn operate(&self, a: &Value, b: &Value) -> Result<Value, MonoidError> {
        (self.operation)(a, b)
    }

    pub fn random_element(&self, rng: &mut dyn rand::RngCore) -> Value {
        (self.sampler)(rng)
    }
}

fn integer(v: &Value) -> Result<&BigInt, MonoidError> {
    match v {
        Value::Integer(n) => Ok(n),
        other => Err(MonoidError::NotAnInteger(other.to_string())),
    }
}

fn string(v: &Value) -> Result<&str, MonoidError> {
    match v {
        Value::Str(s) => Ok(s),
        other => Err(MonoidError::NotAString(other.to_string())),
    }
}

fn pair(v: &Value) -> Result<(&Value, &Value), MonoidError> {
    match v {
        Value::List(l) if l.len() == 2 => Ok((l.get(0).expect("len 2"), l.get(1).expect("len 2"))),
        other => Err(MonoidError::NotAPair(other.to_string())),
    }
}

pub fn n_plus() -> MonoidOracle {
    MonoidOracle {
        name: "N+".into(),
        identity: Value::from(0),
        operation: Rc::new(|a, b| Ok(Value::Integer(integer(a)? + integer(b)?))),
        sampler: Rc::new(|rng| Value::from(rng.gen_range(0..=1000i64))),
    }
}

pub fn n_times() -> MonoidOracle {
    MonoidOracle {
        name: "N*".into(),
        identity: Value::from(1),
        operation: Rc::new(|a, b| Ok(Value::Integer(integer(a)? * integer(b)?))),
        sampler: Rc::new(|rng| Value::from(rng.gen_range(0..=1000i64))),
    }
}

pub fn string_concatenation() -> MonoidOracle {
    MonoidOracle {
        name: "CS".into(),
        identity: Value::str(""),
        operation: Rc::new(|a, b| Ok(Value::str(&format!("{}{}", string(a)?, string(b)?)))),
        sampler: Rc::new(|rng| {
            let len = rng.gen_range(0..=6);
            let s: String = (0..len).map(|_| rng.gen_range(b'a'..=b'z') as char).collect();
            Value::str(&s)
        }),
    }
}

/// Componentwise product; a nested product's name is bracketed, as in
/// `CS_x_[N+_x_N*]`.
pub fn monoid_product_native(m1: &MonoidOracle, m2: &MonoidOracle) -> MonoidOracle {
    let wrap = |n: &str| if n.contains("_x_") { format!("[{n}]") } else { n.to_string() };
    let (op1, op2) = (m1.operation.clone(), m2.operation.clone());
    let (s1, s2) = (m1.sampler.clone(), m2.sampler.clone());
    MonoidOracle {
        name: format!("{}_x_{}", wrap(&m1.name), wrap(&m2.name)),
        identity: Value::list([m1.identity.clone(), m2.identity.clone()]),
        operation: Rc::new(move |a, b| {
            let ((a1, a2), (b1, b2)) = (pair(a)?, pair(b)?);
            Ok(Value::list([op1(a1, b1)?, op2(a2, b2)?]))
        }),
        sampler: Rc::new(move |rng| Value::list([s1(rng), s2(rng)])),
    }
}

/// N+, N*, CS, N+×N*, CS×N+ and CS×(N+×N*), named like the corpus globals.
pub fn standard_monoids() -> Vec<MonoidOracle> {
    let (plus, times, cs) = (n_plus(), n_times(), string_concatenation());
    let plus_times = monoid_product_native(&plus, &times);
    let cs_plus = monoid_product_native(&cs, &plus);
    let cs_plus_times = monoid_product_native(&cs, &plus_times);
    vec![plus, times, cs, plus_times, cs_plus, cs_plus_times]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Law {
    LeftIdentity,
    RightIdentity,
    Associativity,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("{law:?} fails on ({a}, {b}, {c}): {left} vs {right}")]
pub struct LawViolation {
    pub law: Law,
    pub a: String,
    pub b: String,
    pub c: String,
    pub left: String,
    pub right: String,
}

/// Checks both identity laws on `a` and associativity on each triple.
/// Errors raised by `op` are reported as the violating side.
pub fn check_laws<F>(identity: &Value, mut op: F, triples: &[(Value, Value, Value)]) -> Result<(), Box<LawViolation>>
where
    F: FnMut(&Value, &Value) -> Result<Value, String>,
{
    let show = |r: &Result<Value, String>| match r {
        Ok(v) => v.to_string(),
        Err(e) => format!("error: {e}"),
    };
    for (a, b, c) in triples {
        let violation = |law, left: &Result<Value, String>, right: &Result<Value, String>| Box::new(LawViolation {
            law,
            a: a.to_string(),
            b: b.to_string(),
            c: c.to_string(),
            left: show(left),
            right: show(right),
        });
        let same = |l: &Result<Value, String>, r: &Result<Value, String>| matches!((l, r), (Ok(x), Ok(y)) if x == y);
        let just_a = Ok(a.clone());
        let left_id = op(identity, a);
        if !same(&left_id, &just_a) {
            return Err(violation(Law::LeftIdentity, &left_id, &just_a));
        }
        let right_id = op(a, identity);
        if !same(&right_id, &just_a) {
            return Err(violation(Law::RightIdentity, &right_id, &just_a));
        }
        let left = op(a, b).and_then(|ab| op(&ab, c));
        let right = op(b, c).and_then(|bc| op(a, &bc));
        if !same(&left, &right) {
            return Err(violation(Law::Associativity, &left, &right));
        }
    }
    Ok(())
}

pub fn random_triples(m: &MonoidOracle, rng: &mut dyn rand::RngCore, count: usize) -> Vec<(Value, Value, Value)> {
    (0..count).map(|_| (m.random_element(rng), m.random_element(rng), m.random_element(rng))).collect()
}
