#![allow(dead_code)]

use std::collections::BTreeSet;

use closurevm::corpus::program_path;
use closurevm::Interpreter;
use proptest::prelude::*;

pub fn interpreter_with(programs: &[&str]) -> Interpreter {
    let mut interp = Interpreter::new();
    for name in programs {
        let src = std::fs::read_to_string(program_path(name)).unwrap();
        interp.eval_source(&src).unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    interp
}

const VARS: [&str; 5] = ["a", "b", "c", "d", "e"];

/// A binding form wrapped around the lambda under test.
#[derive(Debug, Clone)]
pub enum Layer {
    Let(Vec<&'static str>),
    /// Rendered as an immediately called lambda.
    Lambda(Vec<&'static str>),
}

#[derive(Debug, Clone)]
pub enum Body {
    Ref(&'static str),
    Let(&'static str, Box<Body>),
    Lambda(&'static str, Box<Body>),
    Both(Box<Body>, Box<Body>),
    Setq(&'static str, Box<Body>),
}

#[derive(Debug, Clone)]
pub struct Nesting {
    /// Outermost first.
    pub layers: Vec<Layer>,
    pub params: Vec<&'static str>,
    pub body: Body,
}

fn names() -> impl Strategy<Value = Vec<&'static str>> {
    proptest::sample::subsequence(VARS.to_vec(), 0..=3)
}

fn var() -> impl Strategy<Value = &'static str> {
    proptest::sample::select(VARS.to_vec())
}

fn body() -> impl Strategy<Value = Body> {
    var().prop_map(Body::Ref).prop_recursive(4, 16, 2, |inner| {
        prop_oneof![
            (var(), inner.clone()).prop_map(|(v, b)| Body::Let(v, Box::new(b))),
            (var(), inner.clone()).prop_map(|(v, b)| Body::Lambda(v, Box::new(b))),
            (inner.clone(), inner.clone()).prop_map(|(x, y)| Body::Both(Box::new(x), Box::new(y))),
            (var(), inner).prop_map(|(v, b)| Body::Setq(v, Box::new(b))),
        ]
    })
}

pub fn nesting() -> impl Strategy<Value = Nesting> {
    let layer = prop_oneof![names().prop_map(Layer::Let), names().prop_map(Layer::Lambda)];
    (proptest::collection::vec(layer, 0..4), names(), body()).prop_map(|(layers, params, body)| Nesting { layers, params, body })
}

fn render_body(b: &Body) -> String {
    match b {
        Body::Ref(v) => v.to_string(),
        Body::Let(v, b) => format!("(let (({v} 0)) {})", render_body(b)),
        Body::Lambda(v, b) => format!("(lambda ({v}) {})", render_body(b)),
        Body::Both(x, y) => format!("(list {} {})", render_body(x), render_body(y)),
        Body::Setq(v, b) => format!("(setq {v} {})", render_body(b)),
    }
}

impl Nesting {
    pub fn source(&self) -> String {
        let mut expr = format!("(lambda ({}) {})", self.params.join(" "), render_body(&self.body));
        for layer in self.layers.iter().rev() {
            expr = match layer {
                Layer::Let(vs) => {
                    let bindings: Vec<String> = vs.iter().enumerate().map(|(i, v)| format!("({v} {})", i + 1)).collect();
                    format!("(let ({}) {expr})", bindings.join(" "))
                }
                Layer::Lambda(vs) => {
                    let args: Vec<String> = (1..=vs.len()).map(|i| i.to_string()).collect();
                    format!("(funcall (lambda ({}) {expr}) {})", vs.join(" "), args.join(" "))
                }
            };
        }
        expr
    }

    /// Free variables of the target lambda that some enclosing layer binds.
    pub fn expected_captures(&self) -> BTreeSet<&'static str> {
        fn free(b: &Body, bound: &BTreeSet<&'static str>, out: &mut BTreeSet<&'static str>) {
            match b {
                Body::Ref(v) => {
                    if !bound.contains(v) {
                        out.insert(v);
                    }
                }
                Body::Let(v, b) | Body::Lambda(v, b) => {
                    let mut inner = bound.clone();
                    inner.insert(v);
                    free(b, &inner, out);
                }
                Body::Both(x, y) => {
                    free(x, bound, out);
                    free(y, bound, out);
                }
                Body::Setq(v, b) => {
                    if !bound.contains(v) {
                        out.insert(v);
                    }
                    free(b, bound, out);
                }
            }
        }
        let mut fv = BTreeSet::new();
        free(&self.body, &self.params.iter().copied().collect(), &mut fv);
        let scope: BTreeSet<&str> = self
            .layers
            .iter()
            .flat_map(|l| match l {
                Layer::Let(vs) | Layer::Lambda(vs) => vs.clone(),
            })
            .collect();
        fv.intersection(&scope).copied().collect()
    }
}
