mod common;

use std::collections::BTreeSet;

use closurevm::corpus::kz1::{check_simplicial_identities, face_kz1, Simplex};
use closurevm::corpus::monoid::{check_laws, random_triples, standard_monoids};
use closurevm::corpus::transcript::load_transcript;
use closurevm::corpus::{corpus_dir, session_paths};
use closurevm::model::free_variables;
use closurevm::probe::{check_membership, min_coefficient, size_of, Sample};
use closurevm::reader::{parse, print_form, tokenize, Node, SExpr};
use closurevm::{read, FunctionKind, Interpreter, Value};
use common::nesting;
use num_bigint::BigInt;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn symbol() -> impl Strategy<Value = String> {
    "[a-z+*_<>=!?%&./:-][a-z0-9+*_<>=!?%&./:\\[\\]-]{0,6}".prop_filter("not a number", |s| {
        let digits = s.strip_prefix('-').unwrap_or(s);
        digits.is_empty() || !digits.chars().all(|c| c.is_ascii_digit())
    })
}

fn form() -> impl Strategy<Value = SExpr> {
    let leaf = prop_oneof![
        any::<i64>().prop_map(|n| Node::Integer(BigInt::from(n))),
        "[ -~]{0,8}".prop_map(Node::Str),
        symbol().prop_map(Node::Symbol),
        symbol().prop_map(|s| Node::FunctionRef(Box::new(SExpr::synthetic(Node::Symbol(s))))),
    ]
    .prop_map(SExpr::synthetic);
    leaf.prop_recursive(4, 40, 5, |inner| {
        prop_oneof![
            proptest::collection::vec(inner.clone(), 0..5).prop_map(|v| SExpr::synthetic(Node::List(v))),
            inner.prop_map(|f| SExpr::synthetic(Node::Quoted(Box::new(f)))),
        ]
    })
}

fn corpus_forms() -> Vec<SExpr> {
    let mut forms = Vec::new();
    for entry in std::fs::read_dir(corpus_dir().join("programs")).unwrap() {
        forms.extend(read(&std::fs::read_to_string(entry.unwrap().path()).unwrap()).unwrap());
    }
    for path in session_paths().unwrap() {
        for step in load_transcript(&path).unwrap().steps {
            forms.extend(read(&step.input).unwrap());
        }
    }
    forms
}

#[test]
fn corpus_forms_round_trip() {
    let forms = corpus_forms();
    assert!(forms.len() > 80);
    for f in forms {
        let printed = print_form(&f);
        assert_eq!(parse(&tokenize(&printed).unwrap()).unwrap(), vec![f], "{printed}");
    }
}

fn contains_bundle(v: &Value) -> bool {
    match v {
        Value::Bundle(_) => true,
        Value::List(items) => items.iter().any(contains_bundle),
        _ => false,
    }
}

fn phases_add_up(interp: &Interpreter) -> bool {
    let c = interp.counters();
    c.eval_steps == c.dispatch_steps + c.prepare_steps + c.generation_steps + c.call_steps
}

proptest! {
    #![proptest_config(ProptestConfig { failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn printed_forms_read_back(f in form()) {
        let printed = print_form(&f);
        prop_assert_eq!(parse(&tokenize(&printed).unwrap()).unwrap(), vec![f]);
    }

    #[test]
    fn token_positions_increase(forms in proptest::collection::vec(form(), 1..4), sep in "[ \n]{1,3}") {
        let text: Vec<String> = forms.iter().map(print_form).collect();
        let tokens = tokenize(&text.join(&sep)).unwrap();
        for w in tokens.windows(2) {
            prop_assert!(w[0].pos < w[1].pos, "{:?} then {:?}", w[0], w[1]);
        }
    }

    #[test]
    fn capture_follows_lexical_resolution(n in nesting()) {
        let src = n.source();
        let mut interp = Interpreter::new();
        let v = interp.eval_source(&src).unwrap();
        let f = v.as_function().unwrap();
        let got: BTreeSet<&str> = f.captures.iter().map(|(s, _)| s.name()).collect();
        let want = n.expected_captures();
        prop_assert_eq!(f.kind == FunctionKind::Closure, !want.is_empty());
        prop_assert_eq!(got, want);
        prop_assert!(phases_add_up(&interp));
        prop_assert_eq!(interp.machine().depth(), 0);
    }

    #[test]
    fn top_level_lambdas_are_ordinary(n in nesting()) {
        // Strip the layers: at top level nothing resolves lexically.
        let bare = common::Nesting { layers: vec![], ..n };
        let form = &read(&bare.source()).unwrap()[0];
        let f = Interpreter::new().make_function(form).unwrap();
        prop_assert_eq!(f.kind, FunctionKind::Ordinary);
        prop_assert!(f.captures.is_empty());
        // Under a let binding every name, the oracle's captures are exactly the free variables.
        let fv: BTreeSet<String> = free_variables(form).unwrap().into_iter().collect();
        let outer = common::Nesting {
            layers: vec![common::Layer::Let(vec!["a", "b", "c", "d", "e"])],
            ..bare
        };
        let expected: BTreeSet<String> = outer.expected_captures().into_iter().map(String::from).collect();
        prop_assert_eq!(fv, expected);
    }

    #[test]
    fn stack_is_balanced_after_errors(k in 0usize..40, bad in 0usize..4) {
        let mut interp = Interpreter::with_depth_limit(25);
        interp.eval_source("(setq down (lambda (n) (if (= n 0) (funcall fail n) (funcall down (- n 1)))))").unwrap();
        let failing = ["(lambda (n) (+ n \"x\"))", "(lambda (n) (funcall n n))", "(lambda (n) zz)", "(lambda () 1)"];
        interp.eval_source(&format!("(setq fail {})", failing[bad])).unwrap();
        let call = format!("(funcall down {k})");
        prop_assert!(interp.eval_source(&call).is_err());
        prop_assert_eq!(interp.machine().depth(), 0);
        prop_assert!(phases_add_up(&interp));
        prop_assert_eq!(interp.eval_source("(+ 1 2)").unwrap(), Value::from(3));
    }

    #[test]
    fn bundles_never_escape(xs in proptest::collection::vec(-50i64..50, 0..5)) {
        let vals: Vec<String> = xs.iter().map(i64::to_string).collect();
        let vals = vals.join(" ");
        let mut interp = Interpreter::new();
        let programs = [
            format!("(list (values {vals}) (values {vals}))"),
            format!("(setq v (values {vals}))"),
            format!("(let ((w (values {vals}))) (list w))"),
            format!("(funcall (lambda () (values {vals})))"),
            format!("(cons (funcall (lambda () (values {vals}))) ())"),
        ];
        for p in &programs {
            let v = interp.eval_source(p).unwrap();
            prop_assert!(!contains_bundle(&v), "{}", p);
        }
        if let Some(v) = interp.global("v") {
            prop_assert!(!contains_bundle(&v));
        }
    }

    #[test]
    fn list_size_exceeds_its_elements(xs in proptest::collection::vec(any::<i64>(), 0..8), s in "[a-z]{0,5}") {
        let mut items: Vec<Value> = xs.iter().map(|&x| Value::from(x)).collect();
        items.push(Value::str(&s));
        let list = Value::list(items.clone());
        let total = size_of(&list).unwrap();
        prop_assert!(total >= 1);
        for item in &items {
            prop_assert!(total > size_of(item).unwrap());
        }
    }

    #[test]
    fn min_coefficient_is_tight_and_nonincreasing(
        samples in proptest::collection::vec((1u64..500, 1u64..100_000).prop_map(|(sigma, tau)| Sample { sigma, tau }), 1..20),
        d in 0u32..5,
    ) {
        let c = min_coefficient(&samples, d).unwrap();
        prop_assert!(check_membership(&samples, &c, d));
        prop_assert!(min_coefficient(&samples, d + 1).unwrap() <= c);
    }

    #[test]
    fn simplicial_identities(entries in proptest::collection::vec(-1000i64..1000, 1..12)) {
        let s = Simplex::new(entries);
        prop_assert_eq!(check_simplicial_identities(&s), Ok(()));
        for i in 0..=s.dim() {
            prop_assert_eq!(face_kz1(&s, i).unwrap().dim(), s.dim() - 1);
        }
    }

    #[test]
    fn native_monoid_laws(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for m in standard_monoids() {
            let triples = random_triples(&m, &mut rng, 5);
            prop_assert_eq!(check_laws(&m.identity, |a, b| m.operate(a, b).map_err(|e| e.to_string()), &triples), Ok(()));
        }
    }
}
