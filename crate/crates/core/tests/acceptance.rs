//! One line per acceptance criterion. Runs without the libtest harness so
//! the verdicts are always printed.

mod common;

use std::collections::BTreeSet;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use closurevm::corpus::kz1::{check_simplicial_identities, face_kz1, random_simplex, Simplex};
use closurevm::corpus::monoid::{check_laws, random_triples, standard_monoids};
use closurevm::corpus::transcript::{load_transcript, run_transcript};
use closurevm::corpus::{program_path, session_paths};
use closurevm::probe::{family_path, run_family, Family, ProbeConfig, ProbeReport, SizeLadder};
use closurevm::{FunctionKind, Interpreter, Value};
use common::{interpreter_with, nesting};
use proptest::test_runner::{Config, RngAlgorithm, TestRng, TestRunner};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn expected_outputs(session: &str) -> Vec<String> {
    let path = session_paths().unwrap().into_iter().find(|p| p.ends_with(session)).unwrap();
    load_transcript(&path).unwrap().steps.into_iter().map(|s| s.expected).collect()
}

fn contains_in_order(haystack: &[String], needles: &[&str]) -> bool {
    let mut it = haystack.iter();
    needles.iter().all(|n| it.any(|h| h == n))
}

fn transcripts() -> Result<String, String> {
    let sessions = session_paths().map_err(|e| e.to_string())?;
    if sessions.len() != 8 {
        return Err(format!("expected 8 sessions, found {}", sessions.len()));
    }
    for path in &sessions {
        let case = load_transcript(path).map_err(|e| e.to_string())?;
        run_transcript(&case, &mut Interpreter::new()).map_err(|m| format!("{}: {m}", path.display()))?;
    }
    let printed: &[(&str, &[&str])] = &[
        ("05-compose.txt", &["(15 13)", "23", "23", "39"]),
        ("07-genmul.txt", &["15", "45", "63"]),
        ("09-make-package.txt", &["-25", "6", "-30", "-90", "19", "-95", "7", "-35"]),
        ("10-let.txt", &["510", "50"]),
        ("10-adda.txt", &["91", "99"]),
        ("10-add-a-b.txt", &["266", "365"]),
        ("12-monoids.txt", &["9", "20", "0", "(9 20)", "(0 1)"]),
        (
            "12-product-bifunctor.txt",
            &["(9 20)", "\"qwertyuiop\"", "(\"qwertyuiop\" 9)", "(\"qwertyuiop\" (8 25))"],
        ),
    ];
    for (session, values) in printed {
        if !contains_in_order(&expected_outputs(session), values) {
            return Err(format!("{session} does not show {values:?}"));
        }
    }
    let labels: usize = sessions
        .iter()
        .flat_map(|p| load_transcript(p).unwrap().steps)
        .filter(|s| s.expected.contains("#<Function _>") || s.expected.contains("#<Closure _>"))
        .count();
    Ok(format!("8 sessions reproduced, {labels} functional values labelled"))
}

fn constant_generation_cost() -> Result<String, String> {
    let mut interp = interpreter_with(&["genmul"]);
    let genmul = interp.global("genmul").unwrap();
    let factors = ["3".to_string(), "1024".to_string(), format!("{}", num_bigint::BigInt::from(1) << 100), format!("{}", num_bigint::BigInt::from(1) << 1000)];
    let mut per_generation = Vec::new();
    let mut call_phase = Vec::new();
    for m in &factors {
        let before = interp.counters().clone();
        let m = interp.eval_source(m).unwrap();
        let closure = interp.call(&genmul, vec![m]).map_err(|e| e.to_string())?;
        let after = interp.counters();
        if closure.as_function().map(|f| f.kind) != Some(FunctionKind::Closure) {
            return Err("genmul did not return a closure".into());
        }
        per_generation.push(after.generation_steps - before.generation_steps);
        call_phase.push(after.call_steps - before.call_steps);
    }
    if per_generation.windows(2).any(|w| w[0] != w[1]) {
        return Err(format!("generation steps vary: {per_generation:?}"));
    }
    // The same through the profiler's per-site statistics.
    let mut driver = Interpreter::new();
    driver.eval_source(&std::fs::read_to_string(program_path("genmul-driver")).unwrap()).map_err(|e| e.to_string())?;
    let site = driver.counters().sites.values().find(|s| s.generations == 4).ok_or("no site with four generations")?;
    if site.min_steps != site.max_steps {
        return Err(format!("driver site spans {}..{}", site.min_steps, site.max_steps));
    }
    Ok(format!("steps per generation {:?}, call phase {:?}", per_generation, call_phase))
}

fn capture_decision() -> Result<String, String> {
    let mut interp = Interpreter::new();
    interp.eval_source("(setq a 25)").unwrap();
    let adda1 = interp.eval_source("(setq adda1 (lambda (b) (+ a b)))").unwrap();
    let adda2 = interp.eval_source("(setq adda2 (let ((a 33)) (lambda (b) (+ a b))))").unwrap();
    let kinds = (adda1.as_function().unwrap().kind, adda2.as_function().unwrap().kind);
    if kinds != (FunctionKind::Ordinary, FunctionKind::Closure) {
        return Err(format!("adda1/adda2 kinds {kinds:?}"));
    }
    let config = Config { cases: 50, failure_persistence: None, ..Config::default() };
    let mut runner = TestRunner::new_with_rng(config, TestRng::deterministic_rng(RngAlgorithm::ChaCha));
    let closures = std::cell::Cell::new(0);
    let total = std::cell::Cell::new(0);
    runner
        .run(&nesting(), |n| {
            let src = n.source();
            let v = Interpreter::new().eval_source(&src).map_err(|e| proptest::test_runner::TestCaseError::fail(format!("{src}: {e}")))?;
            let f = v.as_function().ok_or_else(|| proptest::test_runner::TestCaseError::fail(format!("{src}: {v}")))?;
            let got: BTreeSet<&str> = f.captures.iter().map(|(s, _)| s.name()).collect();
            let want = n.expected_captures();
            let kind = if want.is_empty() { FunctionKind::Ordinary } else { FunctionKind::Closure };
            proptest::prop_assert_eq!(&got, &want, "{}", src);
            proptest::prop_assert_eq!(f.kind, kind, "{}", src);
            total.set(total.get() + 1);
            closures.set(closures.get() + usize::from(kind == FunctionKind::Closure));
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(format!("adda1 Ordinary, adda2 Closure; {} nestings ({} closures) agree with the oracle", total.get(), closures.get()))
}

fn kz1() -> Result<String, String> {
    let s = Simplex::new(vec![-19, -14, 8, 4]);
    if face_kz1(&s, 2).map_err(|e| e.to_string())? != Simplex::new(vec![-19, -6, 4]) {
        return Err("worked face differs".into());
    }
    let mut interp = interpreter_with(&["kz1-face"]);
    let face = interp.global("kz1-face").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut faces = 0;
    for _ in 0..1000 {
        let s = random_simplex(&mut rng, 8, 100);
        check_simplicial_identities(&s).map_err(|(i, j)| format!("identity fails at ({i},{j}) on {s:?}"))?;
        for i in 0..=s.dim() {
            let native = face_kz1(&s, i).unwrap();
            let got = interp.call(&face, vec![s.to_value(), Value::from(i as i64)]).map_err(|e| e.to_string())?;
            if Simplex::from_value(&got).map_err(|e| e.to_string())? != native {
                return Err(format!("kz1-face differs on {s:?}, i={i}: {got}"));
            }
            faces += 1;
        }
    }
    Ok(format!("worked face exact; 1000 simplices satisfy the identities; {faces} in-language faces agree"))
}

fn monoid_laws() -> Result<String, String> {
    let mut interp = interpreter_with(&["monoid"]);
    let operation = interp.global("operation").unwrap();
    let identity = interp.global("identity").unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut names = Vec::new();
    for m in standard_monoids() {
        let triples = random_triples(&m, &mut rng, 200);
        check_laws(&m.identity, |a, b| m.operate(a, b).map_err(|e| e.to_string()), &triples)
            .map_err(|v| format!("native {}: {v}", m.name))?;
        let monoid = interp.global(&m.name).ok_or(format!("{} is not defined in the kit", m.name))?;
        let id = interp.call(&identity, vec![monoid.clone()]).map_err(|e| e.to_string())?;
        if id != m.identity {
            return Err(format!("{}: in-language identity {id} vs {}", m.name, m.identity));
        }
        check_laws(&id, |a, b| interp.call(&operation, vec![monoid.clone(), a.clone(), b.clone()]).map_err(|e| e.to_string()), &triples)
            .map_err(|v| format!("in-language {}: {v}", m.name))?;
        for (a, b, _) in triples.iter().take(20) {
            let native = m.operate(a, b).unwrap();
            let lisp = interp.call(&operation, vec![monoid.clone(), a.clone(), b.clone()]).unwrap();
            if native != lisp {
                return Err(format!("{}: {native} vs {lisp}", m.name));
            }
        }
        names.push(m.name);
    }
    Ok(format!("200 triples each for {}", names.join(", ")))
}

fn probe(name: &str, config: &ProbeConfig) -> Result<ProbeReport, String> {
    let family = Family::load(&family_path(name)).map_err(|e| e.to_string())?;
    run_family(&family, config).map_err(|e| e.to_string())
}

fn polynomiality() -> Result<String, String> {
    let config = ProbeConfig::default();
    let ProbeReport::Membership(list) = probe("list-length", &config)? else { return Err("list-length: wrong mode".into()) };
    if list.degree != Some(1) || !list.members.iter().all(|m| m.fit.witnessed) {
        return Err(format!("list-length: {}", ProbeReport::Membership(list)));
    }
    let strict = ProbeConfig { degree_max: 3, sizes: Some(SizeLadder { start: 2, end: 12 }), ..config.clone() };
    let ProbeReport::Membership(doubling) = probe("doubling", &strict)? else { return Err("doubling: wrong mode".into()) };
    if doubling.degree.is_some() {
        return Err(format!("doubling passed at {:?}", doubling.degree));
    }
    let ho = |name: &str| -> Result<closurevm::probe::HigherOrderReport, String> {
        match probe(name, &config)? {
            ProbeReport::HigherOrder(r) => Ok(r),
            other => Err(format!("{name}: wrong mode\n{other}")),
        }
    };
    let first = ho("compose-with-identity")?;
    if !first.passed() || first.degree_dprime != Some(1) {
        return Err(format!("compose-with-identity: {}", ProbeReport::HigherOrder(first)));
    }
    let second = ho("identity-compose")?;
    if !second.passed() || second.degree_d != first.degree_dprime.unwrap() {
        return Err(format!("identity-compose: {}", ProbeReport::HigherOrder(second)));
    }
    let composed = ho("composed-transforms")?;
    if !composed.passed() || composed.degree_d != first.degree_d || composed.degree_dprime > second.degree_dprime {
        return Err(format!("composition: {}", ProbeReport::HigherOrder(composed)));
    }
    Ok(format!(
        "list-length d=1; doubling fails d<=3; compose-with-identity d'=1; composition {}->{} passes",
        composed.degree_d,
        composed.degree_dprime.unwrap()
    ))
}

/// Everything a run reports: probe reports, profiles and transcript output.
fn full_report() -> String {
    let mut out = String::new();
    let config = ProbeConfig::default();
    for family in ["list-length", "compose-with-identity", "identity-compose", "composed-transforms", "monoid-operation"] {
        out += &probe(family, &config).map(|r| r.to_string()).unwrap_or_else(|e| e);
    }
    out += &probe("doubling", &ProbeConfig { degree_max: 3, ..config }).map(|r| r.to_string()).unwrap_or_else(|e| e);
    for program in ["genmul-driver", "make-package", "monoid", "kz1-face"] {
        let mut interp = Interpreter::new();
        let v = interp.eval_source(&std::fs::read_to_string(program_path(program)).unwrap());
        out += &format!("{v:?}\n{}", interp.counters().report());
    }
    for path in session_paths().unwrap() {
        let case = load_transcript(&path).unwrap();
        let mut interp = Interpreter::new();
        for step in &case.steps {
            out += &closurevm::corpus::transcript::repl_lines(&mut interp, &step.input).join("\n");
        }
        out += &interp.counters().report();
    }
    out
}

fn binary_probe(family: &str) -> Vec<u8> {
    let out = Command::new(env!("CARGO_BIN_EXE_closurevm")).args(["probe", family, "--seed", "42"]).output().unwrap();
    out.stdout
}

fn determinism() -> Result<String, String> {
    let (a, b) = (full_report(), full_report());
    if a != b {
        return Err("in-process reports differ".into());
    }
    for family in ["list-length", "compose-with-identity"] {
        if binary_probe(family) != binary_probe(family) {
            return Err(format!("binary probe {family} differs between runs"));
        }
    }
    Ok(format!("{} report bytes identical across runs", a.len()))
}

fn main() {
    assert!(Path::new(&closurevm::corpus::corpus_dir()).is_dir(), "corpus directory not found");
    type Criterion = (&'static str, Duration, fn() -> Result<String, String>);
    let criteria: [Criterion; 7] = [
        ("1 transcript reproduction", Duration::from_secs(1), transcripts),
        ("2 constant closure-generation cost", Duration::from_secs(1), constant_generation_cost),
        ("3 capture decision", Duration::from_secs(30), capture_decision),
        ("4 K(Z,1) face oracle", Duration::from_secs(5), kz1),
        ("5 monoid bifunctor laws", Duration::from_secs(5), monoid_laws),
        ("6 polynomiality probe", Duration::from_secs(30), polynomiality),
        ("7 determinism", Duration::from_secs(120), determinism),
    ];
    let mut failed = 0;
    for (name, limit, check) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p.downcast_ref::<String>().cloned().or(p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_default())
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > limit => Err(format!("{detail}; took {elapsed:?}, limit {limit:?}")),
            other => other,
        };
        match outcome {
            Ok(detail) => println!("PASS criterion {name}: {detail} ({elapsed:.2?})"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {name}: {detail} ({elapsed:.2?})");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
