use closurevm::corpus::session_paths;
use closurevm::corpus::transcript::{load_transcript, run_transcript};
use closurevm::Interpreter;

#[test]
fn every_session_reproduces() {
    let paths = session_paths().unwrap();
    assert_eq!(paths.len(), 8);
    for path in paths {
        let case = load_transcript(&path).unwrap();
        if let Err(m) = run_transcript(&case, &mut Interpreter::new()) {
            panic!("{}: {m}", path.display());
        }
    }
}

#[test]
fn make_package_values_in_order() {
    let path = session_paths().unwrap().into_iter().find(|p| p.ends_with("09-make-package.txt")).unwrap();
    let case = load_transcript(&path).unwrap();
    let numbers: Vec<&str> = case.steps[3..].iter().map(|s| s.expected.as_str()).collect();
    assert_eq!(numbers, ["-25", "6", "-30", "-90", "19", "-95", "7", "-35"]);
    assert_eq!(run_transcript(&case, &mut Interpreter::new()), Ok(()));
}

#[test]
fn corrupted_value_is_the_first_mismatch() {
    let path = session_paths().unwrap().into_iter().find(|p| p.ends_with("07-genmul.txt")).unwrap();
    let mut case = load_transcript(&path).unwrap();
    let step = case.steps.iter().position(|s| s.expected == "45").unwrap();
    case.steps[step].expected = "46".into();
    let m = run_transcript(&case, &mut Interpreter::new()).unwrap_err();
    assert_eq!((m.step, m.actual.as_str()), (step + 1, "45"));
}
