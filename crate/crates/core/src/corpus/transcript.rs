//! Golden transcripts: `> ` starts an input (continued until its parentheses
//! balance), the lines after it up to the next input are the expected output.
//! `#<Function _>` and `#<Closure _>` match any print id.

use std::fmt;
use std::path::Path;

use regex::Regex;
use thiserror::Error;

use crate::eval::Interpreter;
use crate::reader::{paren_balance, read};

const PROMPT: &str = "> ";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptStep {
    pub input: String,
    pub expected: String,
    /// Line of the `> ` prompt, 1-based.
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptCase {
    pub name: String,
    pub steps: Vec<TranscriptStep>,
}

#[derive(Debug, Error)]
pub enum TranscriptError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{name}:{line}: {reason}")]
    Format { name: String, line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mismatch {
    /// 1-based step index.
    pub step: usize,
    pub line: usize,
    pub input: String,
    pub expected: String,
    pub actual: String,
}

impl fmt::Display for Mismatch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "step {} (line {}): {}", self.step, self.line, self.input)?;
        writeln!(f, "  expected: {}", self.expected.replace('\n', "\n            "))?;
        write!(f, "  actual:   {}", self.actual.replace('\n', "\n            "))
    }
}

pub fn load_transcript(path: &Path) -> Result<TranscriptCase, TranscriptError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| TranscriptError::Io { path: path.display().to_string(), source })?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    parse_transcript(&name, &text)
}

pub fn parse_transcript(name: &str, text: &str) -> Result<TranscriptCase, TranscriptError> {
    let format_error = |line: usize, reason: &str| TranscriptError::Format {
        name: name.to_string(),
        line,
        reason: reason.to_string(),
    };
    let lines: Vec<&str> = text.lines().collect();
    let mut steps = Vec::new();
    let mut i = 0;
    while i < lines.len() && lines[i].trim().is_empty() {
        i += 1;
    }
    while i < lines.len() {
        let Some(first) = lines[i].strip_prefix(PROMPT) else {
            return Err(format_error(i + 1, "expected an input line starting with '> '"));
        };
        let line = i + 1;
        let mut input = first.to_string();
        i += 1;
        loop {
            match paren_balance(&input) {
                Some(d) if d < 0 => return Err(format_error(line, "input has an unmatched ')'")),
                Some(0) | None => break,
                _ if i >= lines.len() || lines[i].starts_with(PROMPT) => {
                    return Err(format_error(line, "input ends with unbalanced parentheses"));
                }
                _ => {
                    input.push('\n');
                    input.push_str(lines[i]);
                    i += 1;
                }
            }
        }
        let mut expected = Vec::new();
        while i < lines.len() && !lines[i].starts_with(PROMPT) {
            expected.push(lines[i]);
            i += 1;
        }
        while expected.last().is_some_and(|l| l.trim().is_empty()) {
            expected.pop();
        }
        steps.push(TranscriptStep { input, expected: expected.join("\n"), line });
    }
    Ok(TranscriptCase { name: name.to_string(), steps })
}

/// Output lines for one REPL input: `print` output, then each form's value,
/// or a single `error: ...` line that ends the input.
pub fn repl_lines(interp: &mut Interpreter, input: &str) -> Vec<String> {
    let forms = match read(input) {
        Ok(forms) => forms,
        Err(e) => return vec![format!("error: read error at {e}")],
    };
    let mut out = Vec::new();
    for form in &forms {
        let result = interp.eval_form(form);
        out.extend(interp.take_output());
        match result {
            Ok(v) => out.push(v.to_string()),
            Err(e) => {
                out.push(format!("error: {e}"));
                break;
            }
        }
    }
    out
}

/// Compiles an expected block into an anchored regex.
pub fn expected_pattern(expected: &str) -> Regex {
    let wildcard = Regex::new(r"#<(Function|Closure) _>").expect("static regex");
    let mut pattern = String::from("^");
    let mut last = 0;
    for m in wildcard.captures_iter(expected) {
        let whole = m.get(0).expect("group 0");
        pattern.push_str(&regex::escape(&expected[last..whole.start()]));
        pattern.push_str(&format!("#<{} [0-9]+>", &m[1]));
        last = whole.end();
    }
    pattern.push_str(&regex::escape(&expected[last..]));
    pattern.push('$');
    Regex::new(&pattern).expect("escaped pattern is valid")
}

pub fn matches_expected(expected: &str, actual: &str) -> bool {
    expected_pattern(expected).is_match(actual)
}

/// Runs every step in one interpreter, stopping at the first mismatch.
pub fn run_transcript(case: &TranscriptCase, interp: &mut Interpreter) -> Result<(), Mismatch> {
    for (k, step) in case.steps.iter().enumerate() {
        let actual = repl_lines(interp, &step.input).join("\n");
        if !matches_expected(&step.expected, &actual) {
            return Err(Mismatch {
                step: k + 1,
                line: step.line,
                input: step.input.clone(),
                expected: step.expected.clone(),
                actual,
            });
        }
    }
    Ok(())
}
