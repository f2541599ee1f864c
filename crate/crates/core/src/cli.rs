//! Command-line front end. Exit codes: 0 success or pass, 1 a transcript
//! mismatch or failed probe, 2 usage, parse or runtime errors.

use std::io::{BufRead, Write};
use std::path::PathBuf;

use clap::{Parser, Subcommand};

use crate::corpus::session_paths;
use crate::corpus::transcript::{load_transcript, repl_lines, run_transcript};
use crate::eval::Interpreter;
use crate::machine::DEFAULT_DEPTH_LIMIT;
use crate::probe::{family_path, run_family, Family, ProbeConfig, SizeLadder};
use crate::reader::paren_balance;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAIL: i32 = 1;
pub const EXIT_ERROR: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "closurevm", version, about = "Metered interpreter for a small Lisp with explicit closures")]
pub struct Cli {
    /// Seed for generated probe inputs.
    #[arg(long, global = true, default_value_t = 42)]
    pub seed: u64,
    /// Largest degree tried when searching for a polynomial bound.
    #[arg(long, global = true, default_value_t = 4)]
    pub degree_max: u32,
    /// Largest exponent tried for the coefficient envelope.
    #[arg(long, global = true, default_value_t = 3)]
    pub chi_degree_max: u32,
    /// Size ladder START..END (doubling). Defaults to the family's, else 2..256.
    #[arg(long, global = true)]
    pub sizes: Option<SizeLadder>,
    /// Inputs per ladder rung. Defaults to the family's, else 8.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub samples_per_size: Option<u64>,
    /// Maximum number of activation records.
    #[arg(long, global = true, default_value_t = DEFAULT_DEPTH_LIMIT as u64, value_parser = clap::value_parser!(u64).range(1..))]
    pub depth_limit: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Interactive read-eval-print loop.
    Repl,
    /// Evaluate a program; print its `print` output and final value.
    Run { file: PathBuf },
    /// Replay transcripts (all corpus sessions when none are given).
    CheckTranscript { files: Vec<PathBuf> },
    /// Run a program and print its cost counters.
    Profile { file: PathBuf },
    /// Probe a family file (a path, or a name under the corpus families).
    Probe { family: String },
}

impl Cli {
    pub fn probe_config(&self) -> ProbeConfig {
        ProbeConfig {
            seed: self.seed,
            degree_max: self.degree_max,
            chi_degree_max: self.chi_degree_max,
            sizes: self.sizes,
            samples_per_size: self.samples_per_size.map(|n| n as usize),
            depth_limit: self.depth_limit as usize,
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with<I, T>(args: I, input: &mut dyn BufRead, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = write!(err, "{}", e.render());
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    let depth = cli.depth_limit as usize;
    let result = match &cli.command {
        Command::Repl => repl(depth, input, out),
        Command::Run { file } => run(file, depth, out, err),
        Command::CheckTranscript { files } => check_transcripts(files, depth, out, err),
        Command::Profile { file } => profile(file, depth, out, err),
        Command::Probe { family } => probe(family, &cli.probe_config(), out, err),
    };
    result.unwrap_or_else(|e| {
        let _ = writeln!(err, "error: {e}");
        EXIT_ERROR
    })
}

pub fn repl(depth_limit: usize, input: &mut dyn BufRead, out: &mut dyn Write) -> std::io::Result<i32> {
    let mut interp = Interpreter::with_depth_limit(depth_limit);
    let mut pending = String::new();
    write!(out, "> ")?;
    out.flush()?;
    let mut line = String::new();
    loop {
        line.clear();
        if input.read_line(&mut line)? == 0 {
            writeln!(out)?;
            return Ok(EXIT_OK);
        }
        pending.push_str(&line);
        // Strings never span lines, so an open string ends the input too.
        let complete = paren_balance(&pending).is_none_or(|d| d <= 0);
        if !complete {
            continue;
        }
        if !pending.trim().is_empty() {
            for l in repl_lines(&mut interp, &pending) {
                writeln!(out, "{l}")?;
            }
        }
        pending.clear();
        write!(out, "> ")?;
        out.flush()?;
    }
}

fn read_file(path: &PathBuf) -> std::io::Result<String> {
    std::fs::read_to_string(path).map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
}

/// Evaluates every form, echoing `print` output as it happens.
fn run_program(interp: &mut Interpreter, src: &str, out: &mut dyn Write) -> std::io::Result<Result<Option<String>, String>> {
    let forms = match crate::reader::read(src) {
        Ok(forms) => forms,
        Err(e) => return Ok(Err(format!("read error at {e}"))),
    };
    let mut last = None;
    for form in &forms {
        let result = interp.eval_form(form);
        for l in interp.take_output() {
            writeln!(out, "{l}")?;
        }
        match result {
            Ok(v) => last = Some(v.to_string()),
            Err(e) => return Ok(Err(e.to_string())),
        }
    }
    Ok(Ok(last))
}

pub fn run(file: &PathBuf, depth_limit: usize, out: &mut dyn Write, err: &mut dyn Write) -> std::io::Result<i32> {
    let src = read_file(file)?;
    let mut interp = Interpreter::with_depth_limit(depth_limit);
    match run_program(&mut interp, &src, out)? {
        Ok(last) => {
            if let Some(v) = last {
                writeln!(out, "{v}")?;
            }
            Ok(EXIT_OK)
        }
        Err(e) => {
            writeln!(err, "{}: {e}", file.display())?;
            Ok(EXIT_ERROR)
        }
    }
}

pub fn profile(file: &PathBuf, depth_limit: usize, out: &mut dyn Write, err: &mut dyn Write) -> std::io::Result<i32> {
    let src = read_file(file)?;
    let mut interp = Interpreter::with_depth_limit(depth_limit);
    let mut sink = std::io::sink();
    match run_program(&mut interp, &src, &mut sink)? {
        Ok(_) => {
            write!(out, "{}", interp.counters().report())?;
            writeln!(out, "max_depth={}", interp.machine().max_depth())?;
            Ok(EXIT_OK)
        }
        Err(e) => {
            writeln!(err, "{}: {e}", file.display())?;
            Ok(EXIT_ERROR)
        }
    }
}

pub fn check_transcripts(files: &[PathBuf], depth_limit: usize, out: &mut dyn Write, err: &mut dyn Write) -> std::io::Result<i32> {
    let files = if files.is_empty() { session_paths()? } else { files.to_vec() };
    let mut code = EXIT_OK;
    for path in &files {
        let case = match load_transcript(path) {
            Ok(case) => case,
            Err(e) => {
                writeln!(err, "error: {e}")?;
                code = EXIT_ERROR;
                continue;
            }
        };
        match run_transcript(&case, &mut Interpreter::with_depth_limit(depth_limit)) {
            Ok(()) => writeln!(out, "PASS {} ({} steps)", path.display(), case.steps.len())?,
            Err(m) => {
                writeln!(out, "FAIL {}", path.display())?;
                writeln!(out, "{m}")?;
                if code == EXIT_OK {
                    code = EXIT_FAIL;
                }
            }
        }
    }
    Ok(code)
}

pub fn probe(family: &str, config: &ProbeConfig, out: &mut dyn Write, err: &mut dyn Write) -> std::io::Result<i32> {
    let report = Family::load(&family_path(family)).and_then(|f| run_family(&f, config));
    match report {
        Ok(report) => {
            write!(out, "{report}")?;
            Ok(if report.passed() { EXIT_OK } else { EXIT_FAIL })
        }
        Err(e) => {
            writeln!(err, "error: {e}")?;
            Ok(EXIT_ERROR)
        }
    }
}
