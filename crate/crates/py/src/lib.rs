//! Python bindings for the closurevm interpreter, meter and probe.

use std::collections::BTreeMap;
use std::path::PathBuf;

use closurevm::corpus::kz1::{face_kz1 as face, Simplex};
use closurevm::corpus::transcript::{load_transcript, repl_lines, run_transcript};
use closurevm::probe::{self, family_path, run_family, Family, ProbeConfig, Sample};
use closurevm::{FunctionKind, Value};
use num_rational::BigRational;
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

fn fraction<'py>(py: Python<'py>, r: &BigRational) -> PyResult<Bound<'py, PyAny>> {
    py.import("fractions")?.getattr("Fraction")?.call1((r.to_string(),))
}

fn samples(pairs: Vec<(u64, u64)>) -> Vec<Sample> {
    pairs.into_iter().map(|(sigma, tau)| Sample { sigma, tau }).collect()
}

/// One interpreter session. Not shareable across threads.
#[pyclass(unsendable, name = "Interpreter")]
pub struct PyInterpreter {
    inner: closurevm::Interpreter,
}

#[pymethods]
impl PyInterpreter {
    #[new]
    #[pyo3(signature = (depth_limit = closurevm::machine::DEFAULT_DEPTH_LIMIT))]
    fn new(depth_limit: usize) -> Self {
        PyInterpreter { inner: closurevm::Interpreter::with_depth_limit(depth_limit) }
    }

    /// Evaluates every form in `source` and returns the last value printed.
    fn eval(&mut self, source: &str) -> PyResult<String> {
        self.inner.eval_source(source).map(|v| v.to_string()).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    /// The lines a REPL would show for `source`, errors included.
    fn repl(&mut self, source: &str) -> Vec<String> {
        repl_lines(&mut self.inner, source)
    }

    /// Drains pending `print` output.
    fn output(&mut self) -> Vec<String> {
        self.inner.take_output()
    }

    fn counters(&self) -> BTreeMap<&'static str, u64> {
        self.inner.counters().scalars().into_iter().collect()
    }

    fn report(&self) -> String {
        self.inner.counters().report()
    }

    /// "ordinary" or "closure" for a global function, None otherwise.
    fn kind(&self, name: &str) -> Option<&'static str> {
        match self.inner.global(name)? {
            Value::Function(f) => Some(match f.kind {
                FunctionKind::Ordinary => "ordinary",
                FunctionKind::Closure => "closure",
            }),
            _ => None,
        }
    }
}

#[pyfunction]
fn face_kz1(entries: Vec<i64>, i: usize) -> PyResult<Vec<i64>> {
    face(&Simplex::new(entries), i).map(|s| s.entries().to_vec()).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Replays a transcript file; returns (passed, message).
#[pyfunction]
fn check_transcript(path: PathBuf) -> PyResult<(bool, String)> {
    let case = load_transcript(&path).map_err(|e| PyIOError::new_err(e.to_string()))?;
    Ok(match run_transcript(&case, &mut closurevm::Interpreter::new()) {
        Ok(()) => (true, format!("{} steps", case.steps.len())),
        Err(m) => (false, m.to_string()),
    })
}

/// Runs a probe family (path or corpus name); returns (passed, report).
#[pyfunction]
#[pyo3(signature = (family, seed = 42, degree_max = 4, chi_degree_max = 3, sizes = None, samples_per_size = None))]
fn probe_family(
    family: &str,
    seed: u64,
    degree_max: u32,
    chi_degree_max: u32,
    sizes: Option<&str>,
    samples_per_size: Option<usize>,
) -> PyResult<(bool, String)> {
    let sizes = sizes.map(str::parse).transpose().map_err(|e: probe::ProbeError| PyValueError::new_err(e.to_string()))?;
    let config = ProbeConfig { seed, degree_max, chi_degree_max, sizes, samples_per_size, ..ProbeConfig::default() };
    let report = Family::load(&family_path(family))
        .and_then(|f| run_family(&f, &config))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok((report.passed(), report.to_string()))
}

/// Least c with tau <= c(1+sigma)^d over (sigma, tau) pairs, as a Fraction.
#[pyfunction]
fn min_coefficient(py: Python<'_>, pairs: Vec<(u64, u64)>, d: u32) -> PyResult<Bound<'_, PyAny>> {
    let c = probe::min_coefficient(&samples(pairs), d).map_err(|e| PyValueError::new_err(e.to_string()))?;
    fraction(py, &c)
}

/// Whether every pair satisfies tau <= c(1+sigma)^d. `c` is a "p/q" or integer string.
#[pyfunction]
fn check_membership(pairs: Vec<(u64, u64)>, c: &str, d: u32) -> PyResult<bool> {
    let c: BigRational = c.trim().parse().map_err(|_| PyValueError::new_err(format!("bad rational {c:?}")))?;
    Ok(probe::check_membership(&samples(pairs), &c, d))
}

#[pymodule]
fn closurevm_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInterpreter>()?;
    m.add_function(wrap_pyfunction!(face_kz1, m)?)?;
    m.add_function(wrap_pyfunction!(check_transcript, m)?)?;
    m.add_function(wrap_pyfunction!(probe_family, m)?)?;
    m.add_function(wrap_pyfunction!(min_coefficient, m)?)?;
    m.add_function(wrap_pyfunction!(check_membership, m)?)?;
    Ok(())
}
