//! Empirical polynomial-time probe.
//!
//! A function f is sampled on seeded inputs laid out on a doubling size
//! ladder. Each sample is (σ, τ): the input size and the number of
//! evaluation steps of exactly one call. f is *in P^d_c on the sample* when
//! τ ≤ c(1+σ)^d holds for every sample. Because a finite sample always fits
//! some c, membership is validated out of sample: c is fitted on the lower
//! half of the ladder and checked on the upper half.
//!
//! A transform α of functions is probed over a family f_1..f_k: each
//! α(f_i) must share one output degree d', and its coefficient must be
//! bounded by χ(c_i) for a fitted envelope χ(c) = a·c^e + b, again checked
//! on held-out members. All of this can only refute a polynomial bound on
//! the sampled inputs, never prove one.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, RandBigInt};
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::eval::Interpreter;
use crate::machine::DEFAULT_DEPTH_LIMIT;
use crate::model::Value;
use crate::reader::{read, Node, SExpr};

pub const REPORT_HEADER: &str =
    "# empirical probe: sampled inputs can refute a polynomial bound but never prove one";

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ProbeError {
    #[error("multiple values have no size")]
    BundleSize,
    #[error("no samples")]
    EmptySamples,
    #[error("member {member}: {message}")]
    Eval { member: String, message: String },
    #[error("member {member}: transform returned {value}, not a function")]
    NotAFunction { member: String, value: String },
    #[error("{file}:{line}: {reason}")]
    Family { file: String, line: usize, reason: String },
    #[error("{0}")]
    Io(String),
    #[error("bad size ladder {0:?}: expected START..END with 1 ≤ START ≤ END")]
    Ladder(String),
    #[error("bad shape {0}")]
    Shape(String),
}

// ------------------------------------------------------------------- sizes

/// σ: integers weigh 1 + bit length, strings 1 + length, lists 1 + the sum
/// of their elements, everything else 1.
pub fn size_of(v: &Value) -> Result<u64, ProbeError> {
    Ok(match v {
        Value::Integer(n) => 1 + n.bits(),
        Value::Str(s) => 1 + s.chars().count() as u64,
        Value::List(items) => {
            let mut total = 1;
            for item in items.iter() {
                total += size_of(item)?;
            }
            total
        }
        Value::Function(_) | Value::Builtin(_) | Value::Symbol(_) => 1,
        Value::Bundle(_) => return Err(ProbeError::BundleSize),
    })
}

/// Size of an argument vector: the argument itself for unary calls, the
/// argument list otherwise.
pub fn args_size(args: &[Value]) -> Result<u64, ProbeError> {
    match args {
        [single] => size_of(single),
        _ => args.iter().try_fold(1, |acc, a| Ok(acc + size_of(a)?)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Sample {
    pub sigma: u64,
    pub tau: u64,
}

/// Calls `f` once and returns its size/steps sample.
pub fn measure(interp: &mut Interpreter, f: &Value, args: Vec<Value>) -> Result<Sample, crate::error::EvalError> {
    let sigma = args_size(&args).map_err(|e| crate::error::EvalError::Internal(e.to_string()))?;
    let before = interp.counters().eval_steps;
    interp.call(f, args)?;
    Ok(Sample { sigma, tau: interp.counters().eval_steps - before })
}

fn ratio(tau: u64, sigma: u64, d: u32) -> BigRational {
    let denom = num_traits::pow(BigInt::from(sigma) + 1, d as usize);
    BigRational::new(BigInt::from(tau), denom)
}

/// The least c with τ ≤ c(1+σ)^d on every sample.
pub fn min_coefficient(samples: &[Sample], d: u32) -> Result<BigRational, ProbeError> {
    samples.iter().map(|s| ratio(s.tau, s.sigma, d)).max().ok_or(ProbeError::EmptySamples)
}

pub fn check_membership(samples: &[Sample], c: &BigRational, d: u32) -> bool {
    samples.iter().all(|s| BigRational::from_integer(BigInt::from(s.tau)) <= c * num_traits::pow(BigRational::from_integer(BigInt::from(s.sigma) + 1), d as usize))
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PolyMembership {
    pub degree: u32,
    pub coefficient: BigRational,
    pub witnessed: bool,
}

/// Samples grouped by ladder rung, smallest rung first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LadderSamples {
    pub rungs: Vec<Vec<Sample>>,
}

impl LadderSamples {
    pub fn all(&self) -> Vec<Sample> {
        self.rungs.concat()
    }

    /// The first ⌈R/2⌉ rungs train, the rest are held out.
    pub fn split(&self) -> (Vec<Sample>, Vec<Sample>) {
        let cut = self.rungs.len().div_ceil(2);
        (self.rungs[..cut].concat(), self.rungs[cut..].concat())
    }

    /// Fits c on the training rungs at degree d and checks it on the rest.
    pub fn held_out(&self, d: u32) -> Result<PolyMembership, ProbeError> {
        let (train, test) = self.split();
        let coefficient = min_coefficient(&train, d)?;
        let witnessed = check_membership(&test, &coefficient, d);
        Ok(PolyMembership { degree: d, coefficient, witnessed })
    }
}

// --------------------------------------------------------------- envelope

/// χ(c) = a·c^e + b.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Chi {
    pub a: BigRational,
    pub e: u32,
    pub b: BigRational,
}

impl Chi {
    pub fn eval(&self, c: &BigRational) -> BigRational {
        &self.a * num_traits::pow(c.clone(), self.e as usize) + &self.b
    }
}

impl fmt::Display for Chi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}*c^{}+{}", self.a, self.e, self.b)
    }
}

/// Fits the smallest-exponent envelope on the half of the (c_in, c_out)
/// pairs with the smaller c_in and requires it to hold on the other half.
///
/// For a fixed e, with X = c_in^e, the slope a is the steepest rise from the
/// training point of least X and b the largest residual above a·X.
pub fn fit_chi(pairs: &[(BigRational, BigRational)], chi_degree_max: u32) -> Option<Chi> {
    if pairs.is_empty() {
        return None;
    }
    let mut sorted = pairs.to_vec();
    sorted.sort_by(|x, y| x.0.cmp(&y.0));
    let cut = sorted.len().div_ceil(2);
    let train = &sorted[..cut];
    (0..=chi_degree_max).find_map(|e| {
        let x_of = |c: &BigRational| num_traits::pow(c.clone(), e as usize);
        let (x0, y0) = (x_of(&train[0].0), &train[0].1);
        let zero = BigRational::zero();
        let a = train
            .iter()
            .filter_map(|(c, y)| {
                let x = x_of(c);
                (x > x0).then(|| (y - y0) / (x - &x0))
            })
            .fold(zero.clone(), |m, s| if s > m { s } else { m });
        let b = train.iter().map(|(c, y)| y - &a * x_of(c)).fold(zero, |m, r| if r > m { r } else { m });
        let chi = Chi { a, e, b };
        sorted.iter().all(|(c, y)| *y <= chi.eval(c)).then_some(chi)
    })
}

// ----------------------------------------------------------------- config

/// Doubling ladder START, 2·START, ... up to END, with END itself appended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SizeLadder {
    pub start: u64,
    pub end: u64,
}

impl Default for SizeLadder {
    fn default() -> Self {
        SizeLadder { start: 2, end: 256 }
    }
}

impl SizeLadder {
    pub fn sizes(&self) -> Vec<u64> {
        let mut out = Vec::new();
        let mut s = self.start;
        while s <= self.end {
            out.push(s);
            s = s.saturating_mul(2);
        }
        if out.last() != Some(&self.end) {
            out.push(self.end);
        }
        out
    }
}

impl FromStr for SizeLadder {
    type Err = ProbeError;

    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let bad = || ProbeError::Ladder(text.to_string());
        let (a, b) = text.split_once("..").ok_or_else(bad)?;
        let (start, end) = (a.trim().parse::<u64>().map_err(|_| bad())?, b.trim().parse::<u64>().map_err(|_| bad())?);
        if start == 0 || end < start {
            return Err(bad());
        }
        Ok(SizeLadder { start, end })
    }
}

impl fmt::Display for SizeLadder {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.start, self.end)
    }
}

/// Command-line overrides; `None` defers to the family file, then to the
/// built-in default.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ProbeConfig {
    pub seed: u64,
    pub degree_max: u32,
    pub chi_degree_max: u32,
    pub sizes: Option<SizeLadder>,
    pub samples_per_size: Option<usize>,
    pub depth_limit: usize,
}

impl Default for ProbeConfig {
    fn default() -> Self {
        ProbeConfig {
            seed: 42,
            degree_max: 4,
            chi_degree_max: 3,
            sizes: None,
            samples_per_size: None,
            depth_limit: DEFAULT_DEPTH_LIMIT,
        }
    }
}

pub const DEFAULT_SAMPLES_PER_SIZE: usize = 8;

// ----------------------------------------------------------------- shapes

/// Input generators. Every shape is asked for a target size; the size
/// actually used is measured afterwards.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Shape {
    /// Natural number with bit length size − 1.
    Int,
    /// Always 0.
    Zero,
    /// Lowercase string of length size − 1.
    Str,
    /// Elements of random size in 1..=max until the budget is spent.
    List(Box<Shape>, u64),
    Pair(Box<Shape>, Box<Shape>),
    /// Several arguments sharing the budget.
    Args(usize, Box<Shape>),
}

/// Plain data that can cross threads; becomes a [`Value`] per instance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Datum {
    Int(BigInt),
    Str(String),
    List(Vec<Datum>),
}

impl Datum {
    pub fn to_value(&self) -> Value {
        match self {
            Datum::Int(n) => Value::Integer(n.clone()),
            Datum::Str(s) => Value::str(s),
            Datum::List(items) => Value::list(items.iter().map(Datum::to_value)),
        }
    }
}

impl Shape {
    pub fn parse(text: &str) -> Result<Shape, ProbeError> {
        let forms = read(text).map_err(|e| ProbeError::Shape(format!("{text}: {e}")))?;
        match forms.as_slice() {
            [one] => Shape::from_form(one),
            _ => Err(ProbeError::Shape(text.to_string())),
        }
    }

    fn from_form(form: &SExpr) -> Result<Shape, ProbeError> {
        let bad = || ProbeError::Shape(form.to_string());
        let count = |f: &SExpr| match &f.node {
            Node::Integer(n) => u64::try_from(n).ok().filter(|&k| k >= 1).ok_or_else(bad),
            _ => Err(bad()),
        };
        if let Some(name) = form.as_symbol() {
            return match name {
                "int" => Ok(Shape::Int),
                "zero" => Ok(Shape::Zero),
                "str" => Ok(Shape::Str),
                _ => Err(bad()),
            };
        }
        let items = form.as_list().ok_or_else(bad)?;
        match (items.first().and_then(SExpr::as_symbol), &items[1.min(items.len())..]) {
            (Some("list"), [elem, max]) => Ok(Shape::List(Box::new(Shape::from_form(elem)?), count(max)?)),
            (Some("pair"), [elem]) => {
                let s = Shape::from_form(elem)?;
                Ok(Shape::Pair(Box::new(s.clone()), Box::new(s)))
            }
            (Some("pair"), [a, b]) => Ok(Shape::Pair(Box::new(Shape::from_form(a)?), Box::new(Shape::from_form(b)?))),
            (Some("args"), [n, elem]) => Ok(Shape::Args(count(n)? as usize, Box::new(Shape::from_form(elem)?))),
            _ => Err(bad()),
        }
    }

    /// Builds call arguments of roughly `size`.
    pub fn arguments(&self, size: u64, rng: &mut ChaCha8Rng) -> Vec<Datum> {
        match self {
            Shape::Args(n, elem) => {
                let each = (size.saturating_sub(1) / *n as u64).max(1);
                (0..*n).map(|_| elem.datum(each, rng)).collect()
            }
            other => vec![other.datum(size, rng)],
        }
    }

    fn datum(&self, size: u64, rng: &mut ChaCha8Rng) -> Datum {
        let size = size.max(1);
        match self {
            Shape::Int => {
                let bits = size - 1;
                if bits == 0 {
                    return Datum::Int(BigInt::zero());
                }
                let top = BigUint::one() << (bits - 1);
                let low = rng.gen_biguint(bits - 1);
                Datum::Int(BigInt::from(top + low))
            }
            Shape::Zero => Datum::Int(BigInt::zero()),
            Shape::Str => Datum::Str((1..size).map(|_| rng.gen_range(b'a'..=b'z') as char).collect()),
            Shape::List(elem, max) => {
                let mut budget = size - 1;
                let mut items = Vec::new();
                while budget > 0 {
                    let target = rng.gen_range(1..=(*max).min(budget));
                    let d = elem.datum(target, rng);
                    budget = budget.saturating_sub(datum_size(&d));
                    items.push(d);
                }
                Datum::List(items)
            }
            Shape::Pair(a, b) => {
                let rest = size.saturating_sub(1);
                let left = (rest / 2).max(1);
                let right = rest.saturating_sub(left).max(1);
                Datum::List(vec![a.datum(left, rng), b.datum(right, rng)])
            }
            Shape::Args(n, elem) => {
                let each = (size.saturating_sub(1) / *n as u64).max(1);
                Datum::List((0..*n).map(|_| elem.datum(each, rng)).collect())
            }
        }
    }
}

fn datum_size(d: &Datum) -> u64 {
    match d {
        Datum::Int(n) => 1 + n.bits(),
        Datum::Str(s) => 1 + s.chars().count() as u64,
        Datum::List(items) => 1 + items.iter().map(datum_size).sum::<u64>(),
    }
}

// ---------------------------------------------------------------- families

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Member {
    pub label: String,
    pub expr: String,
    pub input: Shape,
    /// Shape of the inputs fed to the transformed member.
    pub output_input: Shape,
}

/// A probe family: programs to load, members, and optionally a transform.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Family {
    pub name: String,
    /// Source text of every loaded program, in load order.
    pub programs: Vec<String>,
    pub members: Vec<Member>,
    pub transform: Option<String>,
    pub degree: u32,
    pub sizes: Option<SizeLadder>,
    pub samples_per_size: Option<usize>,
}

impl Family {
    /// Parses a family file. Directives, one per line (`;` starts a comment):
    ///
    /// ```text
    /// load <program>            corpus program name, or a path ending in .fl
    /// input <shape>             shape for the members that follow
    /// output-input <shape>      shape for the transformed members that follow
    /// member <label> <expr>
    /// transform <expr>          function from functions to functions
    /// degree <d>                input degree for transforms (default 1)
    /// sizes <start>..<end>
    /// samples-per-size <n>
    /// ```
    pub fn parse(name: &str, text: &str, base: &Path) -> Result<Family, ProbeError> {
        let mut family = Family {
            name: name.to_string(),
            programs: Vec::new(),
            members: Vec::new(),
            transform: None,
            degree: 1,
            sizes: None,
            samples_per_size: None,
        };
        let mut input: Option<Shape> = None;
        let mut output_input: Option<Shape> = None;
        for (k, raw) in text.lines().enumerate() {
            let err = |reason: String| ProbeError::Family { file: name.to_string(), line: k + 1, reason };
            let line = raw.trim();
            if line.is_empty() || line.starts_with(';') {
                continue;
            }
            let (directive, rest) = line.split_once(char::is_whitespace).unwrap_or((line, ""));
            let rest = rest.trim();
            match directive {
                "load" => {
                    let path = if rest.ends_with(".fl") { base.join(rest) } else { crate::corpus::program_path(rest) };
                    let text = std::fs::read_to_string(&path).map_err(|e| err(format!("{}: {e}", path.display())))?;
                    family.programs.push(text);
                }
                "input" => input = Some(Shape::parse(rest).map_err(|e| err(e.to_string()))?),
                "output-input" => output_input = Some(Shape::parse(rest).map_err(|e| err(e.to_string()))?),
                "member" => {
                    let (label, expr) = rest.split_once(char::is_whitespace).ok_or_else(|| err("member needs a label and an expression".into()))?;
                    let input = input.clone().ok_or_else(|| err("member before any input directive".into()))?;
                    family.members.push(Member {
                        label: label.to_string(),
                        expr: expr.trim().to_string(),
                        output_input: output_input.clone().unwrap_or_else(|| input.clone()),
                        input,
                    });
                }
                "transform" => family.transform = Some(rest.to_string()),
                "degree" => family.degree = rest.parse().map_err(|_| err(format!("bad degree {rest:?}")))?,
                "sizes" => family.sizes = Some(rest.parse().map_err(|e: ProbeError| err(e.to_string()))?),
                "samples-per-size" => {
                    family.samples_per_size = Some(rest.parse().ok().filter(|&n| n > 0).ok_or_else(|| err(format!("bad count {rest:?}")))?)
                }
                other => return Err(err(format!("unknown directive {other:?}"))),
            }
        }
        if family.members.is_empty() {
            return Err(ProbeError::Family { file: name.to_string(), line: 0, reason: "no members".into() });
        }
        Ok(family)
    }

    pub fn load(path: &Path) -> Result<Family, ProbeError> {
        let text = std::fs::read_to_string(path).map_err(|e| ProbeError::Io(format!("{}: {e}", path.display())))?;
        let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
        Family::parse(&name, &text, path.parent().unwrap_or(Path::new(".")))
    }
}

/// Family file lookup: a path as given, else `<corpus>/families/<name>.family`.
pub fn family_path(arg: &str) -> PathBuf {
    let direct = PathBuf::from(arg);
    if direct.exists() {
        return direct;
    }
    crate::corpus::corpus_dir().join("families").join(format!("{arg}.family"))
}

// ---------------------------------------------------------------- running

struct Plan<'a> {
    programs: &'a [String],
    depth_limit: usize,
}

impl Plan<'_> {
    fn instance(&self, member: &str) -> Result<Interpreter, ProbeError> {
        let mut interp = Interpreter::with_depth_limit(self.depth_limit);
        for p in self.programs {
            interp.eval_source(p).map_err(|e| ProbeError::Eval { member: member.into(), message: e.to_string() })?;
        }
        Ok(interp)
    }

    /// One sample in a fresh instance: build the member, optionally
    /// transform it, then time a single call.
    fn sample(&self, member: &Member, transform: Option<&str>, args: &[Datum]) -> Result<Sample, ProbeError> {
        let label = member.label.as_str();
        let eval_err = |e: &dyn fmt::Display| ProbeError::Eval { member: label.into(), message: e.to_string() };
        let mut interp = self.instance(label)?;
        let mut f = interp.eval_source(&member.expr).map_err(|e| eval_err(&e))?;
        if let Some(t) = transform {
            let alpha = interp.eval_source(t).map_err(|e| eval_err(&e))?;
            f = interp.call(&alpha, vec![f]).map_err(|e| eval_err(&e))?;
        }
        if !f.is_callable() {
            return Err(ProbeError::NotAFunction { member: label.into(), value: f.to_string() });
        }
        let args = args.iter().map(Datum::to_value).collect();
        measure(&mut interp, &f, args).map_err(|e| eval_err(&e))
    }
}

/// Seeded inputs for one member, one row per rung. The stream depends only
/// on the seed, the member index and the shape, so a transformed member
/// sees the same inputs as the original whenever the shapes agree.
fn inputs(shape: &Shape, seed: u64, index: usize, sizes: &[u64], per_size: usize) -> Vec<Vec<Vec<Datum>>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    sizes.iter().map(|&s| (0..per_size).map(|_| shape.arguments(s, &mut rng)).collect()).collect()
}

fn collect_samples(
    plan: &Plan,
    member: &Member,
    transform: Option<&str>,
    rows: &[Vec<Vec<Datum>>],
) -> Result<LadderSamples, ProbeError> {
    let rungs = rows
        .iter()
        .map(|row| row.par_iter().map(|args| plan.sample(member, transform, args)).collect::<Result<Vec<_>, _>>())
        .collect::<Result<Vec<_>, _>>()?;
    Ok(LadderSamples { rungs })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MemberMembership {
    pub label: String,
    pub fit: PolyMembership,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MembershipReport {
    pub family: String,
    pub sizes: Vec<u64>,
    pub seed: u64,
    pub samples_per_size: usize,
    /// Smallest degree at which every member passes its held-out check.
    pub degree: Option<u32>,
    pub members: Vec<MemberMembership>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HigherOrderMember {
    pub label: String,
    pub c_in: BigRational,
    /// Whether the member itself passed its held-out check at degree d.
    pub premise: bool,
    pub c_out: Option<BigRational>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HigherOrderReport {
    pub family: String,
    pub sizes: Vec<u64>,
    pub seed: u64,
    pub samples_per_size: usize,
    pub degree_d: u32,
    pub degree_dprime: Option<u32>,
    pub chi: Option<Chi>,
    pub members: Vec<HigherOrderMember>,
}

impl HigherOrderReport {
    pub fn passed(&self) -> bool {
        self.degree_dprime.is_some() && self.chi.is_some() && self.members.iter().all(|m| m.premise)
    }

    pub fn evidence(&self) -> Vec<(BigRational, BigRational)> {
        self.members.iter().filter_map(|m| Some((m.c_in.clone(), m.c_out.clone()?))).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ProbeReport {
    Membership(MembershipReport),
    HigherOrder(HigherOrderReport),
}

impl ProbeReport {
    pub fn passed(&self) -> bool {
        match self {
            ProbeReport::Membership(r) => r.degree.is_some(),
            ProbeReport::HigherOrder(r) => r.passed(),
        }
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "fail"
    }
}

fn header(f: &mut fmt::Formatter<'_>, family: &str, seed: u64, sizes: &[u64], per_size: usize) -> fmt::Result {
    writeln!(f, "{REPORT_HEADER}")?;
    let sizes: Vec<String> = sizes.iter().map(u64::to_string).collect();
    writeln!(f, "# family={family} seed={seed} sizes={} samples_per_size={per_size}", sizes.join(","))
}

impl fmt::Display for ProbeReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let opt = |d: Option<u32>| d.map_or("none".to_string(), |d| d.to_string());
        match self {
            ProbeReport::Membership(r) => {
                header(f, &r.family, r.seed, &r.sizes, r.samples_per_size)?;
                writeln!(f, "mode=membership")?;
                writeln!(f, "degree_d={}", opt(r.degree))?;
                writeln!(f, "verdict={}", verdict(self.passed()))?;
                for m in &r.members {
                    writeln!(f, "member={} c_in={} held_out={}", m.label, m.fit.coefficient, verdict(m.fit.witnessed))?;
                }
            }
            ProbeReport::HigherOrder(r) => {
                header(f, &r.family, r.seed, &r.sizes, r.samples_per_size)?;
                writeln!(f, "degree_d={}", r.degree_d)?;
                writeln!(f, "degree_dprime={}", opt(r.degree_dprime))?;
                writeln!(f, "chi={}", r.chi.as_ref().map_or("none".to_string(), Chi::to_string))?;
                writeln!(f, "verdict={}", verdict(self.passed()))?;
                for m in &r.members {
                    if !m.premise {
                        writeln!(f, "# member {} is not in P^{} on its own held-out samples", m.label, r.degree_d)?;
                    }
                    let out = m.c_out.as_ref().map_or("none".to_string(), BigRational::to_string);
                    writeln!(f, "member={} c_in={} c_out={}", m.label, m.c_in, out)?;
                }
            }
        }
        Ok(())
    }
}

/// Runs a family: membership mode without a transform, the higher-order
/// probe with one.
pub fn run_family(family: &Family, config: &ProbeConfig) -> Result<ProbeReport, ProbeError> {
    let ladder = config.sizes.or(family.sizes).unwrap_or_default();
    let sizes = ladder.sizes();
    let per_size = config.samples_per_size.or(family.samples_per_size).unwrap_or(DEFAULT_SAMPLES_PER_SIZE);
    let plan = Plan { programs: &family.programs, depth_limit: config.depth_limit };

    let originals = family
        .members
        .iter()
        .enumerate()
        .map(|(i, m)| collect_samples(&plan, m, None, &inputs(&m.input, config.seed, i, &sizes, per_size)))
        .collect::<Result<Vec<_>, _>>()?;

    let Some(transform) = &family.transform else {
        let fits_at = |d: u32| originals.iter().map(|s| s.held_out(d)).collect::<Result<Vec<_>, _>>();
        let mut degree = None;
        for d in 0..=config.degree_max {
            if fits_at(d)?.iter().all(|m| m.witnessed) {
                degree = Some(d);
                break;
            }
        }
        let shown = fits_at(degree.unwrap_or(config.degree_max))?;
        let members = family
            .members
            .iter()
            .zip(shown)
            .map(|(m, fit)| MemberMembership { label: m.label.clone(), fit })
            .collect();
        return Ok(ProbeReport::Membership(MembershipReport {
            family: family.name.clone(),
            sizes,
            seed: config.seed,
            samples_per_size: per_size,
            degree,
            members,
        }));
    };

    let d = family.degree;
    let transformed = family
        .members
        .iter()
        .enumerate()
        .map(|(i, m)| collect_samples(&plan, m, Some(transform), &inputs(&m.output_input, config.seed, i, &sizes, per_size)))
        .collect::<Result<Vec<_>, _>>()?;

    let mut degree_dprime = None;
    for dp in 0..=config.degree_max {
        let mut all = true;
        for s in &transformed {
            all &= s.held_out(dp)?.witnessed;
        }
        if all {
            degree_dprime = Some(dp);
            break;
        }
    }
    let mut members = Vec::with_capacity(family.members.len());
    for ((m, orig), out) in family.members.iter().zip(&originals).zip(&transformed) {
        members.push(HigherOrderMember {
            label: m.label.clone(),
            c_in: min_coefficient(&orig.all(), d)?,
            premise: orig.held_out(d)?.witnessed,
            c_out: degree_dprime.map(|dp| min_coefficient(&out.all(), dp)).transpose()?,
        });
    }
    let pairs: Vec<_> = members.iter().filter_map(|m| Some((m.c_in.clone(), m.c_out.clone()?))).collect();
    let chi = degree_dprime.and_then(|_| fit_chi(&pairs, config.chi_degree_max));
    Ok(ProbeReport::HigherOrder(HigherOrderReport {
        family: family.name.clone(),
        sizes,
        seed: config.seed,
        samples_per_size: per_size,
        degree_d: d,
        degree_dprime,
        chi,
        members,
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn r(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn s(sigma: u64, tau: u64) -> Sample {
        Sample { sigma, tau }
    }

    #[test]
    fn sizes_of_values() {
        assert_eq!(size_of(&Value::from(0)).unwrap(), 1);
        assert_eq!(size_of(&Value::from(8)).unwrap(), 5);
        assert_eq!(size_of(&Value::list([Value::from(4), Value::from(4)])).unwrap(), 9);
        assert_eq!(size_of(&Value::str("abc")).unwrap(), 4);
        assert_eq!(size_of(&Value::Bundle(vec![Value::from(1)].into())), Err(ProbeError::BundleSize));
    }

    #[test]
    fn coefficients() {
        assert_eq!(min_coefficient(&[s(1, 4)], 0).unwrap(), r(4, 1));
        assert_eq!(min_coefficient(&[s(1, 4), s(3, 8)], 1).unwrap(), r(2, 1));
        assert_eq!(min_coefficient(&[], 1), Err(ProbeError::EmptySamples));
        let samples = [s(1, 4), s(3, 8), s(10, 40)];
        let c = min_coefficient(&samples, 1).unwrap();
        assert!(check_membership(&samples, &c, 1));
        assert!(!check_membership(&samples, &(c - r(1, 100)), 1));
    }

    #[test]
    fn ladder() {
        assert_eq!("2..12".parse::<SizeLadder>().unwrap().sizes(), vec![2, 4, 8, 12]);
        assert_eq!(SizeLadder::default().sizes(), vec![2, 4, 8, 16, 32, 64, 128, 256]);
        assert!("0..4".parse::<SizeLadder>().is_err());
        assert!("9..4".parse::<SizeLadder>().is_err());
        assert!("x".parse::<SizeLadder>().is_err());
    }

    #[test]
    fn held_out_split_uses_lower_rungs_for_training() {
        let linear = LadderSamples { rungs: vec![vec![s(2, 10)], vec![s(4, 16)], vec![s(8, 28)]] };
        let (train, test) = linear.split();
        assert_eq!((train.len(), test.len()), (2, 1));
        assert!(linear.held_out(1).unwrap().witnessed);
        assert!(!linear.held_out(0).unwrap().witnessed);
        let exploding = LadderSamples { rungs: vec![vec![s(2, 4)], vec![s(4, 16)], vec![s(8, 256)]] };
        assert!(!exploding.held_out(1).unwrap().witnessed);
    }

    #[test]
    fn chi_envelope() {
        let affine: Vec<_> = (1..=6).map(|k| (r(k, 1), r(2 * k + 3, 1))).collect();
        let chi = fit_chi(&affine, 3).unwrap();
        assert_eq!(chi, Chi { a: r(2, 1), e: 1, b: r(3, 1) });
        assert_eq!(chi.to_string(), "2*c^1+3");
        let quadratic: Vec<_> = (1..=6).map(|k| (r(k, 1), r(k * k, 1))).collect();
        assert_eq!(fit_chi(&quadratic, 3).unwrap().e, 2);
        assert_eq!(fit_chi(&quadratic, 1), None);
        let flat: Vec<_> = (1..=4).map(|k| (r(k, 1), r(5, 1))).collect();
        assert_eq!(fit_chi(&flat, 3).unwrap().e, 0);
    }

    #[test]
    fn shapes_hit_their_target_sizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for size in [1, 2, 5, 64, 200] {
            let int = Shape::Int.arguments(size, &mut rng);
            assert_eq!(datum_size(&int[0]), size);
            let list = Shape::parse("(list int 16)").unwrap().arguments(size, &mut rng);
            assert_eq!(datum_size(&list[0]), size);
            let zeros = Shape::parse("(list zero 1)").unwrap().arguments(size, &mut rng);
            assert_eq!(datum_size(&zeros[0]), size);
        }
        let args = Shape::parse("(args 2 (pair str int))").unwrap().arguments(21, &mut rng);
        assert_eq!(args.len(), 2);
        assert!(Shape::parse("(list int)").is_err());
        assert!(Shape::parse("float").is_err());
    }

    #[test]
    fn family_parsing() {
        let text = "; demo\nload genmul\ninput int\nmember m5 (funcall genmul 5)\noutput-input (pair int)\nmember m7 (funcall genmul 7)\ntransform (lambda (f) f)\ndegree 2\nsizes 2..8\n";
        let fam = Family::parse("demo", text, Path::new(".")).unwrap();
        assert_eq!(fam.members.len(), 2);
        assert_eq!(fam.members[0].output_input, Shape::Int);
        assert_eq!(fam.members[1].output_input, Shape::Pair(Box::new(Shape::Int), Box::new(Shape::Int)));
        assert_eq!(fam.degree, 2);
        assert_eq!(fam.sizes, Some(SizeLadder { start: 2, end: 8 }));
        let err = Family::parse("bad", "member x 1\n", Path::new(".")).unwrap_err();
        assert!(matches!(err, ProbeError::Family { line: 1, .. }));
        let err = Family::parse("bad", "input int\nfrobnicate\n", Path::new(".")).unwrap_err();
        assert!(matches!(err, ProbeError::Family { line: 2, .. }));
    }

    #[test]
    fn constant_function_costs_the_same_on_every_input() {
        let mut interp = Interpreter::new();
        let k = interp.eval_source("(lambda (x) 7)").unwrap();
        let taus: Vec<u64> = [0i64, 1, 1 << 40]
            .iter()
            .map(|&n| measure(&mut interp, &k, vec![Value::from(n)]).unwrap().tau)
            .collect();
        assert!(taus.windows(2).all(|w| w[0] == w[1]), "{taus:?}");
    }
}
