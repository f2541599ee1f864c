//! Explicit activation stack and phase-partitioned step counters.
//!
//! Costs are abstract, deterministic steps. Every charge lands in exactly one
//! phase bucket and in the `eval_steps` total, so
//! `eval_steps == dispatch + prepare + generation + call` always holds.

use std::collections::BTreeMap;
use std::fmt::{self, Write as _};
use std::rc::Rc;

use thiserror::Error;

use crate::model::{FunctionObject, Value};

pub const DEFAULT_DEPTH_LIMIT: usize = 10_000;

/// Opaque continuation token; stands for the caller's return address and the
/// slot where the callee's output reference is handed back.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ReturnToken(pub u64);

#[derive(Debug, Clone)]
pub struct ActivationRecord {
    pub return_to: ReturnToken,
    pub callee: Rc<FunctionObject>,
    pub args: Vec<Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    /// Node dispatch and top-level work outside any call or let.
    Eval,
    /// Building a local environment (let initializers).
    Prepare,
    /// Producing a function object.
    Generate,
    /// Running a function body.
    Call,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SiteStats {
    pub generations: u64,
    pub generation_steps: u64,
    pub min_steps: u64,
    pub max_steps: u64,
}

impl SiteStats {
    /// The per-generation cost if every generation cost the same.
    pub fn steps_per_generation(&self) -> Option<u64> {
        (self.generations > 0 && self.min_steps == self.max_steps).then_some(self.min_steps)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CostCounters {
    pub eval_steps: u64,
    pub dispatch_steps: u64,
    pub prepare_steps: u64,
    pub generation_steps: u64,
    pub call_steps: u64,
    pub closure_generations: u64,
    pub function_generations: u64,
    pub frame_pushes: u64,
    pub cell_allocations: u64,
    pub sites: BTreeMap<u32, SiteStats>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum MeterError {
    #[error("stack overflow: depth limit {limit} exceeded")]
    StackOverflow { limit: usize },
    #[error("pop on empty activation stack")]
    EmptyStack,
    #[error("counter {field} decreased between snapshots ({before} -> {after})")]
    NonMonotone { field: &'static str, before: u64, after: u64 },
}

impl CostCounters {
    /// Scalar counters as `(name, value)`, in report order.
    pub fn scalars(&self) -> [(&'static str, u64); 9] {
        [
            ("eval_steps", self.eval_steps),
            ("dispatch_steps", self.dispatch_steps),
            ("prepare_steps", self.prepare_steps),
            ("generation_steps", self.generation_steps),
            ("call_steps", self.call_steps),
            ("closure_generations", self.closure_generations),
            ("function_generations", self.function_generations),
            ("frame_pushes", self.frame_pushes),
            ("cell_allocations", self.cell_allocations),
        ]
    }

    /// Plain-text `key=value` report followed by one line per lambda site.
    pub fn report(&self) -> String {
        let mut out = String::new();
        for (key, value) in self.scalars() {
            let _ = writeln!(out, "{key}={value}");
        }
        for (site, stats) in &self.sites {
            let per = match stats.steps_per_generation() {
                Some(s) => s.to_string(),
                None if stats.generations == 0 => "0".to_string(),
                None => format!("{}..{}", stats.min_steps, stats.max_steps),
            };
            let _ = writeln!(out, "site {site} generations={} steps_per_generation={per}", stats.generations);
        }
        out
    }
}

impl fmt::Display for CostCounters {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.report())
    }
}

/// Componentwise `after - before`. Per-site min/max are taken from `after`.
pub fn counters_diff(before: &CostCounters, after: &CostCounters) -> Result<CostCounters, MeterError> {
    let sub = |field: &'static str, b: u64, a: u64| a.checked_sub(b).ok_or(MeterError::NonMonotone { field, before: b, after: a });
    let mut sites = BTreeMap::new();
    for (site, a) in &after.sites {
        let b = before.sites.get(site).copied().unwrap_or_default();
        let generations = sub("site generations", b.generations, a.generations)?;
        if generations == 0 {
            continue;
        }
        sites.insert(
            *site,
            SiteStats {
                generations,
                generation_steps: sub("site generation_steps", b.generation_steps, a.generation_steps)?,
                min_steps: a.min_steps,
                max_steps: a.max_steps,
            },
        );
    }
    if let Some(site) = before.sites.keys().find(|s| !after.sites.contains_key(s)) {
        let b = before.sites[site];
        return Err(MeterError::NonMonotone { field: "site generations", before: b.generations, after: 0 });
    }
    Ok(CostCounters {
        eval_steps: sub("eval_steps", before.eval_steps, after.eval_steps)?,
        dispatch_steps: sub("dispatch_steps", before.dispatch_steps, after.dispatch_steps)?,
        prepare_steps: sub("prepare_steps", before.prepare_steps, after.prepare_steps)?,
        generation_steps: sub("generation_steps", before.generation_steps, after.generation_steps)?,
        call_steps: sub("call_steps", before.call_steps, after.call_steps)?,
        closure_generations: sub("closure_generations", before.closure_generations, after.closure_generations)?,
        function_generations: sub("function_generations", before.function_generations, after.function_generations)?,
        frame_pushes: sub("frame_pushes", before.frame_pushes, after.frame_pushes)?,
        cell_allocations: sub("cell_allocations", before.cell_allocations, after.cell_allocations)?,
        sites,
    })
}

#[derive(Debug)]
pub struct Machine {
    stack: Vec<ActivationRecord>,
    counters: CostCounters,
    depth_limit: usize,
    max_depth: usize,
    next_token: u64,
    phases: Vec<Phase>,
}

impl Default for Machine {
    fn default() -> Self {
        Machine::new(DEFAULT_DEPTH_LIMIT)
    }
}

impl Machine {
    pub fn new(depth_limit: usize) -> Self {
        Machine {
            stack: Vec::new(),
            counters: CostCounters::default(),
            depth_limit,
            max_depth: 0,
            next_token: 0,
            phases: Vec::new(),
        }
    }

    pub fn depth(&self) -> usize {
        self.stack.len()
    }

    pub fn depth_limit(&self) -> usize {
        self.depth_limit
    }

    /// Deepest stack seen since construction.
    pub fn max_depth(&self) -> usize {
        self.max_depth
    }

    pub fn stack(&self) -> &[ActivationRecord] {
        &self.stack
    }

    pub fn fresh_token(&mut self) -> ReturnToken {
        self.next_token += 1;
        ReturnToken(self.next_token)
    }

    pub fn push_frame(&mut self, record: ActivationRecord) -> Result<(), MeterError> {
        if self.stack.len() >= self.depth_limit {
            return Err(MeterError::StackOverflow { limit: self.depth_limit });
        }
        self.stack.push(record);
        self.counters.frame_pushes += 1;
        self.max_depth = self.max_depth.max(self.stack.len());
        Ok(())
    }

    pub fn pop_frame(&mut self) -> Result<ActivationRecord, MeterError> {
        self.stack.pop().ok_or(MeterError::EmptyStack)
    }

    /// Adds `amount` steps to `phase` and to the total.
    pub fn charge(&mut self, phase: Phase, amount: u64) {
        debug_assert!(amount >= 1, "charges are positive");
        let c = &mut self.counters;
        c.eval_steps += amount;
        match phase {
            Phase::Eval => c.dispatch_steps += amount,
            Phase::Prepare => c.prepare_steps += amount,
            Phase::Generate => c.generation_steps += amount,
            Phase::Call => c.call_steps += amount,
        }
    }

    /// Charges work to whichever context is innermost.
    pub fn charge_work(&mut self, amount: u64) {
        let phase = self.current_phase();
        self.charge(phase, amount);
    }

    pub fn current_phase(&self) -> Phase {
        self.phases.last().copied().unwrap_or(Phase::Eval)
    }

    /// Enters a function body. Calls made while preparing an environment
    /// stay attributed to preparation.
    pub fn enter_call(&mut self) {
        let phase = if self.current_phase() == Phase::Prepare { Phase::Prepare } else { Phase::Call };
        self.phases.push(phase);
    }

    pub fn enter_prepare(&mut self) {
        self.phases.push(Phase::Prepare);
    }

    pub fn leave_phase(&mut self) {
        self.phases.pop();
    }

    /// Drops any phase contexts and activation records left over by an
    /// aborted evaluation. Returns how many records were discarded.
    pub fn reset_control(&mut self) -> usize {
        self.phases.clear();
        let dropped = self.stack.len();
        self.stack.clear();
        dropped
    }

    pub fn record_generation(&mut self, site: u32, closure: bool, steps: u64) {
        self.charge(Phase::Generate, steps);
        let c = &mut self.counters;
        c.function_generations += 1;
        if closure {
            c.closure_generations += 1;
        }
        let entry = c.sites.entry(site).or_default();
        if entry.generations == 0 {
            entry.min_steps = steps;
            entry.max_steps = steps;
        } else {
            entry.min_steps = entry.min_steps.min(steps);
            entry.max_steps = entry.max_steps.max(steps);
        }
        entry.generations += 1;
        entry.generation_steps += steps;
    }

    pub fn note_cell_allocation(&mut self, count: u64) {
        self.counters.cell_allocations += count;
    }

    pub fn counters(&self) -> &CostCounters {
        &self.counters
    }

    pub fn counters_snapshot(&self) -> CostCounters {
        self.counters.clone()
    }
}
