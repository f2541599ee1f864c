//! Tree-walking evaluator over an explicit, metered activation stack.
//!
//! Top-level forms are first analyzed into [`Expr`] trees. Analysis is where
//! each `lambda` occurrence gets its unique [`CodeObject`] and its free
//! variables; evaluating the lambda later only decides, from the lexical
//! frames in scope, which of those variables to capture.

use std::rc::Rc;

use crate::builtins::Builtin;
use crate::error::{Error, EvalError};
use crate::machine::{ActivationRecord, CostCounters, Machine, MeterError, DEFAULT_DEPTH_LIMIT};
use crate::model::{
    cell_read, cell_write, free_variables, let_bindings, lookup_lexical, lookup_lexical_counted, split_lambda,
    BindingCell, Cell, CodeObject, FunctionKind, FunctionObject, GlobalTable, LexicalFrame, Symbol, SymbolTable,
    Value,
};
use crate::reader::{read, Node, Position, SExpr};

type Env = Option<Rc<LexicalFrame>>;

/// Analyzed form.
#[derive(Debug)]
pub enum Expr {
    Literal(Value),
    Var { sym: Symbol, pos: Position },
    Setq(Vec<(Symbol, Expr)>),
    Let { bindings: Vec<(Symbol, Option<Expr>)>, body: Vec<Expr> },
    Lambda(Rc<CodeObject>),
    If { test: Box<Expr>, then: Box<Expr>, otherwise: Option<Box<Expr>> },
    MultipleValueSetq { targets: Vec<Symbol>, form: Box<Expr> },
    FunctionRef(Builtin),
    Apply { op: Builtin, args: Vec<Expr> },
    Funcall { func: Box<Expr>, args: Vec<Expr>, pos: Position },
    /// Operator not in the function namespace; fails when evaluated.
    Undefined { name: String, pos: Position },
}

pub struct Interpreter {
    symbols: SymbolTable,
    globals: GlobalTable,
    machine: Machine,
    next_site: u32,
    next_print_id: u64,
    next_cell_id: u64,
    output: Vec<String>,
}

impl Default for Interpreter {
    fn default() -> Self {
        Interpreter::new()
    }
}

impl Interpreter {
    pub fn new() -> Self {
        Interpreter::with_depth_limit(DEFAULT_DEPTH_LIMIT)
    }

    pub fn with_depth_limit(depth_limit: usize) -> Self {
        let mut symbols = SymbolTable::new();
        let globals = GlobalTable::new(&mut symbols);
        Interpreter {
            symbols,
            globals,
            machine: Machine::new(depth_limit),
            next_site: 0,
            next_print_id: 0,
            next_cell_id: 0,
            output: Vec::new(),
        }
    }

    pub fn machine(&self) -> &Machine {
        &self.machine
    }

    pub fn counters(&self) -> &CostCounters {
        self.machine.counters()
    }

    pub fn symbols_mut(&mut self) -> &mut SymbolTable {
        &mut self.symbols
    }

    pub fn intern(&mut self, name: &str) -> Symbol {
        self.symbols.intern(name)
    }

    /// Lines written by `print` since the last call.
    pub fn take_output(&mut self) -> Vec<String> {
        std::mem::take(&mut self.output)
    }

    /// Names are case-folded like the reader folds symbols.
    pub fn global(&self, name: &str) -> Option<Value> {
        let sym = self.symbols.get(&name.to_lowercase())?;
        self.globals.variable(&sym).map(|c| cell_read(c))
    }

    pub fn global_cell(&self, name: &str) -> Option<Cell> {
        let sym = self.symbols.get(&name.to_lowercase())?;
        self.globals.variable(&sym).cloned()
    }

    pub fn set_global(&mut self, name: &str, value: Value) {
        let sym = self.symbols.intern(&name.to_lowercase());
        match self.globals.variable(&sym) {
            Some(cell) => cell_write(cell, value.single()),
            None => {
                let cell = self.new_cell(value.single());
                self.globals.define(sym, cell);
            }
        }
    }

    pub fn value_from_datum(&mut self, form: &SExpr) -> Value {
        Value::from_datum(form, &mut self.symbols)
    }

    /// Reads and evaluates every form in `src`; returns the last value, or
    /// the empty list when there are no forms.
    pub fn eval_source(&mut self, src: &str) -> Result<Value, Error> {
        let forms = read(src)?;
        let mut last = Value::nil();
        for form in &forms {
            last = self.eval_form(form)?;
        }
        Ok(last)
    }

    /// Evaluates one top-level form. Multiple values collapse to the first.
    pub fn eval_form(&mut self, form: &SExpr) -> Result<Value, EvalError> {
        let expr = self.analyze(form)?;
        let result = self.eval(&expr, &None);
        let leftover = self.machine.reset_control();
        if leftover != 0 && result.is_ok() {
            return Err(EvalError::Internal(format!("{leftover} activation record(s) left on the stack")));
        }
        result.map(Value::single)
    }

    /// Generates a function object from a lambda form at top level.
    pub fn make_function(&mut self, lambda: &SExpr) -> Result<Rc<FunctionObject>, EvalError> {
        match self.analyze(lambda)? {
            Expr::Lambda(code) => {
                self.machine.charge(crate::machine::Phase::Eval, 1);
                Ok(self.generate(&code, &None))
            }
            _ => Err(EvalError::Malformed { form: "lambda", reason: "not a lambda form".into(), pos: lambda.pos }),
        }
    }

    /// Calls a function value from outside the language (probes, bindings).
    pub fn call(&mut self, func: &Value, args: Vec<Value>) -> Result<Value, EvalError> {
        let result = self.call_value(func.clone(), args, Position::default());
        self.machine.reset_control();
        result.map(Value::single)
    }

    // ---------------------------------------------------------------- analysis

    pub fn analyze(&mut self, form: &SExpr) -> Result<Expr, EvalError> {
        let pos = form.pos;
        Ok(match &form.node {
            Node::Integer(n) => Expr::Literal(Value::Integer(n.clone())),
            Node::Str(s) => Expr::Literal(Value::str(s)),
            Node::Symbol(name) => Expr::Var { sym: self.symbols.intern(name), pos },
            Node::Quoted(inner) => Expr::Literal(self.value_from_datum(inner)),
            Node::FunctionRef(inner) => {
                let name = inner.as_symbol().expect("reader guarantees #' applies to a symbol");
                match Builtin::from_name(name) {
                    Some(b) => Expr::FunctionRef(b),
                    None => Expr::Undefined { name: name.to_string(), pos },
                }
            }
            Node::List(items) if items.is_empty() => Expr::Literal(Value::nil()),
            Node::List(items) => {
                let args = &items[1..];
                let Some(head) = items[0].as_symbol() else {
                    return Err(EvalError::IllegalCall { head: items[0].to_string(), pos });
                };
                let malformed = |form: &'static str, reason: &str| EvalError::Malformed { form, reason: reason.into(), pos };
                match head {
                    "quote" => {
                        if args.len() != 1 {
                            return Err(malformed("quote", "expects exactly one form"));
                        }
                        Expr::Literal(self.value_from_datum(&args[0]))
                    }
                    "setq" => {
                        if args.is_empty() || args.len() % 2 != 0 {
                            return Err(malformed("setq", "expects symbol/value pairs"));
                        }
                        let mut pairs = Vec::with_capacity(args.len() / 2);
                        for pair in args.chunks(2) {
                            let name = pair[0].as_symbol().ok_or_else(|| malformed("setq", "target is not a symbol"))?;
                            let sym = self.symbols.intern(name);
                            pairs.push((sym, self.analyze(&pair[1])?));
                        }
                        Expr::Setq(pairs)
                    }
                    "let" => {
                        let raw = let_bindings(form)?;
                        let mut bindings = Vec::with_capacity(raw.len());
                        for (name, init) in raw {
                            let sym = self.symbols.intern(name);
                            let init = init.map(|f| self.analyze(f)).transpose()?;
                            bindings.push((sym, init));
                        }
                        let body = self.analyze_body(&args[1..])?;
                        Expr::Let { bindings, body }
                    }
                    "lambda" => Expr::Lambda(self.analyze_lambda(form)?),
                    "if" => {
                        if !(2..=3).contains(&args.len()) {
                            return Err(malformed("if", "expects a test, a then form and an optional else form"));
                        }
                        Expr::If {
                            test: Box::new(self.analyze(&args[0])?),
                            then: Box::new(self.analyze(&args[1])?),
                            otherwise: args.get(2).map(|f| self.analyze(f)).transpose()?.map(Box::new),
                        }
                    }
                    "multiple-value-setq" => {
                        if args.len() != 2 {
                            return Err(malformed("multiple-value-setq", "expects a symbol list and a form"));
                        }
                        let targets = args[0]
                            .as_list()
                            .ok_or_else(|| malformed("multiple-value-setq", "first argument is not a list"))?
                            .iter()
                            .map(|t| {
                                t.as_symbol()
                                    .map(|n| self.symbols.intern(n))
                                    .ok_or_else(|| malformed("multiple-value-setq", "target is not a symbol"))
                            })
                            .collect::<Result<Vec<_>, _>>()?;
                        Expr::MultipleValueSetq { targets, form: Box::new(self.analyze(&args[1])?) }
                    }
                    "funcall" => {
                        if args.is_empty() {
                            return Err(malformed("funcall", "missing function"));
                        }
                        Expr::Funcall {
                            func: Box::new(self.analyze(&args[0])?),
                            args: self.analyze_body(&args[1..])?,
                            pos,
                        }
                    }
                    name => match Builtin::from_name(name) {
                        Some(op) => Expr::Apply { op, args: self.analyze_body(args)? },
                        None => Expr::Undefined { name: name.to_string(), pos },
                    },
                }
            }
        })
    }

    fn analyze_body(&mut self, forms: &[SExpr]) -> Result<Vec<Expr>, EvalError> {
        forms.iter().map(|f| self.analyze(f)).collect()
    }

    fn analyze_lambda(&mut self, form: &SExpr) -> Result<Rc<CodeObject>, EvalError> {
        let (params, body) = split_lambda(form)?;
        let params: Vec<Symbol> = params.into_iter().map(|p| self.symbols.intern(p)).collect();
        let free = free_variables(form)?.iter().map(|n| self.symbols.intern(n)).collect();
        let body = self.analyze_body(body)?;
        self.next_site += 1;
        Ok(Rc::new(CodeObject { site: self.next_site, params, body, free, source: form.clone() }))
    }

    // -------------------------------------------------------------- evaluation

    fn new_cell(&mut self, value: Value) -> Cell {
        self.next_cell_id += 1;
        self.machine.note_cell_allocation(1);
        BindingCell::new(self.next_cell_id, value)
    }

    fn eval(&mut self, expr: &Expr, env: &Env) -> Result<Value, EvalError> {
        stacker::maybe_grow(64 * 1024, 2 * 1024 * 1024, || self.eval_node(expr, env))
    }

    fn eval_single(&mut self, expr: &Expr, env: &Env) -> Result<Value, EvalError> {
        self.eval(expr, env).map(Value::single)
    }

    fn eval_node(&mut self, expr: &Expr, env: &Env) -> Result<Value, EvalError> {
        self.machine.charge(crate::machine::Phase::Eval, 1);
        match expr {
            Expr::Literal(v) => Ok(v.clone()),
            Expr::Var { sym, pos } => self.lookup(sym, env, *pos),
            Expr::Setq(pairs) => {
                let mut last = Value::nil();
                for (sym, value) in pairs {
                    let v = self.eval_single(value, env)?;
                    self.assign(sym, v.clone(), env);
                    last = v;
                }
                Ok(last)
            }
            Expr::Let { bindings, body } => {
                self.machine.enter_prepare();
                let prepared = self.prepare_let(bindings, env);
                self.machine.leave_phase();
                let frame = LexicalFrame::new(prepared?, env.clone());
                self.eval_sequence(body, &Some(frame))
            }
            Expr::Lambda(code) => Ok(Value::Function(self.generate(code, env))),
            Expr::If { test, then, otherwise } => {
                if self.eval_single(test, env)?.is_truthy() {
                    self.eval(then, env)
                } else {
                    match otherwise {
                        Some(e) => self.eval(e, env),
                        None => Ok(Value::nil()),
                    }
                }
            }
            Expr::MultipleValueSetq { targets, form } => {
                let values: Vec<Value> = match self.eval(form, env)? {
                    Value::Bundle(vals) => vals.iter().cloned().collect(),
                    v => vec![v],
                };
                for (i, sym) in targets.iter().enumerate() {
                    let v = values.get(i).cloned().unwrap_or_else(Value::nil);
                    self.assign(sym, v, env);
                }
                Ok(values.into_iter().next().unwrap_or_else(Value::nil))
            }
            Expr::FunctionRef(b) => Ok(Value::Builtin(*b)),
            Expr::Apply { op, args } => {
                let args = self.eval_args(args, env)?;
                self.apply_builtin(*op, &args)
            }
            Expr::Funcall { func, args, pos } => {
                let f = self.eval_single(func, env)?;
                let args = self.eval_args(args, env)?;
                self.call_value(f, args, *pos)
            }
            Expr::Undefined { name, pos } => Err(EvalError::UndefinedFunction { name: name.clone(), pos: *pos }),
        }
    }

    fn eval_args(&mut self, args: &[Expr], env: &Env) -> Result<Vec<Value>, EvalError> {
        args.iter().map(|a| self.eval_single(a, env)).collect()
    }

    fn eval_sequence(&mut self, body: &[Expr], env: &Env) -> Result<Value, EvalError> {
        let Some((last, init)) = body.split_last() else { return Ok(Value::nil()) };
        for e in init {
            self.eval(e, env)?;
        }
        self.eval(last, env)
    }

    fn prepare_let(&mut self, bindings: &[(Symbol, Option<Expr>)], env: &Env) -> Result<Vec<(Symbol, Cell)>, EvalError> {
        let mut values = Vec::with_capacity(bindings.len());
        for (_, init) in bindings {
            values.push(match init {
                Some(e) => self.eval_single(e, env)?,
                None => Value::nil(),
            });
        }
        let mut cells = Vec::with_capacity(bindings.len());
        for ((sym, _), v) in bindings.iter().zip(values) {
            self.machine.charge_work(1);
            cells.push((sym.clone(), self.new_cell(v)));
        }
        Ok(cells)
    }

    fn lookup(&mut self, sym: &Symbol, env: &Env, pos: Position) -> Result<Value, EvalError> {
        let (cell, examined) = lookup_lexical_counted(env.as_ref(), sym);
        if let Some(cell) = cell {
            self.machine.charge_work(examined);
            return Ok(cell_read(&cell));
        }
        self.machine.charge_work(examined + 1);
        match self.globals.variable(sym) {
            Some(cell) => Ok(cell_read(cell)),
            None => Err(EvalError::UnboundVariable { name: sym.name().to_string(), pos }),
        }
    }

    /// Writes the nearest lexical cell for `sym`, else the global cell
    /// (creating it on first assignment).
    fn assign(&mut self, sym: &Symbol, value: Value, env: &Env) {
        let (cell, examined) = lookup_lexical_counted(env.as_ref(), sym);
        if let Some(cell) = cell {
            self.machine.charge_work(examined);
            cell_write(&cell, value);
            return;
        }
        self.machine.charge_work(examined + 1);
        match self.globals.variable(sym) {
            Some(cell) => cell_write(cell, value),
            None => {
                let cell = self.new_cell(value);
                self.globals.define(sym.clone(), cell);
            }
        }
    }

    /// Produces a function object for `code` in `env`: an ordinary function
    /// when none of its free variables is bound lexically, a closure holding
    /// the cells of those that are otherwise.
    fn generate(&mut self, code: &Rc<CodeObject>, env: &Env) -> Rc<FunctionObject> {
        let captures: Vec<(Symbol, Cell)> = code
            .free
            .iter()
            .filter_map(|sym| lookup_lexical(env.as_ref(), sym).map(|cell| (sym.clone(), cell)))
            .collect();
        let kind = if captures.is_empty() { FunctionKind::Ordinary } else { FunctionKind::Closure };
        self.machine.record_generation(code.site, kind == FunctionKind::Closure, 1 + captures.len() as u64);
        self.next_print_id += 1;
        Rc::new(FunctionObject::new(kind, code.clone(), captures, self.next_print_id))
    }

    fn apply_builtin(&mut self, op: Builtin, args: &[Value]) -> Result<Value, EvalError> {
        let (value, cost) = op.apply(args)?;
        self.machine.charge_work(cost);
        if op == Builtin::Print {
            self.output.push(value.to_string());
        }
        Ok(value)
    }

    fn call_value(&mut self, f: Value, args: Vec<Value>, pos: Position) -> Result<Value, EvalError> {
        match f {
            Value::Function(func) => self.invoke(&func, args, pos),
            Value::Builtin(op) => self.apply_builtin(op, &args),
            other => Err(EvalError::NotAFunction { value: other.to_string(), pos }),
        }
    }

    /// Pushes an activation record (return token, callee, arguments), binds
    /// the parameters to fresh cells on top of the callee's captured cells,
    /// runs the body and pops the record again on every path.
    pub fn invoke(&mut self, func: &Rc<FunctionObject>, args: Vec<Value>, pos: Position) -> Result<Value, EvalError> {
        let code = &func.code;
        if code.params.len() != args.len() {
            return Err(EvalError::ArityMismatch {
                callee: func.to_string(),
                expected: code.params.len(),
                got: args.len(),
                pos,
            });
        }
        let return_to = self.machine.fresh_token();
        let record = ActivationRecord { return_to, callee: func.clone(), args };
        self.machine.push_frame(record).map_err(|e| match e {
            MeterError::StackOverflow { limit } => EvalError::StackOverflow { limit },
            other => EvalError::Internal(other.to_string()),
        })?;
        self.machine.enter_call();
        let result = self.run_body(func);
        self.machine.leave_phase();
        let popped = self.machine.pop_frame().map_err(|e| EvalError::Internal(e.to_string()))?;
        debug_assert_eq!(popped.return_to, return_to);
        result
    }

    fn run_body(&mut self, func: &Rc<FunctionObject>) -> Result<Value, EvalError> {
        self.machine.charge_work(1);
        let args = self.machine.stack().last().expect("record was just pushed").args.clone();
        let mut bindings = Vec::with_capacity(args.len());
        for (param, arg) in func.code.params.iter().zip(args) {
            self.machine.charge_work(1);
            bindings.push((param.clone(), self.new_cell(arg)));
        }
        let frame = LexicalFrame::new(bindings, func.env().cloned());
        self.eval_sequence(&func.code.body, &Some(frame))
    }
}
