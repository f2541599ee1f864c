//! Values, symbols, binding cells, lexical frames and the global table.
//!
//! A closure is a [`FunctionObject`] whose `captures` map holds references to
//! the binding cells of the lexically bound free variables of its code. The
//! cells themselves are shared: two closures generated in the same frame see
//! each other's assignments, while closures from different frames never do.

use std::cell::RefCell;
use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::rc::Rc;

use num_bigint::BigInt;

use crate::builtins::Builtin;
use crate::error::EvalError;
use crate::list::List;
use crate::reader::{Node, SExpr};

/// An interned symbol. Equality and hashing use the id only.
#[derive(Clone)]
pub struct Symbol {
    id: u32,
    name: Rc<str>,
}

impl Symbol {
    pub fn id(&self) -> u32 {
        self.id
    }

    pub fn name(&self) -> &str {
        &self.name
    }
}

impl PartialEq for Symbol {
    fn eq(&self, other: &Self) -> bool {
        self.id == other.id
    }
}

impl Eq for Symbol {}

impl Hash for Symbol {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.id.hash(state)
    }
}

impl fmt::Debug for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}", self.name, self.id)
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

#[derive(Debug, Default)]
pub struct SymbolTable {
    ids: HashMap<Rc<str>, u32>,
    symbols: Vec<Symbol>,
}

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> Symbol {
        if let Some(&id) = self.ids.get(name) {
            return self.symbols[id as usize].clone();
        }
        let id = self.symbols.len() as u32;
        let name: Rc<str> = Rc::from(name);
        let sym = Symbol { id, name: name.clone() };
        self.ids.insert(name, id);
        self.symbols.push(sym.clone());
        sym
    }

    pub fn get(&self, name: &str) -> Option<Symbol> {
        self.ids.get(name).map(|&id| self.symbols[id as usize].clone())
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }
}

pub type Cell = Rc<BindingCell>;

/// Identity-bearing mutable holder of one value.
pub struct BindingCell {
    id: u64,
    content: RefCell<Value>,
}

impl BindingCell {
    pub fn new(id: u64, value: Value) -> Cell {
        Rc::new(BindingCell { id, content: RefCell::new(value) })
    }

    pub fn id(&self) -> u64 {
        self.id
    }
}

impl fmt::Debug for BindingCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "cell#{}", self.id)
    }
}

pub fn cell_read(cell: &BindingCell) -> Value {
    cell.content.borrow().clone()
}

pub fn cell_write(cell: &BindingCell, value: Value) {
    debug_assert!(!matches!(value, Value::Bundle(_)), "bundles are never stored in cells");
    *cell.content.borrow_mut() = value;
}

/// One frame of the lexical chain. Frames are immutable once built; only the
/// cells they point to change.
#[derive(Debug)]
pub struct LexicalFrame {
    bindings: Vec<(Symbol, Cell)>,
    parent: Option<Rc<LexicalFrame>>,
}

impl LexicalFrame {
    pub fn new(bindings: Vec<(Symbol, Cell)>, parent: Option<Rc<LexicalFrame>>) -> Rc<Self> {
        Rc::new(LexicalFrame { bindings, parent })
    }

    pub fn bindings(&self) -> &[(Symbol, Cell)] {
        &self.bindings
    }

    pub fn parent(&self) -> Option<&Rc<LexicalFrame>> {
        self.parent.as_ref()
    }
}

/// Searches `frame` and then its parents. Returns the cell and the number of
/// frames examined (found or not).
pub fn lookup_lexical_counted(frame: Option<&Rc<LexicalFrame>>, sym: &Symbol) -> (Option<Cell>, u64) {
    let mut examined = 0;
    let mut current = frame;
    while let Some(f) = current {
        examined += 1;
        if let Some((_, cell)) = f.bindings.iter().find(|(s, _)| s == sym) {
            return (Some(cell.clone()), examined);
        }
        current = f.parent.as_ref();
    }
    (None, examined)
}

pub fn lookup_lexical(frame: Option<&Rc<LexicalFrame>>, sym: &Symbol) -> Option<Cell> {
    lookup_lexical_counted(frame, sym).0
}

/// Global variable cells plus the fixed builtin namespace reached by `#'name`.
#[derive(Debug, Default)]
pub struct GlobalTable {
    variables: HashMap<Symbol, Cell>,
    builtins: HashMap<Symbol, Builtin>,
}

impl GlobalTable {
    pub fn new(symbols: &mut SymbolTable) -> Self {
        let builtins = Builtin::ALL.iter().map(|&b| (symbols.intern(b.name()), b)).collect();
        GlobalTable { variables: HashMap::new(), builtins }
    }

    pub fn variable(&self, sym: &Symbol) -> Option<&Cell> {
        self.variables.get(sym)
    }

    pub fn define(&mut self, sym: Symbol, cell: Cell) {
        self.variables.insert(sym, cell);
    }

    pub fn builtin(&self, sym: &Symbol) -> Option<Builtin> {
        self.builtins.get(sym).copied()
    }
}

/// The unique code of one lambda occurrence, shared by every function
/// object generated from it.
pub struct CodeObject {
    pub site: u32,
    pub params: Vec<Symbol>,
    pub body: Vec<crate::eval::Expr>,
    /// Free variables of the lambda in order of first occurrence.
    pub free: Vec<Symbol>,
    pub source: SExpr,
}

impl fmt::Debug for CodeObject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CodeObject(site {}: {})", self.site, self.source)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionKind {
    Ordinary,
    Closure,
}

#[derive(Debug)]
pub struct FunctionObject {
    pub kind: FunctionKind,
    pub code: Rc<CodeObject>,
    pub captures: Vec<(Symbol, Cell)>,
    pub print_id: u64,
    env: Option<Rc<LexicalFrame>>,
}

impl FunctionObject {
    pub fn new(kind: FunctionKind, code: Rc<CodeObject>, captures: Vec<(Symbol, Cell)>, print_id: u64) -> Self {
        let env = (!captures.is_empty()).then(|| LexicalFrame::new(captures.clone(), None));
        FunctionObject { kind, code, captures, print_id, env }
    }

    /// Frame holding exactly the captured cells; the lexical parent of every
    /// invocation. Ordinary functions have none.
    pub fn env(&self) -> Option<&Rc<LexicalFrame>> {
        self.env.as_ref()
    }

    pub fn capture(&self, sym: &Symbol) -> Option<&Cell> {
        self.captures.iter().find(|(s, _)| s == sym).map(|(_, c)| c)
    }
}

impl fmt::Display for FunctionObject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            FunctionKind::Ordinary => write!(f, "#<Function {}>", self.print_id),
            FunctionKind::Closure => write!(f, "#<Closure {}>", self.print_id),
        }
    }
}

#[derive(Clone)]
pub enum Value {
    Integer(BigInt),
    Str(Rc<str>),
    Symbol(Symbol),
    List(List),
    Function(Rc<FunctionObject>),
    Builtin(Builtin),
    /// Multiple values; only ever seen transiently as a call result.
    Bundle(Rc<[Value]>),
}

impl Value {
    pub fn nil() -> Value {
        Value::List(List::nil())
    }

    pub fn str(s: &str) -> Value {
        Value::Str(Rc::from(s))
    }

    pub fn list(items: impl IntoIterator<Item = Value>) -> Value {
        Value::List(items.into_iter().collect())
    }

    /// Collapses a bundle to its first element; other values pass through.
    pub fn single(self) -> Value {
        match self {
            Value::Bundle(vals) => vals.first().cloned().unwrap_or_else(Value::nil),
            v => v,
        }
    }

    pub fn is_truthy(&self) -> bool {
        !matches!(self, Value::List(l) if l.is_empty())
    }

    pub fn is_callable(&self) -> bool {
        matches!(self, Value::Function(_) | Value::Builtin(_))
    }

    pub fn as_function(&self) -> Option<&Rc<FunctionObject>> {
        match self {
            Value::Function(f) => Some(f),
            _ => None,
        }
    }

    /// Converts literal data (as produced by the reader) into a value.
    pub fn from_datum(form: &SExpr, symbols: &mut SymbolTable) -> Value {
        match &form.node {
            Node::Integer(n) => Value::Integer(n.clone()),
            Node::Str(s) => Value::str(s),
            Node::Symbol(s) => Value::Symbol(symbols.intern(s)),
            Node::List(items) => Value::list(items.iter().map(|f| Value::from_datum(f, symbols))),
            Node::FunctionRef(inner) => {
                Value::list([Value::Symbol(symbols.intern("function")), Value::from_datum(inner, symbols)])
            }
            Node::Quoted(inner) => Value::list([Value::Symbol(symbols.intern("quote")), Value::from_datum(inner, symbols)]),
        }
    }
}

impl From<i64> for Value {
    fn from(n: i64) -> Value {
        Value::Integer(BigInt::from(n))
    }
}

impl From<BigInt> for Value {
    fn from(n: BigInt) -> Value {
        Value::Integer(n)
    }
}

impl PartialEq for Value {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Value::Integer(a), Value::Integer(b)) => a == b,
            (Value::Str(a), Value::Str(b)) => a == b,
            (Value::Symbol(a), Value::Symbol(b)) => a == b,
            (Value::List(a), Value::List(b)) => a == b,
            (Value::Function(a), Value::Function(b)) => Rc::ptr_eq(a, b),
            (Value::Builtin(a), Value::Builtin(b)) => a == b,
            (Value::Bundle(a), Value::Bundle(b)) => a == b,
            _ => false,
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Integer(n) => write!(f, "{n}"),
            Value::Str(s) => crate::reader::write_string_literal(f, s),
            Value::Symbol(s) => f.write_str(s.name()),
            Value::List(items) => {
                f.write_str("(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str(")")
            }
            Value::Function(func) => write!(f, "{func}"),
            Value::Builtin(b) => write!(f, "#<Function {}>", b.name()),
            Value::Bundle(vals) => match vals.first() {
                Some(v) => write!(f, "{v}"),
                None => f.write_str("()"),
            },
        }
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Bundle(vals) => f.debug_tuple("Bundle").field(&vals).finish(),
            other => write!(f, "{other}"),
        }
    }
}

pub const SPECIAL_FORMS: [&str; 7] = ["setq", "let", "lambda", "quote", "if", "multiple-value-setq", "funcall"];

pub fn is_special_form(name: &str) -> bool {
    SPECIAL_FORMS.contains(&name)
}

/// Free variables of a lambda form, in order of first occurrence.
///
/// Operator-position symbols live in the function namespace and are never
/// variables; `#'x` and quoted data contribute nothing. Assignment targets of
/// `setq` / `multiple-value-setq` count as occurrences.
pub fn free_variables(lambda: &SExpr) -> Result<Vec<String>, EvalError> {
    let (params, body) = split_lambda(lambda)?;
    let mut out = Vec::new();
    let mut scope = params;
    for form in body {
        collect_free(form, &mut scope, &mut out)?;
    }
    Ok(out)
}

/// Splits `(lambda (params...) body...)` into parameter names and body.
pub(crate) fn split_lambda(form: &SExpr) -> Result<(Vec<&str>, &[SExpr]), EvalError> {
    let malformed = |reason: &str| EvalError::Malformed { form: "lambda", reason: reason.into(), pos: form.pos };
    let items = form.as_list().ok_or_else(|| malformed("not a list"))?;
    match items.first().and_then(SExpr::as_symbol) {
        Some("lambda") => {}
        _ => return Err(malformed("does not start with lambda")),
    }
    let params = items.get(1).and_then(SExpr::as_list).ok_or_else(|| malformed("missing parameter list"))?;
    let mut names = Vec::with_capacity(params.len());
    for p in params {
        let name = p.as_symbol().ok_or_else(|| malformed("parameter is not a symbol"))?;
        if names.contains(&name) {
            return Err(malformed(&format!("parameter {name} appears twice")));
        }
        names.push(name);
    }
    Ok((names, &items[2..]))
}

fn note_free<'a>(name: &'a str, scope: &[&'a str], out: &mut Vec<String>) {
    if !scope.contains(&name) && !out.iter().any(|o| o == name) {
        out.push(name.to_string());
    }
}

fn collect_free<'a>(form: &'a SExpr, scope: &mut Vec<&'a str>, out: &mut Vec<String>) -> Result<(), EvalError> {
    match &form.node {
        Node::Symbol(name) => note_free(name, scope, out),
        Node::Integer(_) | Node::Str(_) | Node::FunctionRef(_) | Node::Quoted(_) => {}
        Node::List(items) => {
            let Some(head) = items.first() else { return Ok(()) };
            let args = &items[1..];
            match head.as_symbol() {
                Some("quote") => {}
                Some("lambda") => {
                    let (params, body) = split_lambda(form)?;
                    let mark = scope.len();
                    scope.extend(params);
                    for f in body {
                        collect_free(f, scope, out)?;
                    }
                    scope.truncate(mark);
                }
                Some("let") => {
                    let bindings = let_bindings(form)?;
                    for (_, init) in &bindings {
                        if let Some(init) = init {
                            collect_free(init, scope, out)?;
                        }
                    }
                    let mark = scope.len();
                    scope.extend(bindings.iter().map(|(name, _)| *name));
                    for f in &items[2..] {
                        collect_free(f, scope, out)?;
                    }
                    scope.truncate(mark);
                }
                Some("setq") => {
                    for (i, arg) in args.iter().enumerate() {
                        if i % 2 == 0 {
                            if let Some(name) = arg.as_symbol() {
                                note_free(name, scope, out);
                                continue;
                            }
                        }
                        collect_free(arg, scope, out)?;
                    }
                }
                Some("multiple-value-setq") => {
                    if let Some(targets) = args.first().and_then(SExpr::as_list) {
                        for t in targets {
                            if let Some(name) = t.as_symbol() {
                                note_free(name, scope, out);
                            }
                        }
                    }
                    for f in args.iter().skip(1) {
                        collect_free(f, scope, out)?;
                    }
                }
                // Any other symbol head is in the function namespace.
                Some(_) => {
                    for f in args {
                        collect_free(f, scope, out)?;
                    }
                }
                None => {
                    for f in items {
                        collect_free(f, scope, out)?;
                    }
                }
            }
        }
    }
    Ok(())
}

/// Parses the binding list of a `let` form into `(name, init)` pairs.
pub(crate) fn let_bindings(form: &SExpr) -> Result<Vec<(&str, Option<&SExpr>)>, EvalError> {
    let malformed = |reason: String, pos| EvalError::Malformed { form: "let", reason, pos };
    let items = form.as_list().expect("let form is a list");
    let list = items
        .get(1)
        .and_then(SExpr::as_list)
        .ok_or_else(|| malformed("missing binding list".into(), form.pos))?;
    let mut out: Vec<(&str, Option<&SExpr>)> = Vec::with_capacity(list.len());
    for b in list {
        let (name, init) = match &b.node {
            Node::Symbol(s) => (s.as_str(), None),
            Node::List(parts) if !parts.is_empty() && parts.len() <= 2 => {
                let name = parts[0].as_symbol().ok_or_else(|| malformed("binding name is not a symbol".into(), b.pos))?;
                (name, parts.get(1))
            }
            _ => return Err(malformed(format!("bad binding {b}"), b.pos)),
        };
        if out.iter().any(|(n, _)| *n == name) {
            return Err(EvalError::DuplicateBinding { name: name.to_string(), pos: b.pos });
        }
        out.push((name, init));
    }
    Ok(out)
}
