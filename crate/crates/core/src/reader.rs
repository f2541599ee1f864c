//! Tokenizer, parser and canonical printer for the surface language.
//!
//! The reader is pure: it never interns symbols or touches interpreter state,
//! so it can be used from any thread.

use std::fmt;

use num_bigint::BigInt;
use thiserror::Error;

/// 1-based line/column location of a token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Position {
    pub line: usize,
    pub column: usize,
}

impl Position {
    pub fn new(line: usize, column: usize) -> Self {
        Self { line, column }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.line, self.column)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    LParen,
    RParen,
    Integer,
    String,
    Symbol,
    FunctionRef,
    Quote,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    /// Source text of the token. For strings this is the decoded content
    /// without the surrounding quotes; symbols are already lower-cased.
    pub lexeme: String,
    pub pos: Position,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ReadError {
    #[error("{pos}: unterminated string")]
    UnterminatedString { pos: Position },
    #[error("{pos}: illegal character {ch:?}")]
    IllegalCharacter { ch: char, pos: Position },
    #[error("{pos}: unexpected ')'")]
    UnexpectedClose { pos: Position },
    #[error("{pos}: unclosed '(' at end of input")]
    Unclosed { pos: Position },
    #[error("{pos}: {marker} with nothing to apply to")]
    DanglingMarker { marker: &'static str, pos: Position },
    #[error("{pos}: #' must be followed by a symbol")]
    BadFunctionRef { pos: Position },
}

impl ReadError {
    pub fn position(&self) -> Position {
        match self {
            ReadError::UnterminatedString { pos }
            | ReadError::IllegalCharacter { pos, .. }
            | ReadError::UnexpectedClose { pos }
            | ReadError::Unclosed { pos }
            | ReadError::DanglingMarker { pos, .. }
            | ReadError::BadFunctionRef { pos } => *pos,
        }
    }
}

/// A parsed form together with the position of its first token.
///
/// Equality is structural and ignores positions.
#[derive(Debug, Clone)]
pub struct SExpr {
    pub node: Node,
    pub pos: Position,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Integer(BigInt),
    Str(String),
    Symbol(String),
    List(Vec<SExpr>),
    FunctionRef(Box<SExpr>),
    Quoted(Box<SExpr>),
}

impl PartialEq for SExpr {
    fn eq(&self, other: &Self) -> bool {
        self.node == other.node
    }
}

impl SExpr {
    pub fn new(node: Node, pos: Position) -> Self {
        Self { node, pos }
    }

    /// Builds a form with a default position; handy for synthesized data.
    pub fn synthetic(node: Node) -> Self {
        Self { node, pos: Position::default() }
    }

    pub fn as_symbol(&self) -> Option<&str> {
        match &self.node {
            Node::Symbol(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_list(&self) -> Option<&[SExpr]> {
        match &self.node {
            Node::List(items) => Some(items),
            _ => None,
        }
    }
}

impl fmt::Display for SExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.node {
            Node::Integer(n) => write!(f, "{n}"),
            Node::Str(s) => write_string_literal(f, s),
            Node::Symbol(s) => f.write_str(s),
            Node::List(items) => {
                f.write_str("(")?;
                for (i, item) in items.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{item}")?;
                }
                f.write_str(")")
            }
            Node::FunctionRef(inner) => write!(f, "#'{inner}"),
            Node::Quoted(inner) => write!(f, "'{inner}"),
        }
    }
}

pub(crate) fn write_string_literal(f: &mut impl fmt::Write, s: &str) -> fmt::Result {
    f.write_char('"')?;
    for ch in s.chars() {
        match ch {
            '"' => f.write_str("\\\"")?,
            '\\' => f.write_str("\\\\")?,
            _ => f.write_char(ch)?,
        }
    }
    f.write_char('"')
}

/// Characters allowed inside a symbol or integer lexeme.
fn is_atom_char(ch: char) -> bool {
    ch.is_alphanumeric() || matches!(ch, '+' | '*' | '-' | '_' | '[' | ']' | '<' | '>' | '=' | '/' | '!' | '?' | '%' | '&' | '.' | ':')
}

fn is_integer_lexeme(s: &str) -> bool {
    let digits = s.strip_prefix('-').unwrap_or(s);
    !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit())
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::Chars<'a>>,
    line: usize,
    column: usize,
}

impl<'a> Cursor<'a> {
    fn new(text: &'a str) -> Self {
        Self { chars: text.chars().peekable(), line: 1, column: 1 }
    }

    fn pos(&self) -> Position {
        Position::new(self.line, self.column)
    }

    fn peek(&mut self) -> Option<char> {
        self.chars.peek().copied()
    }

    fn bump(&mut self) -> Option<char> {
        let ch = self.chars.next()?;
        if ch == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        Some(ch)
    }
}

pub fn tokenize(text: &str) -> Result<Vec<Token>, ReadError> {
    let mut cur = Cursor::new(text);
    let mut tokens = Vec::new();
    while let Some(ch) = cur.peek() {
        let pos = cur.pos();
        match ch {
            c if c.is_whitespace() => {
                cur.bump();
            }
            ';' => {
                while let Some(c) = cur.peek() {
                    if c == '\n' {
                        break;
                    }
                    cur.bump();
                }
            }
            '(' | ')' => {
                cur.bump();
                let kind = if ch == '(' { TokenKind::LParen } else { TokenKind::RParen };
                tokens.push(Token { kind, lexeme: ch.to_string(), pos });
            }
            '\'' => {
                cur.bump();
                tokens.push(Token { kind: TokenKind::Quote, lexeme: "'".into(), pos });
            }
            '#' => {
                cur.bump();
                if cur.peek() == Some('\'') {
                    cur.bump();
                    tokens.push(Token { kind: TokenKind::FunctionRef, lexeme: "#'".into(), pos });
                } else {
                    return Err(ReadError::IllegalCharacter { ch: '#', pos });
                }
            }
            '"' => {
                cur.bump();
                let mut text = String::new();
                loop {
                    match cur.bump() {
                        None | Some('\n') => return Err(ReadError::UnterminatedString { pos }),
                        Some('"') => break,
                        Some('\\') => match cur.bump() {
                            None | Some('\n') => return Err(ReadError::UnterminatedString { pos }),
                            Some(escaped) => text.push(escaped),
                        },
                        Some(c) => text.push(c),
                    }
                }
                tokens.push(Token { kind: TokenKind::String, lexeme: text, pos });
            }
            c if is_atom_char(c) => {
                let mut lexeme = String::new();
                while let Some(c) = cur.peek() {
                    if !is_atom_char(c) {
                        break;
                    }
                    lexeme.push(c);
                    cur.bump();
                }
                let kind = if is_integer_lexeme(&lexeme) {
                    TokenKind::Integer
                } else {
                    lexeme = lexeme.to_lowercase();
                    TokenKind::Symbol
                };
                tokens.push(Token { kind, lexeme, pos });
            }
            other => return Err(ReadError::IllegalCharacter { ch: other, pos }),
        }
    }
    Ok(tokens)
}

pub fn parse(tokens: &[Token]) -> Result<Vec<SExpr>, ReadError> {
    let mut parser = Parser { tokens, index: 0 };
    let mut forms = Vec::new();
    while parser.index < tokens.len() {
        forms.push(parser.form()?);
    }
    Ok(forms)
}

struct Parser<'t> {
    tokens: &'t [Token],
    index: usize,
}

impl Parser<'_> {
    fn form(&mut self) -> Result<SExpr, ReadError> {
        let tok = &self.tokens[self.index];
        self.index += 1;
        let pos = tok.pos;
        let node = match tok.kind {
            TokenKind::Integer => {
                Node::Integer(tok.lexeme.parse().expect("integer lexeme is validated by the tokenizer"))
            }
            TokenKind::String => Node::Str(tok.lexeme.clone()),
            TokenKind::Symbol => Node::Symbol(tok.lexeme.clone()),
            TokenKind::RParen => return Err(ReadError::UnexpectedClose { pos }),
            TokenKind::LParen => {
                let mut items = Vec::new();
                loop {
                    match self.tokens.get(self.index) {
                        None => return Err(ReadError::Unclosed { pos }),
                        Some(t) if t.kind == TokenKind::RParen => {
                            self.index += 1;
                            break;
                        }
                        Some(_) => items.push(self.form()?),
                    }
                }
                Node::List(items)
            }
            TokenKind::Quote => {
                if self.index >= self.tokens.len() {
                    return Err(ReadError::DanglingMarker { marker: "'", pos });
                }
                Node::Quoted(Box::new(self.form()?))
            }
            TokenKind::FunctionRef => {
                if self.index >= self.tokens.len() {
                    return Err(ReadError::DanglingMarker { marker: "#'", pos });
                }
                let inner = self.form()?;
                if inner.as_symbol().is_none() {
                    return Err(ReadError::BadFunctionRef { pos });
                }
                Node::FunctionRef(Box::new(inner))
            }
        };
        Ok(SExpr::new(node, pos))
    }
}

/// Tokenizes and parses `text` in one step.
pub fn read(text: &str) -> Result<Vec<SExpr>, ReadError> {
    parse(&tokenize(text)?)
}

pub fn print_form(form: &SExpr) -> String {
    form.to_string()
}

/// Net parenthesis depth of `text`, ignoring strings and comments.
///
/// Used by the REPL and the transcript loader to decide when an input that
/// spans several lines is complete. Returns `None` if a string is still open.
pub fn paren_balance(text: &str) -> Option<i64> {
    let mut depth = 0i64;
    let mut chars = text.chars();
    while let Some(ch) = chars.next() {
        match ch {
            '(' => depth += 1,
            ')' => depth -= 1,
            ';' => {
                for c in chars.by_ref() {
                    if c == '\n' {
                        break;
                    }
                }
            }
            '"' => loop {
                match chars.next() {
                    None => return None,
                    Some('"') => break,
                    Some('\\') => {
                        chars.next();
                    }
                    Some(_) => {}
                }
            },
            _ => {}
        }
    }
    Some(depth)
}
