//! Concrete syntax for `.qlam` sources.
//!
//! Grammar (application binds tighter than lambda/if/let bodies and
//! associates left; `--` starts a comment):
//!
//! ```text
//! term := \x.term
//!       | if term then term else term
//!       | let <x, y> = term in term
//!       | let x = term in term          -- sugar for (\x.N) M
//!       | atom+
//! atom := x | 0 | 1 | * | meas | new | GATE | (term) | <term, term, ...>
//! ```
//!
//! `<M1, ..., Mn>` desugars right-nested. Identifiers are resolved against
//! the gate table: a name the table knows becomes a gate constant and cannot
//! be bound; any other name is an ordinary variable. Reserved register names
//! `p0, p1, …` are accepted as references (they occur in traces and test
//! fixtures) but never as binders.

use std::fmt;

use thiserror::Error;

use super::{GateRef, Term, VarName};
use crate::quantum::GateTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    UnknownGate,
    ReservedBinder,
}

#[derive(Debug, Clone, Error)]
#[error("parse error at {line}:{col}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub message: String,
    pub kind: ParseErrorKind,
}

impl ParseError {
    fn syntax(line: usize, col: usize, message: impl Into<String>) -> Self {
        ParseError { line, col, message: message.into(), kind: ParseErrorKind::Syntax }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Backslash,
    Dot,
    LParen,
    RParen,
    LAngle,
    RAngle,
    Comma,
    Equals,
    Star,
    Bit(bool),
    Ident(String),
    If,
    Then,
    Else,
    Let,
    In,
    Meas,
    New,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Backslash => write!(f, "\\"),
            Tok::Dot => write!(f, "."),
            Tok::LParen => write!(f, "("),
            Tok::RParen => write!(f, ")"),
            Tok::LAngle => write!(f, "<"),
            Tok::RAngle => write!(f, ">"),
            Tok::Comma => write!(f, ","),
            Tok::Equals => write!(f, "="),
            Tok::Star => write!(f, "*"),
            Tok::Bit(b) => write!(f, "{}", if *b { 1 } else { 0 }),
            Tok::Ident(s) => write!(f, "{s}"),
            Tok::If => write!(f, "if"),
            Tok::Then => write!(f, "then"),
            Tok::Else => write!(f, "else"),
            Tok::Let => write!(f, "let"),
            Tok::In => write!(f, "in"),
            Tok::Meas => write!(f, "meas"),
            Tok::New => write!(f, "new"),
        }
    }
}

struct Sp {
    tok: Tok,
    line: usize,
    col: usize,
}

fn lex(src: &str) -> Result<Vec<Sp>, ParseError> {
    let mut out = Vec::new();
    let mut line = 1;
    let mut col = 1;
    let chars: Vec<char> = src.chars().collect();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let (tline, tcol) = (line, col);
        let mut push = |tok: Tok| out.push(Sp { tok, line: tline, col: tcol });
        match c {
            '\n' => {
                line += 1;
                col = 1;
                i += 1;
                continue;
            }
            ' ' | '\t' | '\r' => {}
            '-' if chars.get(i + 1) == Some(&'-') => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            '\\' => push(Tok::Backslash),
            '.' => push(Tok::Dot),
            '(' => push(Tok::LParen),
            ')' => push(Tok::RParen),
            '<' => push(Tok::LAngle),
            '>' => push(Tok::RAngle),
            ',' => push(Tok::Comma),
            '=' => push(Tok::Equals),
            '*' => push(Tok::Star),
            '0' | '1' if !chars.get(i + 1).is_some_and(|c| c.is_ascii_alphanumeric()) => {
                push(Tok::Bit(c == '1'))
            }
            c if c.is_ascii_digit() => {
                let start = i;
                while i < chars.len() && chars[i].is_ascii_alphanumeric() {
                    i += 1;
                }
                let lit: String = chars[start..i].iter().collect();
                return Err(ParseError::syntax(
                    tline,
                    tcol,
                    format!("unexpected literal `{lit}`; only bits 0 and 1 exist"),
                ));
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                    i += 1;
                }
                let word: String = chars[start..i].iter().collect();
                col += i - start;
                let tok = match word.as_str() {
                    "if" => Tok::If,
                    "then" => Tok::Then,
                    "else" => Tok::Else,
                    "let" => Tok::Let,
                    "in" => Tok::In,
                    "meas" => Tok::Meas,
                    "new" => Tok::New,
                    _ => Tok::Ident(word),
                };
                out.push(Sp { tok, line: tline, col: tcol });
                continue;
            }
            other => {
                return Err(ParseError::syntax(tline, tcol, format!("unexpected character `{other}`")))
            }
        }
        i += 1;
        col += 1;
    }
    Ok(out)
}

/// Parses a `.qlam` source into a [`Term`], resolving gate names against
/// `gates`.
pub fn parse(source: &str, gates: &GateTable) -> Result<Term, ParseError> {
    let tokens = lex(source)?;
    if tokens.is_empty() {
        return Err(ParseError::syntax(1, 1, "empty program"));
    }
    let mut p = Parser { tokens, pos: 0, gates };
    let term = p.term()?;
    if p.pos != p.tokens.len() {
        let sp = &p.tokens[p.pos];
        return Err(ParseError::syntax(sp.line, sp.col, format!("unexpected `{}` after term", sp.tok)));
    }
    Ok(term)
}

struct Parser<'a> {
    tokens: Vec<Sp>,
    pos: usize,
    gates: &'a GateTable,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|s| &s.tok)
    }

    fn here(&self) -> (usize, usize) {
        self.tokens
            .get(self.pos)
            .or_else(|| self.tokens.last())
            .map(|s| (s.line, s.col))
            .unwrap_or((1, 1))
    }

    fn bump(&mut self) -> &Sp {
        let sp = &self.tokens[self.pos];
        self.pos += 1;
        sp
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        match self.peek() {
            Some(t) if *t == want => {
                self.pos += 1;
                Ok(())
            }
            Some(t) => {
                let (line, col) = self.here();
                Err(ParseError::syntax(line, col, format!("expected `{want}`, found `{t}`")))
            }
            None => {
                let (line, col) = self.here();
                Err(ParseError::syntax(line, col, format!("expected `{want}`, found end of input")))
            }
        }
    }

    /// A binder: an identifier that is neither a gate name nor a reserved
    /// register reference.
    fn binder(&mut self) -> Result<VarName, ParseError> {
        let (line, col) = self.here();
        match self.peek().cloned() {
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                if self.gates.contains(&name) {
                    return Err(ParseError {
                        line,
                        col,
                        message: format!("gate name `{name}` cannot be used as a binder"),
                        kind: ParseErrorKind::ReservedBinder,
                    });
                }
                let v = VarName::new(name);
                if v.is_reserved() {
                    return Err(ParseError {
                        line,
                        col,
                        message: format!(
                            "`{v}` is a reserved register reference and cannot be bound"
                        ),
                        kind: ParseErrorKind::ReservedBinder,
                    });
                }
                Ok(v)
            }
            Some(t) => Err(ParseError::syntax(line, col, format!("expected a variable, found `{t}`"))),
            None => Err(ParseError::syntax(line, col, "expected a variable, found end of input")),
        }
    }

    fn term(&mut self) -> Result<Term, ParseError> {
        match self.peek() {
            Some(Tok::Backslash) => {
                self.bump();
                let x = self.binder()?;
                self.expect(Tok::Dot)?;
                let body = self.term()?;
                Ok(Term::Lambda(x, Box::new(body)))
            }
            Some(Tok::If) => {
                self.bump();
                let p = self.term()?;
                self.expect(Tok::Then)?;
                let m = self.term()?;
                self.expect(Tok::Else)?;
                let n = self.term()?;
                Ok(Term::ite(p, m, n))
            }
            Some(Tok::Let) => {
                self.bump();
                if self.peek() == Some(&Tok::LAngle) {
                    self.bump();
                    let x = self.binder()?;
                    self.expect(Tok::Comma)?;
                    let (yl, yc) = self.here();
                    let y = self.binder()?;
                    if x == y {
                        return Err(ParseError::syntax(
                            yl,
                            yc,
                            format!("pair binders must be distinct, `{x}` is repeated"),
                        ));
                    }
                    self.expect(Tok::RAngle)?;
                    self.expect(Tok::Equals)?;
                    let m = self.term()?;
                    self.expect(Tok::In)?;
                    let n = self.term()?;
                    Ok(Term::LetPair(x, y, Box::new(m), Box::new(n)))
                } else {
                    // let f = M in N  ~>  (\f.N) M
                    let f = self.binder()?;
                    self.expect(Tok::Equals)?;
                    let m = self.term()?;
                    self.expect(Tok::In)?;
                    let n = self.term()?;
                    Ok(Term::app(Term::Lambda(f, Box::new(n)), m))
                }
            }
            _ => self.app_term(),
        }
    }

    fn app_term(&mut self) -> Result<Term, ParseError> {
        let mut t = self.atom()?;
        while self.starts_atom() {
            let arg = self.atom()?;
            t = Term::app(t, arg);
        }
        Ok(t)
    }

    fn starts_atom(&self) -> bool {
        matches!(
            self.peek(),
            Some(
                Tok::Ident(_)
                    | Tok::Bit(_)
                    | Tok::Star
                    | Tok::Meas
                    | Tok::New
                    | Tok::LParen
                    | Tok::LAngle
            )
        )
    }

    fn atom(&mut self) -> Result<Term, ParseError> {
        let (line, col) = self.here();
        match self.peek().cloned() {
            Some(Tok::Ident(name)) => {
                self.pos += 1;
                match self.gates.arity(&name) {
                    Some(arity) => Ok(Term::Gate(GateRef { name, arity })),
                    None => Ok(Term::Var(VarName::new(name))),
                }
            }
            Some(Tok::Bit(b)) => {
                self.pos += 1;
                Ok(Term::Bit(b))
            }
            Some(Tok::Star) => {
                self.pos += 1;
                Ok(Term::Star)
            }
            Some(Tok::Meas) => {
                self.pos += 1;
                Ok(Term::Meas)
            }
            Some(Tok::New) => {
                self.pos += 1;
                Ok(Term::New)
            }
            Some(Tok::LParen) => {
                self.pos += 1;
                let t = self.term()?;
                self.expect(Tok::RParen)?;
                Ok(t)
            }
            Some(Tok::LAngle) => {
                self.pos += 1;
                let mut items = vec![self.term()?];
                while self.peek() == Some(&Tok::Comma) {
                    self.bump();
                    items.push(self.term()?);
                }
                self.expect(Tok::RAngle)?;
                if items.len() < 2 {
                    return Err(ParseError::syntax(
                        line,
                        col,
                        "a pair needs at least two components",
                    ));
                }
                // <M1, ..., Mn> nests to the right.
                let mut t = items.pop().unwrap();
                while let Some(head) = items.pop() {
                    t = Term::pair(head, t);
                }
                Ok(t)
            }
            Some(t) => Err(ParseError::syntax(line, col, format!("expected a term, found `{t}`"))),
            None => Err(ParseError::syntax(line, col, "expected a term, found end of input")),
        }
    }
}
