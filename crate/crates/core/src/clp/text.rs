//! Textual syntax for clauses.
//!
//! ```text
//! p13(V0,V1,V2,M,Mp) :- {V2p = 2, read(A,V1,F) = i(X)}, p14(V0,V1,V2p,M,Mp).
//! ```

use std::fmt;

use thiserror::Error;

use super::{Atom, Clause, Constraint, LinTerm, Pred, Rel, Term};
use crate::program::MethodSig;
use crate::{sym, Int};

pub(super) fn fmt_term(t: &Term, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match t {
        Term::Var(v) => write!(f, "{v}"),
        Term::Int(k) => write!(f, "{k}"),
        Term::Lin(l) => fmt_lin(l, f),
        Term::Functor(name, a) => write!(f, "{name}({a})"),
        Term::Class(c) => write!(f, "'{c}'"),
        Term::Read(a, idx) => {
            write!(f, "read({a}")?;
            for i in idx {
                write!(f, ",{i}")?;
            }
            write!(f, ")")
        }
        Term::Write(a, i, e) => write!(f, "write({a},{i},{e})"),
        Term::Mem(a, i) => write!(f, "[{a},{i}]"),
    }
}

fn fmt_lin(l: &LinTerm, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    let mut first = true;
    for (v, &c) in &l.coeffs {
        let mag = c.unsigned_abs();
        if first {
            if c < 0 {
                write!(f, "-")?;
            }
        } else if c < 0 {
            write!(f, " - ")?;
        } else {
            write!(f, " + ")?;
        }
        if mag != 1 {
            write!(f, "{mag}*")?;
        }
        write!(f, "{v}")?;
        first = false;
    }
    if l.constant != 0 || first {
        if first {
            write!(f, "{}", l.constant)?;
        } else if l.constant < 0 {
            write!(f, " - {}", l.constant.unsigned_abs())?;
        } else {
            write!(f, " + {}", l.constant)?;
        }
    }
    Ok(())
}

fn fmt_args(args: &[Term], f: &mut fmt::Formatter<'_>) -> fmt::Result {
    for (i, a) in args.iter().enumerate() {
        if i > 0 {
            write!(f, ",")?;
        }
        write!(f, "{a}")?;
    }
    Ok(())
}

pub(super) fn fmt_atom(a: &Atom, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    match &a.pred {
        Pred::Point(q) => {
            write!(f, "p{q}(")?;
            fmt_args(&a.args, f)?;
            write!(f, ")")
        }
        Pred::Lookup { method, target } => {
            write!(f, "lookup(")?;
            fmt_args(&a.args, f)?;
            write!(f, ",\"{method}\",{target})")
        }
    }
}

pub(super) fn fmt_clause(c: &Clause, f: &mut fmt::Formatter<'_>) -> fmt::Result {
    write!(f, "{} :- {{", c.head)?;
    for (i, k) in c.constraints.iter().enumerate() {
        if i > 0 {
            write!(f, ", ")?;
        }
        write!(f, "{k}")?;
    }
    write!(f, "}}")?;
    for a in &c.body {
        write!(f, ", {a}")?;
    }
    write!(f, ".")
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("clause syntax error at offset {offset}: {message}")]
pub struct ClpParseError {
    pub offset: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Int(Int),
    Quoted(String),
    Str(String),
    Punct(&'static str),
}

const PUNCTS: [&str; 16] = [
    ":-", "!=", "<=", ">=", "(", ")", "[", "]", "{", "}", ",", ".", "=", "<", ">", "+",
];

fn lex(src: &str) -> Result<Vec<(usize, Tok)>, ClpParseError> {
    let bytes = src.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    let err = |offset, message: &str| ClpParseError {
        offset,
        message: message.to_string(),
    };
    while i < bytes.len() {
        let c = bytes[i] as char;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '%' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
            continue;
        }
        let start = i;
        if c.is_ascii_alphabetic() || c == '_' {
            while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_') {
                i += 1;
            }
            out.push((start, Tok::Ident(src[start..i].to_string())));
        } else if c.is_ascii_digit() {
            while i < bytes.len() && bytes[i].is_ascii_digit() {
                i += 1;
            }
            let k = src[start..i]
                .parse()
                .map_err(|_| err(start, "integer out of range"))?;
            out.push((start, Tok::Int(k)));
        } else if c == '\'' || c == '"' {
            i += 1;
            while i < bytes.len() && bytes[i] as char != c {
                i += 1;
            }
            if i >= bytes.len() {
                return Err(err(start, "unterminated quote"));
            }
            let body = src[start + 1..i].to_string();
            i += 1;
            out.push((start, if c == '\'' { Tok::Quoted(body) } else { Tok::Str(body) }));
        } else if c == '-' {
            i += 1;
            out.push((start, Tok::Punct("-")));
        } else if c == '*' {
            i += 1;
            out.push((start, Tok::Punct("*")));
        } else {
            let p = PUNCTS
                .iter()
                .find(|p| src[i..].starts_with(**p))
                .ok_or_else(|| err(start, &format!("unexpected character {c:?}")))?;
            i += p.len();
            out.push((start, Tok::Punct(p)));
        }
    }
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
    end: usize,
}

impl Parser {
    fn new(src: &str) -> Result<Self, ClpParseError> {
        Ok(Parser {
            toks: lex(src)?,
            pos: 0,
            end: src.len(),
        })
    }

    fn offset(&self) -> usize {
        self.toks.get(self.pos).map_or(self.end, |t| t.0)
    }

    fn err<T>(&self, message: impl Into<String>) -> Result<T, ClpParseError> {
        Err(ClpParseError {
            offset: self.offset(),
            message: message.into(),
        })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|t| &t.1)
    }

    fn peek_at(&self, k: usize) -> Option<&Tok> {
        self.toks.get(self.pos + k).map(|t| &t.1)
    }

    fn at_punct(&self, p: &str) -> bool {
        matches!(self.peek(), Some(Tok::Punct(q)) if *q == p)
    }

    fn eat(&mut self, p: &str) -> bool {
        if self.at_punct(p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, p: &str) -> Result<(), ClpParseError> {
        if self.eat(p) {
            Ok(())
        } else {
            self.err(format!("expected `{p}`"))
        }
    }

    fn done(&self) -> bool {
        self.pos >= self.toks.len()
    }

    fn term(&mut self) -> Result<Term, ClpParseError> {
        let mut parts: Vec<(Int, Term)> = Vec::new();
        let mut sign = if self.eat("-") { -1 } else { 1 };
        loop {
            let (k, t) = self.product()?;
            parts.push((sign * k, t));
            if self.eat("+") {
                sign = 1;
            } else if self.eat("-") {
                sign = -1;
            } else {
                break;
            }
        }
        if parts.len() == 1 && parts[0].0 == 1 {
            return Ok(parts.pop().expect("one part").1);
        }
        let mut sum = LinTerm::default();
        for (k, t) in &parts {
            match t.as_lin() {
                Some(l) => sum.add_scaled(&l, *k),
                None => return self.err(format!("non-integer term {t} in arithmetic")),
            }
        }
        Ok(sum.into_term())
    }

    fn product(&mut self) -> Result<(Int, Term), ClpParseError> {
        if let (Some(Tok::Int(k)), Some(Tok::Punct("*"))) = (self.peek(), self.peek_at(1)) {
            let k = *k;
            self.pos += 2;
            return Ok((k, self.primary()?));
        }
        Ok((1, self.primary()?))
    }

    fn primary(&mut self) -> Result<Term, ClpParseError> {
        let Some(tok) = self.peek().cloned() else {
            return self.err("unexpected end of input");
        };
        self.pos += 1;
        match tok {
            Tok::Int(k) => Ok(Term::Int(k)),
            Tok::Quoted(c) => Ok(Term::Class(sym(&c))),
            Tok::Punct("(") => {
                let t = self.term()?;
                self.expect(")")?;
                Ok(t)
            }
            Tok::Punct("[") => {
                let a = self.term()?;
                self.expect(",")?;
                let i = self.term()?;
                self.expect("]")?;
                Ok(Term::mem(a, i))
            }
            Tok::Ident(name) => {
                if !self.eat("(") {
                    return Ok(Term::Var(sym(&name)));
                }
                let args = self.term_list(")")?;
                match (name.as_str(), args.len()) {
                    ("read", n) if n == 2 || n == 3 => {
                        let mut it = args.into_iter();
                        let a = it.next().expect("array");
                        Ok(Term::Read(Box::new(a), it.collect()))
                    }
                    ("write", 3) => {
                        let mut it = args.into_iter();
                        let a = it.next().expect("array");
                        let i = it.next().expect("index");
                        let e = it.next().expect("elem");
                        Ok(Term::write(a, i, e))
                    }
                    ("read" | "write", _) => self.err(format!("wrong arity for {name}")),
                    (_, 1) => Ok(Term::functor(&name, args.into_iter().next().expect("arg"))),
                    _ => self.err(format!("functor {name} takes one argument")),
                }
            }
            _ => {
                self.pos -= 1;
                self.err("expected a term")
            }
        }
    }

    fn term_list(&mut self, close: &str) -> Result<Vec<Term>, ClpParseError> {
        let mut out = Vec::new();
        if self.eat(close) {
            return Ok(out);
        }
        loop {
            out.push(self.term()?);
            if self.eat(close) {
                return Ok(out);
            }
            self.expect(",")?;
        }
    }

    fn rel(&mut self) -> Result<Rel, ClpParseError> {
        let r = match self.peek() {
            Some(Tok::Punct("=")) => Rel::Eq,
            Some(Tok::Punct("!=")) => Rel::Ne,
            Some(Tok::Punct("<")) => Rel::Lt,
            Some(Tok::Punct("<=")) => Rel::Le,
            Some(Tok::Punct(">")) => Rel::Gt,
            Some(Tok::Punct(">=")) => Rel::Ge,
            _ => return self.err("expected a relation"),
        };
        self.pos += 1;
        Ok(r)
    }

    fn constraint(&mut self) -> Result<Constraint, ClpParseError> {
        let lhs = self.term()?;
        let rel = self.rel()?;
        let rhs = self.term()?;
        Ok(Constraint::new(lhs, rel, rhs))
    }

    fn atom(&mut self) -> Result<Atom, ClpParseError> {
        let Some(Tok::Ident(name)) = self.peek().cloned() else {
            return self.err("expected an atom");
        };
        self.pos += 1;
        self.expect("(")?;
        if name == "lookup" {
            let memory = self.term()?;
            self.expect(",")?;
            let receiver = self.term()?;
            self.expect(",")?;
            let Some(Tok::Str(sig)) = self.peek().cloned() else {
                return self.err("expected a quoted method signature");
            };
            self.pos += 1;
            let method = parse_sig(&sig).ok_or_else(|| ClpParseError {
                offset: self.offset(),
                message: format!("bad method signature {sig:?}"),
            })?;
            self.expect(",")?;
            let Some(Tok::Int(target)) = self.peek().cloned() else {
                return self.err("expected a program point");
            };
            self.pos += 1;
            self.expect(")")?;
            let target = u32::try_from(target).or_else(|_| self.err("bad program point"))?;
            return Ok(Atom::lookup(memory, receiver, method, target));
        }
        let q = name
            .strip_prefix('p')
            .and_then(|d| d.parse::<u32>().ok());
        let Some(q) = q else {
            self.pos -= 2;
            return self.err(format!("unknown predicate {name}"));
        };
        let args = self.term_list(")")?;
        Ok(Atom::point(q, args))
    }

    fn clause(&mut self) -> Result<Clause, ClpParseError> {
        let head = self.atom()?;
        let mut constraints = Vec::new();
        let mut body = Vec::new();
        if self.eat(":-") {
            self.expect("{")?;
            if !self.eat("}") {
                loop {
                    constraints.push(self.constraint()?);
                    if self.eat("}") {
                        break;
                    }
                    self.expect(",")?;
                }
            }
            while self.eat(",") {
                body.push(self.atom()?);
            }
        }
        self.expect(".")?;
        Ok(Clause {
            head,
            constraints,
            body,
        })
    }
}

fn parse_sig(s: &str) -> Option<MethodSig> {
    let (name, params) = s.rsplit_once('/')?;
    if name.is_empty() {
        return None;
    }
    Some(MethodSig {
        name: sym(name),
        params: params.parse().ok()?,
    })
}

fn finish<T>(p: &Parser, v: T) -> Result<T, ClpParseError> {
    if p.done() {
        Ok(v)
    } else {
        p.err("trailing input")
    }
}

pub fn parse_term(src: &str) -> Result<Term, ClpParseError> {
    let mut p = Parser::new(src)?;
    let t = p.term()?;
    finish(&p, t)
}

pub fn parse_constraint(src: &str) -> Result<Constraint, ClpParseError> {
    let mut p = Parser::new(src)?;
    let c = p.constraint()?;
    finish(&p, c)
}

pub fn parse_clause(src: &str) -> Result<Clause, ClpParseError> {
    let mut p = Parser::new(src)?;
    let c = p.clause()?;
    finish(&p, c)
}

/// Parses a sequence of clauses, each terminated by `.`.
pub fn parse_clauses(src: &str) -> Result<Vec<Clause>, ClpParseError> {
    let mut p = Parser::new(src)?;
    let mut out = Vec::new();
    while !p.done() {
        out.push(p.clause()?);
    }
    Ok(out)
}
