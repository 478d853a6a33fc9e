//! Constraint logic programs over integers, objects and memories.
//!
//! Values: integers; objects, which are arrays whose slot 0 holds a class
//! name and whose other slots hold field terms `f(n)`; and heaps, arrays of
//! objects. A memory is the pair `[A, I]` of a heap and the next free
//! location. Variables carry no sort annotation; the solver infers sorts
//! from how a variable is used.

mod iso;
mod text;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use crate::program::{MethodSig, Point};
use crate::{sym, Int, Sym};

pub use iso::{clauses_isomorphic, Renaming};
pub use text::{parse_clause, parse_clauses, parse_constraint, parse_term, ClpParseError};

/// `Σ cᵢ·xᵢ + k`. Always kept normalized: no zero coefficients.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Default)]
pub struct LinTerm {
    pub coeffs: BTreeMap<Sym, Int>,
    pub constant: Int,
}

impl LinTerm {
    pub fn constant(k: Int) -> Self {
        LinTerm {
            coeffs: BTreeMap::new(),
            constant: k,
        }
    }

    pub fn var(v: Sym) -> Self {
        let mut coeffs = BTreeMap::new();
        coeffs.insert(v, 1);
        LinTerm {
            coeffs,
            constant: 0,
        }
    }

    pub fn add_scaled(&mut self, other: &LinTerm, k: Int) {
        self.constant += other.constant * k;
        for (v, c) in &other.coeffs {
            let e = self.coeffs.entry(v.clone()).or_insert(0);
            *e += c * k;
            if *e == 0 {
                self.coeffs.remove(v);
            }
        }
    }

    pub fn sub(&self, other: &LinTerm) -> LinTerm {
        let mut out = self.clone();
        out.add_scaled(other, -1);
        out
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Smallest normalized term with this value.
    pub fn into_term(self) -> Term {
        if self.coeffs.is_empty() {
            return Term::Int(self.constant);
        }
        if self.constant == 0 && self.coeffs.len() == 1 {
            let (v, c) = self.coeffs.iter().next().expect("one coefficient");
            if *c == 1 {
                return Term::Var(v.clone());
            }
        }
        Term::Lin(self)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Term {
    Var(Sym),
    Int(Int),
    /// Linear integer expression; never a bare variable or constant.
    Lin(LinTerm),
    /// Field term `f(n)`.
    Functor(Sym, Box<Term>),
    /// Class name stored in slot 0 of an object.
    Class(Sym),
    /// `a[i]` or, with two indexes, `a[i, j]` meaning `a[i][j]`.
    Read(Box<Term>, Vec<Term>),
    /// `a{i <- e}`.
    Write(Box<Term>, Box<Term>, Box<Term>),
    /// Memory pair `[A, I]`.
    Mem(Box<Term>, Box<Term>),
}

impl Term {
    pub fn var(name: &str) -> Term {
        Term::Var(sym(name))
    }

    pub fn functor(f: &str, arg: Term) -> Term {
        Term::Functor(sym(f), Box::new(arg))
    }

    pub fn class(name: &str) -> Term {
        Term::Class(sym(name))
    }

    pub fn read(array: Term, index: Term) -> Term {
        Term::Read(Box::new(array), vec![index])
    }

    pub fn read2(array: Term, i: Term, j: Term) -> Term {
        Term::Read(Box::new(array), vec![i, j])
    }

    pub fn write(array: Term, index: Term, elem: Term) -> Term {
        Term::Write(Box::new(array), Box::new(index), Box::new(elem))
    }

    pub fn mem(array: Term, next: Term) -> Term {
        Term::Mem(Box::new(array), Box::new(next))
    }

    /// Linear view of an integer-shaped term.
    pub fn as_lin(&self) -> Option<LinTerm> {
        match self {
            Term::Var(v) => Some(LinTerm::var(v.clone())),
            Term::Int(k) => Some(LinTerm::constant(*k)),
            Term::Lin(l) => Some(l.clone()),
            _ => None,
        }
    }

    /// `self + k` for integer-shaped terms.
    pub fn plus(&self, k: Int) -> Term {
        let mut l = self.as_lin().expect("plus on an integer term");
        l.constant += k;
        l.into_term()
    }

    pub fn as_var(&self) -> Option<&Sym> {
        match self {
            Term::Var(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_int_shaped(&self) -> bool {
        matches!(self, Term::Var(_) | Term::Int(_) | Term::Lin(_))
    }

    /// Variables in order of first occurrence, without duplicates.
    pub fn collect_vars(&self, out: &mut Vec<Sym>, seen: &mut HashSet<Sym>) {
        match self {
            Term::Var(v) => {
                if seen.insert(v.clone()) {
                    out.push(v.clone());
                }
            }
            Term::Int(_) | Term::Class(_) => {}
            Term::Lin(l) => {
                for v in l.coeffs.keys() {
                    if seen.insert(v.clone()) {
                        out.push(v.clone());
                    }
                }
            }
            Term::Functor(_, a) => a.collect_vars(out, seen),
            Term::Read(a, idx) => {
                a.collect_vars(out, seen);
                for i in idx {
                    i.collect_vars(out, seen);
                }
            }
            Term::Write(a, i, e) => {
                a.collect_vars(out, seen);
                i.collect_vars(out, seen);
                e.collect_vars(out, seen);
            }
            Term::Mem(a, i) => {
                a.collect_vars(out, seen);
                i.collect_vars(out, seen);
            }
        }
    }

    pub fn vars(&self) -> Vec<Sym> {
        let mut out = Vec::new();
        self.collect_vars(&mut out, &mut HashSet::new());
        out
    }

    pub fn mentions(&self, v: &str) -> bool {
        match self {
            Term::Var(x) => &**x == v,
            Term::Int(_) | Term::Class(_) => false,
            Term::Lin(l) => l.coeffs.keys().any(|x| &**x == v),
            Term::Functor(_, a) => a.mentions(v),
            Term::Read(a, idx) => a.mentions(v) || idx.iter().any(|i| i.mentions(v)),
            Term::Write(a, i, e) => a.mentions(v) || i.mentions(v) || e.mentions(v),
            Term::Mem(a, i) => a.mentions(v) || i.mentions(v),
        }
    }

    /// Applies a substitution. Variables inside linear terms must be mapped
    /// to integer-shaped terms.
    pub fn substitute(&self, s: &HashMap<Sym, Term>) -> Term {
        if s.is_empty() {
            return self.clone();
        }
        match self {
            Term::Var(v) => s.get(v).cloned().unwrap_or_else(|| self.clone()),
            Term::Int(_) | Term::Class(_) => self.clone(),
            Term::Lin(l) => {
                if !l.coeffs.keys().any(|v| s.contains_key(v)) {
                    return self.clone();
                }
                let mut out = LinTerm::constant(l.constant);
                for (v, c) in &l.coeffs {
                    match s.get(v) {
                        Some(t) => {
                            let tl = t
                                .as_lin()
                                .unwrap_or_else(|| panic!("non-integer {t} substituted for {v}"));
                            out.add_scaled(&tl, *c);
                        }
                        None => out.add_scaled(&LinTerm::var(v.clone()), *c),
                    }
                }
                out.into_term()
            }
            Term::Functor(f, a) => Term::Functor(f.clone(), Box::new(a.substitute(s))),
            Term::Read(a, idx) => Term::Read(
                Box::new(a.substitute(s)),
                idx.iter().map(|i| i.substitute(s)).collect(),
            ),
            Term::Write(a, i, e) => Term::write(a.substitute(s), i.substitute(s), e.substitute(s)),
            Term::Mem(a, i) => Term::mem(a.substitute(s), i.substitute(s)),
        }
    }

    /// Renames variables; unlike `substitute` this never changes the shape.
    pub fn rename(&self, f: &mut impl FnMut(&Sym) -> Sym) -> Term {
        match self {
            Term::Var(v) => Term::Var(f(v)),
            Term::Int(_) | Term::Class(_) => self.clone(),
            Term::Lin(l) => Term::Lin(LinTerm {
                coeffs: l.coeffs.iter().map(|(v, c)| (f(v), *c)).collect(),
                constant: l.constant,
            }),
            Term::Functor(name, a) => Term::Functor(name.clone(), Box::new(a.rename(f))),
            Term::Read(a, idx) => {
                Term::Read(Box::new(a.rename(f)), idx.iter().map(|i| i.rename(f)).collect())
            }
            Term::Write(a, i, e) => Term::write(a.rename(f), i.rename(f), e.rename(f)),
            Term::Mem(a, i) => Term::mem(a.rename(f), i.rename(f)),
        }
    }
}

impl From<Int> for Term {
    fn from(k: Int) -> Self {
        Term::Int(k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Rel {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl Rel {
    pub fn negate(self) -> Rel {
        match self {
            Rel::Eq => Rel::Ne,
            Rel::Ne => Rel::Eq,
            Rel::Lt => Rel::Ge,
            Rel::Le => Rel::Gt,
            Rel::Gt => Rel::Le,
            Rel::Ge => Rel::Lt,
        }
    }

    /// Relation obtained by swapping the operands.
    pub fn flip(self) -> Rel {
        match self {
            Rel::Lt => Rel::Gt,
            Rel::Le => Rel::Ge,
            Rel::Gt => Rel::Lt,
            Rel::Ge => Rel::Le,
            r => r,
        }
    }

    pub fn is_ordering(self) -> bool {
        !matches!(self, Rel::Eq | Rel::Ne)
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Eq => "=",
            Rel::Ne => "!=",
            Rel::Lt => "<",
            Rel::Le => "<=",
            Rel::Gt => ">",
            Rel::Ge => ">=",
        }
    }

    pub fn holds(self, ord: std::cmp::Ordering) -> bool {
        use std::cmp::Ordering::*;
        match self {
            Rel::Eq => ord == Equal,
            Rel::Ne => ord != Equal,
            Rel::Lt => ord == Less,
            Rel::Le => ord != Greater,
            Rel::Gt => ord == Greater,
            Rel::Ge => ord != Less,
        }
    }
}

/// `lhs rel rhs`. Ordering relations apply to integer terms only; `=` and
/// `!=` apply to any sort.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Constraint {
    pub lhs: Term,
    pub rel: Rel,
    pub rhs: Term,
}

impl Constraint {
    pub fn new(lhs: Term, rel: Rel, rhs: Term) -> Self {
        Constraint { lhs, rel, rhs }
    }

    pub fn eq(lhs: Term, rhs: Term) -> Self {
        Constraint::new(lhs, Rel::Eq, rhs)
    }

    pub fn ne(lhs: Term, rhs: Term) -> Self {
        Constraint::new(lhs, Rel::Ne, rhs)
    }

    pub fn lt(lhs: Term, rhs: Term) -> Self {
        Constraint::new(lhs, Rel::Lt, rhs)
    }

    pub fn gt(lhs: Term, rhs: Term) -> Self {
        Constraint::new(lhs, Rel::Gt, rhs)
    }

    pub fn ge(lhs: Term, rhs: Term) -> Self {
        Constraint::new(lhs, Rel::Ge, rhs)
    }

    pub fn negate(&self) -> Constraint {
        Constraint::new(self.lhs.clone(), self.rel.negate(), self.rhs.clone())
    }

    pub fn substitute(&self, s: &HashMap<Sym, Term>) -> Constraint {
        Constraint::new(self.lhs.substitute(s), self.rel, self.rhs.substitute(s))
    }

    pub fn rename(&self, f: &mut impl FnMut(&Sym) -> Sym) -> Constraint {
        Constraint::new(self.lhs.rename(f), self.rel, self.rhs.rename(f))
    }

    pub fn collect_vars(&self, out: &mut Vec<Sym>, seen: &mut HashSet<Sym>) {
        self.lhs.collect_vars(out, seen);
        self.rhs.collect_vars(out, seen);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Pred {
    /// `p_q`.
    Point(Point),
    /// `lookup_P(M, receiver, m, q_m')`: succeeds when dynamic dispatch of
    /// `method` on the receiver's class selects the method starting at
    /// `target`. Arguments are `[memory, receiver]`.
    Lookup { method: MethodSig, target: Point },
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub pred: Pred,
    pub args: Vec<Term>,
}

impl Atom {
    pub fn point(q: Point, args: Vec<Term>) -> Self {
        Atom {
            pred: Pred::Point(q),
            args,
        }
    }

    pub fn lookup(memory: Term, receiver: Term, method: MethodSig, target: Point) -> Self {
        Atom {
            pred: Pred::Lookup { method, target },
            args: vec![memory, receiver],
        }
    }

    pub fn point_of(&self) -> Option<Point> {
        match self.pred {
            Pred::Point(q) => Some(q),
            Pred::Lookup { .. } => None,
        }
    }

    pub fn substitute(&self, s: &HashMap<Sym, Term>) -> Atom {
        Atom {
            pred: self.pred.clone(),
            args: self.args.iter().map(|a| a.substitute(s)).collect(),
        }
    }

    pub fn rename(&self, f: &mut impl FnMut(&Sym) -> Sym) -> Atom {
        Atom {
            pred: self.pred.clone(),
            args: self.args.iter().map(|a| a.rename(f)).collect(),
        }
    }

    pub fn collect_vars(&self, out: &mut Vec<Sym>, seen: &mut HashSet<Sym>) {
        for a in &self.args {
            a.collect_vars(out, seen);
        }
    }

    /// Register arguments of a `p_q` atom (all but the two memories).
    pub fn registers(&self) -> &[Term] {
        &self.args[..self.args.len().saturating_sub(2)]
    }
}

/// `head <- constraints, body`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Clause {
    pub head: Atom,
    pub constraints: Vec<Constraint>,
    pub body: Vec<Atom>,
}

impl Clause {
    pub fn vars(&self) -> Vec<Sym> {
        let mut out = Vec::new();
        let mut seen = HashSet::new();
        self.head.collect_vars(&mut out, &mut seen);
        for c in &self.constraints {
            c.collect_vars(&mut out, &mut seen);
        }
        for a in &self.body {
            a.collect_vars(&mut out, &mut seen);
        }
        out
    }

    pub fn rename(&self, f: &mut impl FnMut(&Sym) -> Sym) -> Clause {
        Clause {
            head: self.head.rename(f),
            constraints: self.constraints.iter().map(|c| c.rename(f)).collect(),
            body: self.body.iter().map(|a| a.rename(f)).collect(),
        }
    }

    /// Renames every variable `X` to `X#<suffix>`.
    pub fn rename_apart(&self, suffix: usize) -> Clause {
        self.rename(&mut |v| fresh_name(v, suffix))
    }
}

/// `X#<n>`, replacing an earlier renaming suffix. `#` never occurs in
/// parsed names, so renamed variables cannot capture written ones.
pub fn fresh_name(v: &str, n: usize) -> Sym {
    sym(&format!("{}#{n}", base_name(v)))
}

/// Variable name without its `#<n>` renaming suffix.
pub fn base_name(v: &str) -> &str {
    v.split_once('#').map_or(v, |(base, _)| base)
}

/// Register input variable `V<k>`.
pub fn reg_in(k: usize) -> Term {
    Term::Var(sym(&format!("V{k}")))
}

/// Register output variable `V<k>p` (written `V'_k` in the rules).
pub fn reg_out(k: usize) -> Term {
    Term::Var(sym(&format!("V{k}p")))
}

/// `id`: `{V'_k = V_k | 0 <= k < r}`.
pub fn id_seq(r: usize) -> Vec<Constraint> {
    (0..r).map(|k| Constraint::eq(reg_out(k), reg_in(k))).collect()
}

/// `id_{-d}`: `id` without `V'_d = V_d`. Returns `None` when `d >= r`.
pub fn id_except(r: usize, d: usize) -> Option<Vec<Constraint>> {
    if d >= r {
        return None;
    }
    Some(
        (0..r)
            .filter(|&k| k != d)
            .map(|k| Constraint::eq(reg_out(k), reg_in(k)))
            .collect(),
    )
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        text::fmt_term(self, f)
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} {} {}", self.lhs, self.rel.symbol(), self.rhs)
    }
}

impl fmt::Display for Atom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        text::fmt_atom(self, f)
    }
}

impl fmt::Display for Clause {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        text::fmt_clause(self, f)
    }
}

/// One clause per line.
pub fn pretty_program(clauses: &[Clause]) -> String {
    let mut out = String::new();
    for c in clauses {
        out.push_str(&c.to_string());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn show(cs: &[Constraint]) -> Vec<String> {
        cs.iter().map(|c| c.to_string()).collect()
    }

    #[test]
    fn id_sequences() {
        assert_eq!(
            show(&id_seq(4)),
            ["V0p = V0", "V1p = V1", "V2p = V2", "V3p = V3"]
        );
        assert!(id_seq(0).is_empty());
        assert_eq!(show(&id_seq(1)), ["V0p = V0"]);
    }

    #[test]
    fn id_except_drops_one_register() {
        assert_eq!(
            show(&id_except(4, 0).unwrap()),
            ["V1p = V1", "V2p = V2", "V3p = V3"]
        );
        assert!(id_except(1, 0).unwrap().is_empty());
        let five = id_except(5, 2).unwrap();
        assert_eq!(five.len(), 4);
        assert!(!show(&five).contains(&"V2p = V2".to_string()));
        assert!(id_except(3, 3).is_none());
    }

    #[test]
    fn linear_terms_normalize() {
        let x = Term::var("X");
        assert_eq!(x.plus(0), x);
        assert_eq!(x.plus(1).plus(-1), x);
        assert_eq!(Term::Int(2).plus(3), Term::Int(5));
        let mut s = HashMap::new();
        s.insert(sym("X"), Term::var("Y").plus(1));
        assert_eq!(x.plus(-1).substitute(&s), Term::var("Y"));
    }

    #[test]
    fn renaming_suffixes() {
        assert_eq!(&*fresh_name("O1", 3), "O1#3");
        assert_eq!(&*fresh_name("O1#3", 4), "O1#4");
        assert_ne!(fresh_name("X", 2), fresh_name("X_1", 2));
        assert_eq!(base_name("V0p#12"), "V0p");
        assert_eq!(base_name("_7"), "_7");
    }
}
