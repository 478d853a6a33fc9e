//! Rewriting of constraint stores into smaller equivalent ones.
//!
//! Rewrites preserve the set of solutions projected onto the protected
//! variables. Unprotected variables defined by an equation are substituted
//! away and reported in [`Simplified::subst`], so callers can apply the
//! same substitution to the atoms that share the store.

use std::collections::{HashMap, HashSet};

use crate::clp::{Constraint, LinTerm, Rel, Term};
use crate::program::Layouts;
use crate::{sym, Int, Sym};

#[derive(Debug, Clone, Default)]
pub struct Simplified {
    pub constraints: Vec<Constraint>,
    /// Eliminated variable to its value over the remaining variables.
    pub subst: HashMap<Sym, Term>,
    /// A contradiction was found; `constraints` is meaningless.
    pub unsat: bool,
}

/// Source of variable names that cannot clash with compiled or parsed ones.
#[derive(Debug, Clone, Default)]
pub struct Fresh(usize);

impl Fresh {
    pub fn var(&mut self) -> Sym {
        self.0 += 1;
        sym(&format!("_{}", self.0))
    }
}

/// `i - j` when it is a constant.
fn index_diff(i: &Term, j: &Term) -> Option<Int> {
    let d = i.as_lin()?.sub(&j.as_lin()?);
    d.is_constant().then_some(d.constant)
}

fn read1(a: Term, i: Term) -> Term {
    let mut cur = &a;
    while let Term::Write(b, k, e) = cur {
        match index_diff(k, &i) {
            Some(0) => return (**e).clone(),
            Some(_) => cur = b,
            None => break,
        }
    }
    Term::Read(Box::new(cur.clone()), vec![i])
}

fn write1(a: Term, i: Term, e: Term) -> Term {
    if let Term::Write(b, k, _) = &a {
        if index_diff(k, &i) == Some(0) {
            return write1((**b).clone(), i, e);
        }
    }
    // Writing the value a cell already holds.
    if read1(a.clone(), i.clone()) == e {
        return a;
    }
    Term::write(a, i, e)
}

/// Normal form of a term: reads are single-index and pushed through
/// writes at provably distinct indexes.
pub fn norm(t: &Term) -> Term {
    match t {
        Term::Var(_) | Term::Int(_) | Term::Lin(_) | Term::Class(_) => t.clone(),
        Term::Functor(f, a) => Term::Functor(f.clone(), Box::new(norm(a))),
        Term::Mem(a, i) => Term::mem(norm(a), norm(i)),
        Term::Read(a, idx) => idx.iter().fold(norm(a), |cur, i| read1(cur, norm(i))),
        Term::Write(a, i, e) => write1(norm(a), norm(i), norm(e)),
    }
}

/// Folds `a[i][j]` back into the two-index form.
pub fn collapse(t: &Term) -> Term {
    match t {
        Term::Var(_) | Term::Int(_) | Term::Lin(_) | Term::Class(_) => t.clone(),
        Term::Functor(f, a) => Term::Functor(f.clone(), Box::new(collapse(a))),
        Term::Mem(a, i) => Term::mem(collapse(a), collapse(i)),
        Term::Write(a, i, e) => Term::write(collapse(a), collapse(i), collapse(e)),
        Term::Read(a, idx) => {
            let a = collapse(a);
            let idx: Vec<Term> = idx.iter().map(collapse).collect();
            match a {
                Term::Read(inner, first) if first.len() == 1 && idx.len() == 1 => {
                    Term::Read(inner, vec![first[0].clone(), idx[0].clone()])
                }
                a => Term::Read(Box::new(a), idx),
            }
        }
    }
}

fn lin_eval(l: &LinTerm, r: &LinTerm, rel: Rel) -> Option<bool> {
    let d = l.sub(r);
    d.is_constant().then(|| rel.holds(d.constant.cmp(&0)))
}

/// Splits a normalized constraint into simpler ones. Returns false on a
/// contradiction.
fn decompose(c: Constraint, out: &mut Vec<Constraint>) -> bool {
    let Constraint { lhs, rel, rhs } = c;
    if let (Some(l), Some(r)) = (lhs.as_lin(), rhs.as_lin()) {
        return match lin_eval(&l, &r, rel) {
            Some(b) => b,
            None => {
                out.push(Constraint::new(lhs, rel, rhs));
                true
            }
        };
    }
    if rel.is_ordering() {
        out.push(Constraint::new(lhs, rel, rhs));
        return true;
    }
    let eq = rel == Rel::Eq;
    if lhs == rhs {
        return eq;
    }
    match (&lhs, &rhs) {
        (Term::Mem(a, i), Term::Mem(b, j)) if eq => {
            decompose(Constraint::eq((**a).clone(), (**b).clone()), out)
                && decompose(Constraint::eq((**i).clone(), (**j).clone()), out)
        }
        (Term::Functor(f, x), Term::Functor(g, y)) => {
            if f != g {
                !eq
            } else {
                decompose(Constraint::new((**x).clone(), rel, (**y).clone()), out)
            }
        }
        (Term::Class(a), Term::Class(b)) => (a == b) == eq,
        (Term::Class(_), Term::Functor(..)) | (Term::Functor(..), Term::Class(_)) => !eq,
        _ => {
            out.push(Constraint::new(lhs, rel, rhs));
            true
        }
    }
}

fn flipped(c: &Constraint) -> Constraint {
    Constraint::new(c.rhs.clone(), c.rel.flip(), c.lhs.clone())
}

fn lin_vars(cs: &[Constraint], subst: &HashMap<Sym, Term>) -> HashSet<Sym> {
    fn walk(t: &Term, out: &mut HashSet<Sym>) {
        match t {
            Term::Lin(l) => out.extend(l.coeffs.keys().cloned()),
            Term::Functor(_, a) => walk(a, out),
            Term::Read(a, idx) => {
                walk(a, out);
                idx.iter().for_each(|i| walk(i, out));
            }
            Term::Write(a, i, e) => {
                walk(a, out);
                walk(i, out);
                walk(e, out);
            }
            Term::Mem(a, i) => {
                walk(a, out);
                walk(i, out);
            }
            Term::Var(_) | Term::Int(_) | Term::Class(_) => {}
        }
    }
    let mut out = HashSet::new();
    for c in cs {
        walk(&c.lhs, &mut out);
        walk(&c.rhs, &mut out);
    }
    for t in subst.values() {
        walk(t, &mut out);
    }
    out
}

struct Run<'a> {
    protected: &'a HashSet<Sym>,
    layouts: &'a Layouts,
    cs: Vec<Constraint>,
    subst: HashMap<Sym, Term>,
}

impl Run<'_> {
    /// Normalizes, decomposes and deduplicates the store.
    fn normalize(&mut self) -> bool {
        let mut out = Vec::with_capacity(self.cs.len());
        for c in std::mem::take(&mut self.cs) {
            let c = Constraint::new(norm(&c.lhs), c.rel, norm(&c.rhs));
            if !decompose(c, &mut out) {
                return false;
            }
        }
        let mut seen = HashSet::new();
        for c in out {
            if !seen.contains(&c) && !seen.contains(&flipped(&c)) {
                seen.insert(c.clone());
                self.cs.push(c);
            }
        }
        true
    }

    /// Equal reads have equal values.
    fn congruence(&mut self) {
        let mut values: HashMap<Term, Term> = HashMap::new();
        for c in &mut self.cs {
            if c.rel != Rel::Eq {
                continue;
            }
            let (read, value) = match (&c.lhs, &c.rhs) {
                (Term::Read(..), v) => (c.lhs.clone(), v.clone()),
                (v, Term::Read(..)) => (c.rhs.clone(), v.clone()),
                _ => continue,
            };
            match values.get(&read) {
                Some(known) => *c = Constraint::eq(known.clone(), value),
                None => {
                    values.insert(read, value);
                }
            }
        }
    }

    /// Fixes the slot of `o[F] = f(..)` when the layouts allow one slot only.
    fn slots(&mut self) -> bool {
        if self.layouts.is_empty() {
            return true;
        }
        let mut extra = Vec::new();
        for c in &self.cs {
            if c.rel != Rel::Eq {
                continue;
            }
            let (o, idx, field) = match (&c.lhs, &c.rhs) {
                (Term::Read(o, idx), Term::Functor(f, _)) | (Term::Functor(f, _), Term::Read(o, idx))
                    if idx.len() == 1 =>
                {
                    (&**o, &idx[0], f)
                }
                _ => continue,
            };
            let class = read1(o.clone(), Term::Int(0));
            let (slot, class_eq) = match &class {
                Term::Class(name) => match self.layouts.slot_in(name, field) {
                    Some(k) => (k, None),
                    None => return false,
                },
                _ => {
                    let opts = self.layouts.slots_of(field);
                    let Some((c0, k0)) = opts.first().cloned() else {
                        return false;
                    };
                    if opts.iter().any(|(_, k)| *k != k0) {
                        continue;
                    }
                    let class_eq = (opts.len() == 1).then(|| Constraint::eq(class.clone(), Term::Class(c0)));
                    (k0, class_eq)
                }
            };
            match idx {
                Term::Int(k) if *k != slot => return false,
                Term::Int(_) => {}
                _ => extra.push(Constraint::eq(idx.clone(), Term::Int(slot))),
            }
            extra.extend(class_eq);
        }
        for c in extra {
            if !self.cs.contains(&c) && !self.cs.contains(&flipped(&c)) {
                self.cs.push(c);
            }
        }
        true
    }

    fn eliminable(&self, v: &Sym, t: &Term, lin: &HashSet<Sym>) -> bool {
        !self.protected.contains(v) && !t.mentions(v) && (t.is_int_shaped() || !lin.contains(v))
    }

    /// Finds a definition `X = t` of an unprotected variable.
    fn definition(&self) -> Option<(usize, Sym, Term)> {
        let lin = lin_vars(&self.cs, &self.subst);
        for (k, c) in self.cs.iter().enumerate() {
            if c.rel != Rel::Eq {
                continue;
            }
            if let Term::Var(x) = &c.lhs {
                if self.eliminable(x, &c.rhs, &lin) {
                    return Some((k, x.clone(), c.rhs.clone()));
                }
            }
            if let Term::Var(y) = &c.rhs {
                if self.eliminable(y, &c.lhs, &lin) {
                    return Some((k, y.clone(), c.lhs.clone()));
                }
            }
            if let (Some(l), Some(r)) = (c.lhs.as_lin(), c.rhs.as_lin()) {
                let d = l.sub(&r);
                let unit = d
                    .coeffs
                    .iter()
                    .find(|(v, c)| c.abs() == 1 && !self.protected.contains(*v));
                if let Some((v, c)) = unit {
                    // c·v + rest = 0, so v = -c·rest.
                    let mut rest = d.clone();
                    rest.coeffs.remove(v);
                    let mut val = LinTerm::default();
                    val.add_scaled(&rest, -c);
                    return Some((k, v.clone(), val.into_term()));
                }
            }
        }
        None
    }

    /// `O[k] = e` with `O` free becomes `O = O'{k <- e}` for a fresh `O'`.
    fn constant_read(&self, fresh: &mut Fresh) -> Option<(usize, Sym, Term)> {
        let lin = lin_vars(&self.cs, &self.subst);
        for (k, c) in self.cs.iter().enumerate() {
            if c.rel != Rel::Eq {
                continue;
            }
            for (side, other) in [(&c.lhs, &c.rhs), (&c.rhs, &c.lhs)] {
                let Term::Read(a, idx) = side else { continue };
                let (Term::Var(o), [Term::Int(i)]) = (&**a, idx.as_slice()) else {
                    continue;
                };
                if self.protected.contains(o) || lin.contains(o) || other.mentions(o) {
                    continue;
                }
                let def = Term::write(Term::Var(fresh.var()), Term::Int(*i), other.clone());
                return Some((k, o.clone(), def));
            }
        }
        None
    }

    fn eliminate(&mut self, k: usize, v: Sym, t: Term) {
        self.cs.remove(k);
        let one: HashMap<Sym, Term> = [(v.clone(), t.clone())].into_iter().collect();
        for c in &mut self.cs {
            *c = c.substitute(&one);
        }
        for u in self.subst.values_mut() {
            *u = u.substitute(&one);
        }
        self.subst.insert(v, t);
    }
}

/// Simplifies `cs`, never eliminating a variable in `protected`.
pub fn simplify(
    cs: &[Constraint],
    protected: &HashSet<Sym>,
    layouts: &Layouts,
    fresh: &mut Fresh,
) -> Simplified {
    let mut run = Run {
        protected,
        layouts,
        cs: cs.to_vec(),
        subst: HashMap::new(),
    };
    let unsat = Simplified {
        unsat: true,
        ..Simplified::default()
    };
    // Each round either eliminates a variable or reaches a fixpoint; the
    // bound only guards against rewrite cycles.
    for _ in 0..10_000 {
        if !run.normalize() {
            return unsat;
        }
        let before = run.cs.clone();
        run.congruence();
        if !run.slots() {
            return unsat;
        }
        if run.cs != before {
            continue;
        }
        if let Some((k, v, t)) = run.definition().or_else(|| run.constant_read(fresh)) {
            run.eliminate(k, v, t);
            continue;
        }
        break;
    }
    let constraints = run
        .cs
        .iter()
        .map(|c| Constraint::new(collapse(&c.lhs), c.rel, collapse(&c.rhs)))
        .collect();
    let subst = run
        .subst
        .iter()
        .map(|(v, t)| (v.clone(), collapse(&norm(t))))
        .collect();
    Simplified {
        constraints,
        subst,
        unsat: false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clp::{parse_constraint, parse_term};

    fn run(src: &[&str], protected: &[&str], layouts: &Layouts) -> Simplified {
        let cs: Vec<Constraint> = src.iter().map(|s| parse_constraint(s).unwrap()).collect();
        let p: HashSet<Sym> = protected.iter().map(|s| sym(s)).collect();
        simplify(&cs, &p, layouts, &mut Fresh::default())
    }

    fn texts(s: &Simplified) -> Vec<String> {
        s.constraints.iter().map(|c| c.to_string()).collect()
    }

    fn loops() -> Layouts {
        Layouts([(sym("Loops"), vec![sym("i")])].into_iter().collect())
    }

    #[test]
    fn read_over_write_normal_form() {
        let t = parse_term("read(write(write(A,1,f(X)),2,g(Y)),1)").unwrap();
        assert_eq!(norm(&t).to_string(), "f(X)");
        let t = parse_term("read(write(A,I,f(X)),J)").unwrap();
        assert_eq!(norm(&t).to_string(), "read(write(A,I,f(X)),J)");
        let t = parse_term("write(write(A,I,f(X)),I,g(Y))").unwrap();
        assert_eq!(norm(&t).to_string(), "write(A,I,g(Y))");
        let t = parse_term("read(A,I,J)").unwrap();
        assert_eq!(collapse(&norm(&t)), t);
        let t = parse_term("write(write(write(O,0,'C'),1,f(0)),0,'C')").unwrap();
        assert_eq!(norm(&t).to_string(), "write(write(O,0,'C'),1,f(0))");
    }

    #[test]
    fn eliminates_unprotected_definitions() {
        let s = run(&["M = [A,I]", "Y = X + 1", "Y < Z", "Mp = M"], &["X", "Z", "Mp"], &Layouts::default());
        assert!(!s.unsat);
        let mut got = texts(&s);
        got.sort();
        assert_eq!(got, ["Mp = [A,I]", "X + 1 < Z"]);
        assert_eq!(s.subst[&sym("Y")].to_string(), "X + 1");
        assert_eq!(s.subst[&sym("M")].to_string(), "[A,I]");
    }

    #[test]
    fn contradictions() {
        for src in [
            &["X = 1", "X = 2"][..],
            &["f(X) = g(Y)"],
            &["'A' = 'B'"],
            &["read(O,1) = f(1)", "read(O,1) = f(2)"],
            &["X = 1", "X < 1"],
        ] {
            assert!(run(src, &[], &Layouts::default()).unsat, "{src:?}");
        }
    }

    #[test]
    fn slot_rule_fixes_field_index() {
        let s = run(&["read(A,V,F) = i(X)"], &["A", "V", "X"], &loops());
        assert_eq!(texts(&s), ["read(A,V,1) = i(X)", "read(A,V,0) = 'Loops'"]);
        assert_eq!(s.subst[&sym("F")], Term::Int(1));
        assert!(run(&["read(A,V,F) = j(X)"], &["A"], &loops()).unsat);
    }

    #[test]
    fn constant_reads_build_objects() {
        let s = run(
            &["read(O,0) = 'Loops'", "read(O,1) = i(0)", "A1 = write(A,I,O)", "read(A1,I,1) = i(Z)"],
            &["A", "I"],
            &loops(),
        );
        assert!(!s.unsat);
        assert_eq!(s.subst[&sym("Z")], Term::Int(0));
        assert!(s.constraints.is_empty(), "{:?}", texts(&s));
    }
}
