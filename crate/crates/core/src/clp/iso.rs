//! Clause equality up to a bijective renaming of variables.
//!
//! Constraints are compared as a set. `=` and `!=` are symmetric, `>` and
//! `>=` are read as flipped `<` and `<=`, and integer constraints whose
//! sides are not both plain variables are compared as `lhs - rhs rel 0`.

use std::collections::BTreeMap;

use super::{Atom, Clause, Constraint, LinTerm, Rel, Term};
use crate::Sym;

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Renaming {
    fwd: BTreeMap<Sym, Sym>,
    bwd: BTreeMap<Sym, Sym>,
}

impl Renaming {
    pub fn get(&self, v: &str) -> Option<&Sym> {
        self.fwd.get(v)
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&Sym, &Sym)> {
        self.fwd.iter()
    }

    fn bind(&mut self, a: &Sym, b: &Sym) -> bool {
        match (self.fwd.get(a), self.bwd.get(b)) {
            (Some(x), Some(y)) => x == b && y == a,
            (None, None) => {
                self.fwd.insert(a.clone(), b.clone());
                self.bwd.insert(b.clone(), a.clone());
                true
            }
            _ => false,
        }
    }
}

/// All extensions of `r` under which `a` renames to `b`.
fn match_term(a: &Term, b: &Term, r: &Renaming) -> Vec<Renaming> {
    match (a, b) {
        (Term::Var(x), Term::Var(y)) => {
            let mut r = r.clone();
            if r.bind(x, y) {
                vec![r]
            } else {
                vec![]
            }
        }
        (Term::Int(x), Term::Int(y)) if x == y => vec![r.clone()],
        (Term::Class(x), Term::Class(y)) if x == y => vec![r.clone()],
        (Term::Lin(x), Term::Lin(y)) => match_lin(x, y, r),
        (Term::Functor(f, x), Term::Functor(g, y)) if f == g => match_term(x, y, r),
        (Term::Read(a1, i1), Term::Read(a2, i2)) if i1.len() == i2.len() => {
            let mut pairs = vec![(&**a1, &**a2)];
            pairs.extend(i1.iter().zip(i2));
            match_pairs(&pairs, r)
        }
        (Term::Write(a1, i1, e1), Term::Write(a2, i2, e2)) => {
            match_pairs(&[(&**a1, &**a2), (&**i1, &**i2), (&**e1, &**e2)], r)
        }
        (Term::Mem(a1, i1), Term::Mem(a2, i2)) => match_pairs(&[(&**a1, &**a2), (&**i1, &**i2)], r),
        _ => vec![],
    }
}

fn match_pairs(pairs: &[(&Term, &Term)], r: &Renaming) -> Vec<Renaming> {
    let mut frontier = vec![r.clone()];
    for (a, b) in pairs {
        frontier = frontier.iter().flat_map(|r| match_term(a, b, r)).collect();
        if frontier.is_empty() {
            break;
        }
    }
    frontier
}

fn match_lin(a: &LinTerm, b: &LinTerm, r: &Renaming) -> Vec<Renaming> {
    if a.constant != b.constant || a.coeffs.len() != b.coeffs.len() {
        return vec![];
    }
    let av: Vec<(&Sym, i64)> = a.coeffs.iter().map(|(v, c)| (v, *c)).collect();
    let bv: Vec<(&Sym, i64)> = b.coeffs.iter().map(|(v, c)| (v, *c)).collect();
    let mut out = Vec::new();
    let mut used = vec![false; bv.len()];
    lin_rec(&av, &bv, 0, &mut used, r.clone(), &mut out);
    out
}

fn lin_rec(
    av: &[(&Sym, i64)],
    bv: &[(&Sym, i64)],
    k: usize,
    used: &mut [bool],
    r: Renaming,
    out: &mut Vec<Renaming>,
) {
    if k == av.len() {
        out.push(r);
        return;
    }
    let (x, c) = av[k];
    for j in 0..bv.len() {
        if used[j] || bv[j].1 != c {
            continue;
        }
        let mut r2 = r.clone();
        if r2.bind(x, bv[j].0) {
            used[j] = true;
            lin_rec(av, bv, k + 1, used, r2, out);
            used[j] = false;
        }
    }
}

fn negated(l: &LinTerm) -> LinTerm {
    let mut out = LinTerm::default();
    out.add_scaled(l, -1);
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Norm {
    /// Symmetric relation between two terms.
    Sym(Rel, Term, Term),
    /// `d rel 0` with `rel` one of `=`, `!=`, `<`, `<=`.
    Lin(Rel, LinTerm),
}

fn normalize(c: &Constraint) -> Norm {
    let (lhs, rel, rhs) = match c.rel {
        Rel::Gt | Rel::Ge => (&c.rhs, c.rel.flip(), &c.lhs),
        _ => (&c.lhs, c.rel, &c.rhs),
    };
    let both_vars = matches!((lhs, rhs), (Term::Var(_), Term::Var(_)));
    if !both_vars || rel.is_ordering() {
        if let (Some(l), Some(r)) = (lhs.as_lin(), rhs.as_lin()) {
            return Norm::Lin(rel, l.sub(&r));
        }
    }
    Norm::Sym(rel, lhs.clone(), rhs.clone())
}

fn match_norm(a: &Norm, b: &Norm, r: &Renaming) -> Vec<Renaming> {
    match (a, b) {
        (Norm::Sym(ra, a1, a2), Norm::Sym(rb, b1, b2)) if ra == rb => {
            let mut out = match_pairs(&[(a1, b1), (a2, b2)], r);
            if ra.is_ordering() {
                return out;
            }
            for alt in match_pairs(&[(a1, b2), (a2, b1)], r) {
                if !out.contains(&alt) {
                    out.push(alt);
                }
            }
            out
        }
        (Norm::Lin(ra, la), Norm::Lin(rb, lb)) if ra == rb => {
            let mut out = match_lin(la, lb, r);
            if !ra.is_ordering() {
                for alt in match_lin(la, &negated(lb), r) {
                    if !out.contains(&alt) {
                        out.push(alt);
                    }
                }
            }
            out
        }
        _ => vec![],
    }
}

fn match_atoms(a: &Atom, b: &Atom, r: &Renaming) -> Vec<Renaming> {
    if a.pred != b.pred || a.args.len() != b.args.len() {
        return vec![];
    }
    let pairs: Vec<_> = a.args.iter().zip(&b.args).collect();
    match_pairs(&pairs, r)
}

fn dedup(cs: &[Constraint]) -> Vec<Norm> {
    let mut out: Vec<Norm> = Vec::new();
    for c in cs {
        let n = normalize(c);
        let dup = out
            .iter()
            .any(|m| match_norm(&n, m, &identity_on(&n, m)).iter().any(is_identity));
        if !dup {
            out.push(n);
        }
    }
    out
}

fn norm_vars(n: &Norm) -> Vec<Sym> {
    match n {
        Norm::Sym(_, a, b) => {
            let mut v = a.vars();
            v.extend(b.vars());
            v
        }
        Norm::Lin(_, l) => l.coeffs.keys().cloned().collect(),
    }
}

/// Renaming fixing every variable of both constraints.
fn identity_on(a: &Norm, b: &Norm) -> Renaming {
    let mut r = Renaming::default();
    for v in norm_vars(a).into_iter().chain(norm_vars(b)) {
        r.bind(&v, &v);
    }
    r
}

fn is_identity(r: &Renaming) -> bool {
    r.fwd.iter().all(|(a, b)| a == b)
}

/// A renaming of `a`'s variables onto `b`'s that makes the clauses equal,
/// if one exists.
pub fn clauses_isomorphic(a: &Clause, b: &Clause) -> Option<Renaming> {
    if a.body.len() != b.body.len() {
        return None;
    }
    let mut frontier = match_atoms(&a.head, &b.head, &Renaming::default());
    for (x, y) in a.body.iter().zip(&b.body) {
        frontier = frontier.iter().flat_map(|r| match_atoms(x, y, r)).collect();
    }
    let ca = dedup(&a.constraints);
    let cb = dedup(&b.constraints);
    if ca.len() != cb.len() {
        return None;
    }
    for r in frontier {
        let mut used = vec![false; cb.len()];
        let mut done = vec![false; ca.len()];
        if let Some(r) = match_constraints(&ca, &cb, &mut done, &mut used, r) {
            return Some(r);
        }
    }
    None
}

fn match_constraints(
    ca: &[Norm],
    cb: &[Norm],
    done: &mut [bool],
    used: &mut [bool],
    r: Renaming,
) -> Option<Renaming> {
    // Most constrained constraint first.
    let mut best: Option<(usize, Vec<(usize, Renaming)>)> = None;
    for i in (0..ca.len()).filter(|&i| !done[i]) {
        let mut cands = Vec::new();
        for j in (0..cb.len()).filter(|&j| !used[j]) {
            for r2 in match_norm(&ca[i], &cb[j], &r) {
                cands.push((j, r2));
            }
        }
        if cands.is_empty() {
            return None;
        }
        if best.as_ref().is_none_or(|(_, b)| cands.len() < b.len()) {
            best = Some((i, cands));
        }
    }
    let Some((i, cands)) = best else {
        return Some(r);
    };
    done[i] = true;
    for (j, r2) in cands {
        used[j] = true;
        if let Some(found) = match_constraints(ca, cb, done, used, r2) {
            return Some(found);
        }
        used[j] = false;
    }
    done[i] = false;
    None
}
