//! Recurrent-set witnesses over binary unfoldings.
//!
//! A witness is a recursive binary clause `r: p(x) <- c(x,y), p(y)`, an
//! entry clause `r': p'(x') <- c'(x',y'), p(y')` and a template `G` over the
//! register arguments of `p`. The set actually shown recurrent is `G`
//! intersected with the domain of `c`, so that memory guards of the loop
//! body (a class tag, a field read) are carried along with `G`:
//!
//! - F1a: `c(x,y) /\ G(x)` is satisfiable and entails `G(y)`;
//! - F1b: `c(x,y) /\ G(x)` entails `exists z. c(y,z)`;
//! - F2: `c'(x',y') /\ G(y') /\ c(y',z)` is satisfiable.
//!
//! Compiled clauses determine their body arguments from their head, so F1
//! needs no quantifier alternation beyond the witnesses for `z` in F1b.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::time::Instant;

use serde::Serialize;

use crate::clp::{Atom, Clause, Constraint, Rel, Term};
use crate::compile::{compile_program, CompileError};
use crate::program::{DalvikProgram, Layouts, Point};
use crate::solver::{eval, Entailment, Solver, Value, Verdict};
use crate::unfold::{binary_unfold, UnfoldLimits};
use crate::{sym, Int, Sym};

/// Conjunction of constraints over register positions, written with the
/// variables `V0`, `V1`, ...; empty means `true`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Template(pub Vec<Constraint>);

impl Template {
    pub fn truth() -> Self {
        Template(Vec::new())
    }

    fn registers(&self) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .0
            .iter()
            .flat_map(|c| {
                let mut v = c.lhs.vars();
                v.extend(c.rhs.vars());
                v
            })
            .filter_map(|v| v.strip_prefix('V')?.parse().ok())
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }

    /// The template on the register arguments of `atom`; `None` when it
    /// names a register the atom lacks.
    pub fn instantiate(&self, atom: &Atom) -> Option<Vec<Constraint>> {
        let regs = atom.registers();
        let mut s = HashMap::new();
        for k in self.registers() {
            s.insert(sym(&format!("V{k}")), regs.get(k)?.clone());
        }
        Some(self.0.iter().map(|c| c.substitute(&s)).collect())
    }
}

impl fmt::Display for Template {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.0.is_empty() {
            return write!(f, "true");
        }
        for (k, c) in self.0.iter().enumerate() {
            if k > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{c}")?;
        }
        Ok(())
    }
}

fn reg(k: usize) -> Term {
    Term::Var(sym(&format!("V{k}")))
}

/// Candidate templates in enumeration order: `true`, equalities between
/// registers, registers equal to program constants, strict orderings,
/// positivity, then pairwise conjunctions of the single ones up to `cap`.
pub fn templates(registers: &[usize], constants: &[Int], cap: usize) -> Vec<Template> {
    let mut single = Vec::new();
    for (x, &a) in registers.iter().enumerate() {
        for &b in &registers[x + 1..] {
            single.push(Constraint::eq(reg(a), reg(b)));
        }
    }
    for &a in registers {
        for &c in constants {
            single.push(Constraint::eq(reg(a), Term::Int(c)));
        }
    }
    for &a in registers {
        for &b in registers {
            if a != b {
                single.push(Constraint::lt(reg(a), reg(b)));
            }
        }
    }
    for &a in registers {
        single.push(Constraint::gt(reg(a), Term::Int(0)));
    }
    let mut out = vec![Template::truth()];
    out.extend(single.iter().map(|c| Template(vec![c.clone()])));
    let mut pairs = 0;
    'pairs: for (x, a) in single.iter().enumerate() {
        for b in &single[x + 1..] {
            if pairs == cap {
                break 'pairs;
            }
            out.push(Template(vec![a.clone(), b.clone()]));
            pairs += 1;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Check {
    Verified,
    Refuted(String),
    Unknown(String),
}

impl Check {
    pub fn is_verified(&self) -> bool {
        matches!(self, Check::Verified)
    }
}

fn is_recursive(r: &Clause) -> bool {
    r.head.point_of().is_some() && r.body.len() == 1 && r.body[0].pred == r.head.pred
}

fn head_vars(c: &Clause) -> HashSet<Sym> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    c.head.collect_vars(&mut out, &mut seen);
    seen
}

fn vars_of(c: &Constraint) -> Vec<Sym> {
    let mut v = c.lhs.vars();
    v.extend(c.rhs.vars());
    v
}

/// Every variable of `r` outside its head is fixed by the constraints once
/// the head is: through a definition or as the argument of a field term
/// equated with a term over fixed variables.
pub fn output_determined(r: &Clause) -> bool {
    let mut known = head_vars(r);
    loop {
        let before = known.len();
        for c in r.constraints.iter().filter(|c| c.rel == Rel::Eq) {
            for (a, b) in [(&c.lhs, &c.rhs), (&c.rhs, &c.lhs)] {
                if !b.vars().iter().all(|v| known.contains(v)) {
                    continue;
                }
                match a {
                    Term::Var(v) => {
                        known.insert(v.clone());
                    }
                    Term::Functor(_, arg) => {
                        if let Term::Var(v) = &**arg {
                            known.insert(v.clone());
                        } else if let Some(l) = arg.as_lin() {
                            let open: Vec<&Sym> =
                                l.coeffs.keys().filter(|v| !known.contains(*v)).collect();
                            if let [v] = open.as_slice() {
                                if l.coeffs[*v].abs() == 1 {
                                    known.insert((*v).clone());
                                }
                            }
                        }
                    }
                    _ => {}
                }
            }
        }
        if known.len() == before {
            break;
        }
    }
    r.vars().iter().all(|v| known.contains(v))
}

/// Constraints of `r` renamed apart and with its head parameters replaced by
/// the arguments of `at`. Returns the constraints and the variables left
/// existential. `None` when the head and `at` have different shapes.
fn transplant(r: &Clause, at: &Atom, suffix: &str) -> Option<(Vec<Constraint>, Vec<Sym>)> {
    let renamed = r.rename(&mut |v| sym(&format!("{v}{suffix}")));
    let mut s: HashMap<Sym, Term> = HashMap::new();
    if renamed.head.args.len() != at.args.len() {
        return None;
    }
    for (h, a) in renamed.head.args.iter().zip(&at.args) {
        match (h, a) {
            (Term::Var(v), _) => {
                if s.insert(v.clone(), a.clone()).is_some_and(|old| old != *a) {
                    return None;
                }
            }
            (Term::Mem(ha, hi), Term::Mem(aa, ai)) => {
                for (x, y) in [(&**ha, &**aa), (&**hi, &**ai)] {
                    match x {
                        Term::Var(v) => {
                            s.insert(v.clone(), y.clone());
                        }
                        _ => return None,
                    }
                }
            }
            _ => return None,
        }
    }
    let cs: Vec<Constraint> = renamed.constraints.iter().map(|c| c.substitute(&s)).collect();
    let mut seen = HashSet::new();
    let mut z = Vec::new();
    for c in &renamed.constraints {
        c.collect_vars(&mut z, &mut seen);
    }
    z.retain(|v| !s.contains_key(v));
    Some((cs, z))
}

fn int_subterms(t: &Term, out: &mut Vec<Term>) {
    match t {
        Term::Var(_) | Term::Int(_) | Term::Lin(_) => out.push(t.clone()),
        Term::Functor(_, a) => int_subterms(a, out),
        Term::Read(a, idx) => {
            int_subterms(a, out);
            idx.iter().for_each(|i| int_subterms(i, out));
        }
        Term::Write(a, i, e) => {
            int_subterms(a, out);
            int_subterms(i, out);
            int_subterms(e, out);
        }
        Term::Mem(a, i) => {
            int_subterms(a, out);
            int_subterms(i, out);
        }
        Term::Class(_) => {}
    }
}

pub struct Checker {
    solver: Solver,
}

impl Checker {
    pub fn new(layouts: Layouts) -> Self {
        Checker {
            solver: Solver::new(layouts),
        }
    }

    fn sat(&self, cs: &[Constraint]) -> Result<Option<crate::solver::Valuation>, String> {
        match self.solver.satisfiable(cs) {
            Ok(Verdict::Sat(m)) => Ok(Some(m)),
            Ok(Verdict::Unsat) => Ok(None),
            Ok(Verdict::Unknown(why)) => Err(why),
            Err(e) => Err(e.to_string()),
        }
    }

    fn entails(&self, prem: &[Constraint], goal: &Constraint) -> Check {
        match self.solver.entails(prem, goal) {
            Ok(Entailment::Holds) => Check::Verified,
            Ok(Entailment::Fails(_)) => Check::Refuted(format!("{goal} not entailed")),
            Ok(Entailment::Unknown(why)) => Check::Unknown(why),
            Err(e) => Check::Unknown(e.to_string()),
        }
    }

    /// F1a and F1b for a recursive clause.
    pub fn check_recurrence(&self, r: &Clause, template: &Template) -> Check {
        if !is_recursive(r) {
            return Check::Refuted("clause is not recursive".into());
        }
        if !output_determined(r) {
            return Check::Unknown("body arguments not determined by the head".into());
        }
        let (Some(gx), Some(gy)) = (template.instantiate(&r.head), template.instantiate(&r.body[0]))
        else {
            return Check::Refuted("template names a missing register".into());
        };
        let mut prem = r.constraints.clone();
        prem.extend(gx);
        let model = match self.sat(&prem) {
            Ok(Some(m)) => m,
            Ok(None) => return Check::Refuted("template excludes every loop state".into()),
            Err(why) => return Check::Unknown(why),
        };
        for g in &gy {
            match self.entails(&prem, g) {
                Check::Verified => {}
                other => return other,
            }
        }
        self.domain_closed(r, &prem, &model)
    }

    /// F1b: after one iteration the loop guard holds again.
    fn domain_closed(
        &self,
        r: &Clause,
        prem: &[Constraint],
        model: &crate::solver::Valuation,
    ) -> Check {
        let Some((mut pending, z)) = transplant(r, &r.body[0], "'") else {
            return Check::Unknown("head and body shapes differ".into());
        };
        let mut open: HashSet<Sym> = z.into_iter().collect();
        let mut candidates = Vec::new();
        for c in prem {
            int_subterms(&c.lhs, &mut candidates);
            int_subterms(&c.rhs, &mut candidates);
        }
        candidates.sort();
        candidates.dedup();
        loop {
            let mut progress = false;
            let mut k = 0;
            while k < pending.len() {
                let c = pending[k].clone();
                let known = |t: &Term| t.vars().iter().all(|v| !open.contains(v));
                if vars_of(&c).iter().all(|v| !open.contains(v)) {
                    match self.entails(prem, &c) {
                        Check::Verified => {}
                        other => return other,
                    }
                    pending.remove(k);
                    progress = true;
                    continue;
                }
                let def = match (c.rel, &c.lhs, &c.rhs) {
                    (Rel::Eq, Term::Var(v), t) | (Rel::Eq, t, Term::Var(v))
                        if open.contains(v) && known(t) =>
                    {
                        Some((v.clone(), t.clone()))
                    }
                    (Rel::Eq, Term::Functor(f, arg), t) | (Rel::Eq, t, Term::Functor(f, arg))
                        if known(t) =>
                    {
                        match &**arg {
                            Term::Var(v) if open.contains(v) => {
                                match self.field_witness(prem, model, t, f, &candidates) {
                                    Some(w) => Some((v.clone(), w)),
                                    None => {
                                        return Check::Unknown(format!(
                                            "no witness for {v} in {c}"
                                        ))
                                    }
                                }
                            }
                            _ => None,
                        }
                    }
                    _ => None,
                };
                if let Some((v, w)) = def {
                    open.remove(&v);
                    let one: HashMap<Sym, Term> = [(v, w)].into_iter().collect();
                    for p in pending.iter_mut() {
                        *p = p.substitute(&one);
                    }
                    progress = true;
                    continue;
                }
                k += 1;
            }
            if pending.is_empty() {
                return Check::Verified;
            }
            if !progress {
                return Check::Unknown(format!(
                    "loop guard {} not reduced to the head",
                    pending[0]
                ));
            }
        }
    }

    /// An integer term `w` over the premises' variables such that the
    /// premises entail `cell = f(w)`.
    fn field_witness(
        &self,
        prem: &[Constraint],
        model: &crate::solver::Valuation,
        cell: &Term,
        f: &Sym,
        candidates: &[Term],
    ) -> Option<Term> {
        let want = match eval(cell, model).ok()? {
            Value::Elem(crate::solver::Elem::Functor(g, k)) if g == *f => k,
            _ => return None,
        };
        candidates
            .iter()
            .filter(|t| eval(t, model).ok() == Some(Value::Int(want)))
            .find(|t| {
                let goal = Constraint::eq(cell.clone(), Term::Functor(f.clone(), Box::new((*t).clone())));
                self.entails(prem, &goal).is_verified()
            })
            .cloned()
    }

    /// F2: the entry clause reaches a state of the recurrent set.
    pub fn check_entry(&self, r: &Clause, r_prime: &Clause, template: &Template) -> Check {
        if r_prime.body.len() != 1 || r_prime.body[0].pred != r.head.pred {
            return Check::Refuted("entry clause does not reach the loop".into());
        }
        let entry = r_prime.rename(&mut |v| sym(&format!("{v}'")));
        let Some(gy) = template.instantiate(&entry.body[0]) else {
            return Check::Refuted("template names a missing register".into());
        };
        let mut cs = entry.constraints.clone();
        cs.extend(gy);
        let Some((body, _)) = transplant(r, &entry.body[0], "''") else {
            return Check::Unknown("entry and loop shapes differ".into());
        };
        cs.extend(body);
        match self.sat(&cs) {
            Ok(Some(_)) => Check::Verified,
            Ok(None) => Check::Refuted("no entry state in the recurrent set".into()),
            Err(why) => Check::Unknown(why),
        }
    }

    pub fn check_witness(&self, r: &Clause, r_prime: &Clause, template: &Template) -> Check {
        match self.check_entry(r, r_prime, template) {
            Check::Verified => self.check_recurrence(r, template),
            other => other,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Witness {
    pub r: Clause,
    pub r_prime: Clause,
    pub template: Template,
    /// Point of the head of `r_prime`.
    pub entry: Point,
}

#[derive(Debug, Clone, Copy)]
pub struct SearchOptions {
    /// Most pairwise conjunctions tried per recursive clause.
    pub pair_cap: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions { pair_cap: 64 }
    }
}

/// Register positions a template over `r` may mention: those whose head
/// variable occurs in the constraints.
fn template_registers(r: &Clause) -> Vec<usize> {
    let mut used = HashSet::new();
    for c in &r.constraints {
        used.extend(vars_of(c));
    }
    r.head
        .registers()
        .iter()
        .enumerate()
        .filter_map(|(k, t)| match t {
            Term::Var(v) if used.contains(v) => Some(k),
            _ => None,
        })
        .collect()
}

/// First verified witness, enumerating recursive clauses by head point,
/// then entry clauses from `entries` reaching them, then templates.
pub fn find_witness(
    clauses: &[Clause],
    entries: &[Point],
    constants: &[Int],
    checker: &Checker,
    options: SearchOptions,
) -> Option<Witness> {
    let mut loops: Vec<&Clause> = clauses.iter().filter(|c| is_recursive(c)).collect();
    loops.sort_by_key(|c| c.head.point_of());
    for r in loops {
        let rprimes: Vec<&Clause> = clauses
            .iter()
            .filter(|c| {
                c.head.point_of().is_some_and(|q| entries.contains(&q))
                    && c.body.len() == 1
                    && c.body[0].pred == r.head.pred
            })
            .collect();
        if rprimes.is_empty() {
            continue;
        }
        let family = templates(&template_registers(r), constants, options.pair_cap);
        let mut recurrence: HashMap<usize, bool> = HashMap::new();
        for rp in rprimes {
            for (k, t) in family.iter().enumerate() {
                if !checker.check_entry(r, rp, t).is_verified() {
                    continue;
                }
                let ok = *recurrence
                    .entry(k)
                    .or_insert_with(|| checker.check_recurrence(r, t).is_verified());
                if ok {
                    return Some(Witness {
                        r: r.clone(),
                        r_prime: rp.clone(),
                        template: t.clone(),
                        entry: rp.head.point_of().expect("point head"),
                    });
                }
            }
        }
    }
    None
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Outcome {
    Diverges,
    Unknown,
}

#[derive(Debug, Clone, Serialize)]
pub struct WitnessReport {
    pub r: String,
    pub r_prime: String,
    pub template: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Depths {
    pub unfold: usize,
    pub binary_clauses: usize,
    pub incomplete: bool,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct Timings {
    pub compile_ms: f64,
    pub unfold_ms: f64,
    pub search_ms: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Report {
    pub verdict: Outcome,
    pub entry_point: Option<Point>,
    pub witness: Option<WitnessReport>,
    pub depths: Depths,
    pub timings: Timings,
}

impl Report {
    /// Plain-text rendering, free of timings so that it is reproducible.
    pub fn text(&self) -> String {
        let mut out = String::new();
        match (&self.witness, self.entry_point) {
            (Some(w), Some(q)) => {
                out.push_str(&format!("verdict: diverges\nentry point: {q}\n"));
                out.push_str(&format!("template: {}\n", w.template));
                out.push_str(&format!("r:  {}\n", w.r));
                out.push_str(&format!("r': {}\n", w.r_prime));
                out.push_str(&format!(
                    "p{q} has an infinite computation, so the program has an infinite \
                     execution from point {q}\n"
                ));
            }
            _ => {
                out.push_str("verdict: unknown\n");
                if let Some(q) = self.entry_point {
                    out.push_str(&format!("entry point: {q}\n"));
                }
                out.push_str("no recurrent set found among the candidate templates\n");
            }
        }
        out.push_str(&format!(
            "binary clauses: {} (depth {}{})\n",
            self.depths.binary_clauses,
            self.depths.unfold,
            if self.depths.incomplete { ", incomplete" } else { "" }
        ));
        out
    }
}

/// Report for a search outcome. `entry` is echoed when no witness is found.
pub fn report(witness: Option<&Witness>, entry: Option<Point>, depths: Depths, timings: Timings) -> Report {
    match witness {
        Some(w) => Report {
            verdict: Outcome::Diverges,
            entry_point: Some(w.entry),
            witness: Some(WitnessReport {
                r: w.r.to_string(),
                r_prime: w.r_prime.to_string(),
                template: w.template.to_string(),
            }),
            depths,
            timings,
        },
        None => Report {
            verdict: Outcome::Unknown,
            entry_point: entry,
            witness: None,
            depths,
            timings,
        },
    }
}

#[derive(Debug, Clone, Copy)]
pub struct AnalyzeOptions {
    pub depth: usize,
    pub search: SearchOptions,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            depth: crate::unfold::DEFAULT_DEPTH,
            search: SearchOptions::default(),
        }
    }
}

fn millis(t: Instant) -> f64 {
    t.elapsed().as_secs_f64() * 1000.0
}

/// Compiles, unfolds and searches. Without `entry`, every method entry
/// point is a candidate.
pub fn analyze(
    program: &DalvikProgram,
    entry: Option<Point>,
    options: AnalyzeOptions,
) -> Result<(Report, Option<Witness>), CompileError> {
    let t = Instant::now();
    let compiled = compile_program(program)?;
    let compile_ms = millis(t);
    let t = Instant::now();
    let unfolding = binary_unfold(
        program,
        &compiled.clauses,
        UnfoldLimits {
            depth: options.depth,
            ..UnfoldLimits::default()
        },
    );
    let unfold_ms = millis(t);
    let t = Instant::now();
    let entries: Vec<Point> = match entry {
        Some(q) => vec![q],
        None => program.methods().iter().map(|m| m.entry).collect(),
    };
    let checker = Checker::new(program.layouts());
    let witness = find_witness(
        &unfolding.clauses,
        &entries,
        &program.constants(),
        &checker,
        options.search,
    );
    let search_ms = millis(t);
    let depths = Depths {
        unfold: options.depth,
        binary_clauses: unfolding.clauses.len(),
        incomplete: unfolding.incomplete,
    };
    let timings = Timings {
        compile_ms,
        unfold_ms,
        search_ms,
    };
    Ok((report(witness.as_ref(), entry, depths, timings), witness))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clp::parse_clause;

    fn cl(s: &str) -> Clause {
        parse_clause(s).unwrap()
    }

    #[test]
    fn counting_up_forever() {
        let r = cl("p1(X,M,Mp) :- {X > 0, Xp = X + 1}, p1(Xp,M,Mp).");
        let rp = cl("p0(Y,M,Mp) :- {Z = 1}, p1(Z,M,Mp).");
        let checker = Checker::new(Layouts::default());
        let g = Template(vec![Constraint::gt(reg(0), Term::Int(0))]);
        assert_eq!(checker.check_witness(&r, &rp, &g), Check::Verified);
        // The guard X > 0 of the loop is part of the recurrent set anyway.
        assert_eq!(checker.check_witness(&r, &rp, &Template::truth()), Check::Verified);
        let w = find_witness(&[r.clone(), rp.clone()], &[0], &[1], &checker, SearchOptions::default())
            .unwrap();
        assert_eq!(w.template, Template::truth());
        let never = cl("p0(Y,M,Mp) :- {Z = 0}, p1(Z,M,Mp).");
        assert!(matches!(checker.check_witness(&r, &never, &g), Check::Refuted(_)));
        assert!(find_witness(&[r, rp], &[5], &[1], &checker, SearchOptions::default()).is_none());
    }

    #[test]
    fn guard_must_survive_the_iteration() {
        // Decrementing loop: G = (X > 0) is not closed under the step.
        let r = cl("p1(X,M,Mp) :- {X > 0, Xp = X - 1}, p1(Xp,M,Mp).");
        let checker = Checker::new(Layouts::default());
        let g = Template(vec![Constraint::gt(reg(0), Term::Int(0))]);
        assert!(matches!(checker.check_recurrence(&r, &g), Check::Refuted(_)));
    }

    #[test]
    fn template_family_order() {
        let t = templates(&[1, 3], &[2], 1);
        let shown: Vec<String> = t.iter().map(|t| t.to_string()).collect();
        assert_eq!(
            shown,
            [
                "true", "V1 = V3", "V1 = 2", "V3 = 2", "V1 < V3", "V3 < V1", "V1 > 0", "V3 > 0",
                "V1 = V3, V1 = 2"
            ]
        );
    }

    #[test]
    fn determinism_side_condition() {
        assert!(output_determined(&cl(
            "p0(V0,[A,I],Mp) :- {read(A,V0,1) = i(X), Y = X + 1}, p0(Y,[A,I],Mp)."
        )));
        assert!(!output_determined(&cl("p0(V0,M,Mp) :- {Y > V0}, p0(Y,M,Mp).")));
    }
}
