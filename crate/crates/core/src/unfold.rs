//! Top-down derivations and binary unfoldings of compiled programs.
//!
//! Both walk the same resolution step: the selected atom is unified with a
//! renamed-apart clause head, the store is simplified with the variables
//! that must survive protected, and the result is checked satisfiable.
//! `lookup` atoms are resolved natively against the class hierarchy.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::Serialize;

use crate::clp::{base_name, clauses_isomorphic, Atom, Clause, Constraint, Pred, Term};
use crate::interp::{state_at, DvmState, HeapObject, InterpError};
use crate::program::{DalvikProgram, Layouts, MethodSig, Point};
use crate::solver::simplify::norm;
use crate::solver::{simplify, Entailment, Fresh, Solver, Verdict};
use crate::{sym, Int, Sym};

/// Default composition depth; enough for an eight-instruction loop body
/// plus the instructions that reach it.
pub const DEFAULT_DEPTH: usize = 12;

/// Ground query `p_q(v, [a, i], M')`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub point: Point,
    pub registers: Vec<Int>,
    pub heap: Vec<HeapObject>,
}

impl Query {
    pub fn new(point: Point, registers: Vec<Int>, heap: Vec<HeapObject>) -> Self {
        Query {
            point,
            registers,
            heap,
        }
    }

    /// The heap as write chains: object `k` is written at location `k` of a
    /// base array `H`, and its class and fields over a base object `Bk`.
    pub fn memory(&self, layouts: &Layouts) -> Term {
        let mut heap = Term::var("H");
        for (k, obj) in self.heap.iter().enumerate() {
            let loc = k as Int + 1;
            let mut o = Term::write(
                Term::var(&format!("B{loc}")),
                Term::Int(0),
                Term::Class(obj.class.clone()),
            );
            for (field, value) in &obj.fields {
                if let Some(slot) = layouts.slot_in(&obj.class, field) {
                    o = Term::write(
                        o,
                        Term::Int(slot),
                        Term::Functor(field.clone(), Box::new(Term::Int(*value))),
                    );
                }
            }
            heap = Term::write(heap, Term::Int(loc), o);
        }
        Term::mem(heap, Term::Int(self.heap.len() as Int + 1))
    }

    pub fn atom(&self, layouts: &Layouts) -> Atom {
        let mut args: Vec<Term> = self.registers.iter().map(|v| Term::Int(*v)).collect();
        args.push(self.memory(layouts));
        args.push(Term::var("Mq"));
        Atom::point(self.point, args)
    }

    /// The interpreter state the query stands for.
    pub fn state(&self, program: &DalvikProgram) -> Result<DvmState, InterpError> {
        state_at(program, self.point, self.registers.clone(), self.heap.clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeriveStatus {
    Success,
    Failure,
    BudgetExhausted,
}

impl fmt::Display for DeriveStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DeriveStatus::Success => write!(f, "success"),
            DeriveStatus::Failure => write!(f, "failure"),
            DeriveStatus::BudgetExhausted => write!(f, "budget-exhausted"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct Derivation {
    /// Program point of every selected `p_q` atom, in order. On failure the
    /// last entry is the atom no clause could resolve.
    pub trace: Vec<Point>,
    /// The selected atoms after substitution. With a ground query these
    /// carry the register values and memory of each step.
    pub atoms: Vec<Atom>,
    pub status: DeriveStatus,
    pub diagnostics: Vec<String>,
}

/// Store, pending goals and name supply of one derivation branch.
#[derive(Debug, Clone)]
struct State {
    store: Vec<Constraint>,
    goals: Vec<Atom>,
    fresh: Fresh,
}

enum Step {
    Ok(State),
    Fail,
    Unknown(String),
}

struct Engine<'a> {
    program: &'a DalvikProgram,
    by_point: HashMap<Point, Vec<&'a Clause>>,
    solver: Solver,
    protected: HashSet<Sym>,
    suffix: usize,
}

impl<'a> Engine<'a> {
    fn new(program: &'a DalvikProgram, clauses: &'a [Clause]) -> Self {
        let mut by_point: HashMap<Point, Vec<&Clause>> = HashMap::new();
        for c in clauses {
            if let Some(q) = c.head.point_of() {
                by_point.entry(q).or_default().push(c);
            }
        }
        Engine {
            program,
            by_point,
            solver: Solver::new(program.layouts()),
            protected: HashSet::new(),
            suffix: 0,
        }
    }

    fn candidates(&self, q: Point) -> &[&'a Clause] {
        self.by_point.get(&q).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Simplifies `store`, applies the eliminated definitions to `goals`
    /// and checks what is left.
    fn settle(&self, store: Vec<Constraint>, goals: Vec<Atom>, mut fresh: Fresh) -> Step {
        let s = simplify(&store, &self.protected, self.solver.layouts(), &mut fresh);
        if s.unsat {
            return Step::Fail;
        }
        if !s.constraints.is_empty() {
            match self.solver.satisfiable(&s.constraints) {
                Ok(Verdict::Sat(_)) => {}
                Ok(Verdict::Unsat) => return Step::Fail,
                Ok(Verdict::Unknown(why)) => return Step::Unknown(why),
                Err(e) => return Step::Unknown(e.to_string()),
            }
        }
        Step::Ok(State {
            store: s.constraints,
            goals: goals.iter().map(|g| g.substitute(&s.subst)).collect(),
            fresh,
        })
    }

    /// Resolves the first goal with `clause`.
    fn resolve(&mut self, state: &State, clause: &Clause) -> Step {
        self.suffix += 1;
        let c = clause.rename_apart(self.suffix);
        let goal = &state.goals[0];
        let mut store = state.store.clone();
        store.extend(
            c.head
                .args
                .iter()
                .zip(&goal.args)
                .map(|(h, g)| Constraint::eq(h.clone(), g.clone())),
        );
        store.extend(c.constraints);
        let mut goals = c.body;
        goals.extend(state.goals[1..].iter().cloned());
        match self.settle(store, goals, state.fresh.clone()) {
            Step::Ok(s) => self.discharge(s),
            other => other,
        }
    }

    /// Class stored at `receiver` in `memory`, when the store fixes it.
    fn receiver_class(&self, state: &mut State, memory: &Term, receiver: &Term) -> Option<Sym> {
        let mut store = state.store.clone();
        let heap = match memory {
            Term::Mem(a, _) => (**a).clone(),
            other => {
                let a = Term::Var(state.fresh.var());
                let i = Term::Var(state.fresh.var());
                store.push(Constraint::eq(other.clone(), Term::mem(a.clone(), i)));
                a
            }
        };
        let slot = Term::read2(heap, receiver.clone(), Term::Int(0));
        if let Term::Class(c) = norm(&slot) {
            return Some(c);
        }
        self.program.classes().iter().find_map(|class| {
            let goal = Constraint::eq(slot.clone(), Term::Class(class.name.clone()));
            match self.solver.entails(&store, &goal) {
                Ok(Entailment::Holds) => Some(class.name.clone()),
                _ => None,
            }
        })
    }

    /// Pops leading `lookup` goals, failing on a dispatch mismatch.
    fn discharge(&self, mut state: State) -> Step {
        while let Some(Atom {
            pred: Pred::Lookup { method, target },
            args,
        }) = state.goals.first().cloned()
        {
            let Some(class) = self.receiver_class(&mut state, &args[0], &args[1]) else {
                return Step::Unknown(format!(
                    "receiver class of {} undetermined at lookup of {method}",
                    args[1]
                ));
            };
            if !self.dispatches_to(&class, &method, target) {
                return Step::Fail;
            }
            state.goals.remove(0);
        }
        Step::Ok(state)
    }

    fn dispatches_to(&self, class: &str, method: &MethodSig, target: Point) -> bool {
        self.program
            .lookup(class, method)
            .is_some_and(|id| self.program.method(id).entry == target)
    }
}

/// Leftmost derivation of `query`, selecting at most `budget` atoms. The
/// query memory is built by [`Query::memory`]. Compiled programs are
/// deterministic once dispatch is resolved, so backtracking only happens
/// for hand-written clause sets; a failure then reports the deepest branch.
pub fn derive(
    program: &DalvikProgram,
    clauses: &[Clause],
    query: &Query,
    budget: usize,
) -> Derivation {
    assert!(budget >= 1, "derivation budget must be at least 1");
    let mut engine = Engine::new(program, clauses);
    let atom = query.atom(engine.solver.layouts());
    let mut seen = HashSet::new();
    let mut vars = Vec::new();
    atom.collect_vars(&mut vars, &mut seen);
    engine.protected = seen;
    let mut out = Derivation {
        trace: Vec::new(),
        atoms: Vec::new(),
        status: DeriveStatus::Failure,
        diagnostics: Vec::new(),
    };
    let mut deepest: Option<(Vec<Point>, Vec<Atom>)> = None;
    // Choice points: state before the step, trace length, next clause.
    let mut choices: Vec<(State, usize, usize)> = Vec::new();
    let start = State {
        store: Vec::new(),
        goals: vec![atom],
        fresh: Fresh::default(),
    };
    let mut next: Option<(State, usize)> = match engine.discharge(start) {
        Step::Ok(s) => Some((s, usize::MAX)),
        Step::Fail => None,
        Step::Unknown(why) => {
            out.diagnostics.push(why);
            None
        }
    };
    while let Some((state, first)) = next.take() {
        // `usize::MAX` marks a fresh state whose first goal is selected now.
        let first = if first == usize::MAX {
            if state.goals.is_empty() {
                out.status = DeriveStatus::Success;
                return out;
            }
            if out.trace.len() == budget {
                out.status = DeriveStatus::BudgetExhausted;
                return out;
            }
            out.trace.push(state.goals[0].point_of().expect("lookups discharged"));
            out.atoms.push(state.goals[0].clone());
            0
        } else {
            first
        };
        let q = state.goals[0].point_of().expect("point atom");
        let cands: Vec<&Clause> = engine.candidates(q).to_vec();
        for (k, c) in cands.iter().enumerate().skip(first) {
            match engine.resolve(&state, c) {
                Step::Ok(s) => {
                    if k + 1 < cands.len() {
                        choices.push((state.clone(), out.trace.len(), k + 1));
                    }
                    next = Some((s, usize::MAX));
                    break;
                }
                Step::Fail => {}
                Step::Unknown(why) => out.diagnostics.push(format!("at p{q}: {why}")),
            }
        }
        if next.is_none() {
            if deepest.as_ref().is_none_or(|(t, _)| t.len() < out.trace.len()) {
                deepest = Some((out.trace.clone(), out.atoms.clone()));
            }
            if let Some((s, len, k)) = choices.pop() {
                out.trace.truncate(len);
                out.atoms.truncate(len);
                next = Some((s, k));
            }
        }
    }
    if let Some((trace, atoms)) = deepest {
        out.trace = trace;
        out.atoms = atoms;
    }
    out
}

/// Binary clauses up to a composition depth.
#[derive(Debug, Clone, Default)]
pub struct Unfolding {
    /// Sorted by head point, then body point (facts last).
    pub clauses: Vec<Clause>,
    pub diagnostics: Vec<String>,
    /// The state cap was hit before the depth was exhausted.
    pub incomplete: bool,
}

#[derive(Debug, Clone, Copy)]
pub struct UnfoldLimits {
    pub depth: usize,
    /// Resolution steps over all start clauses.
    pub max_steps: usize,
}

impl Default for UnfoldLimits {
    fn default() -> Self {
        UnfoldLimits {
            depth: DEFAULT_DEPTH,
            max_steps: 200_000,
        }
    }
}

/// Renames the non-head variables of `c` to their base names, numbered
/// apart only when needed.
fn tidy(c: &Clause) -> Clause {
    let mut head = Vec::new();
    let mut seen = HashSet::new();
    c.head.collect_vars(&mut head, &mut seen);
    let mut taken: HashSet<Sym> = head.iter().cloned().collect();
    let mut map: HashMap<Sym, Sym> = head.iter().map(|v| (v.clone(), v.clone())).collect();
    let mut counters: BTreeMap<String, usize> = BTreeMap::new();
    for v in c.vars() {
        if map.contains_key(&v) {
            continue;
        }
        // Variables invented by the simplifier are shown as `Z`.
        let base = match base_name(&v) {
            b if b.starts_with('_') => "Z".to_string(),
            b => b.to_string(),
        };
        let mut name = sym(&base);
        while taken.contains(&name) {
            let n = counters.entry(base.clone()).or_insert(0);
            *n += 1;
            name = sym(&format!("{base}_{n}"));
        }
        taken.insert(name.clone());
        map.insert(v, name);
    }
    c.rename(&mut |v| map.get(v).cloned().unwrap_or_else(|| v.clone()))
}

/// Simplifies the constraints of `c` keeping its head variables and applies
/// the eliminated definitions to its body. `None` when they contradict.
pub fn simplify_clause(c: &Clause, layouts: &Layouts) -> Option<Clause> {
    let mut protected = HashSet::new();
    let mut vars = Vec::new();
    c.head.collect_vars(&mut vars, &mut protected);
    let s = simplify(&c.constraints, &protected, layouts, &mut Fresh::default());
    if s.unsat {
        return None;
    }
    Some(tidy(&Clause {
        head: c.head.clone(),
        constraints: s.constraints,
        body: c.body.iter().map(|a| a.substitute(&s.subst)).collect(),
    }))
}

fn body_key(c: &Clause) -> Option<Point> {
    c.body.first().and_then(Atom::point_of)
}

#[derive(Default)]
struct ClauseSet {
    groups: BTreeMap<(Point, Option<Point>), Vec<Clause>>,
}

impl ClauseSet {
    fn insert(&mut self, c: Clause) {
        let key = (c.head.point_of().expect("point head"), body_key(&c));
        let group = self.groups.entry(key).or_default();
        let dup = group.iter().any(|d| {
            d.constraints.len() == c.constraints.len() && clauses_isomorphic(d, &c).is_some()
        });
        if !dup {
            group.push(c);
        }
    }

    fn into_vec(self) -> Vec<Clause> {
        self.groups.into_values().flatten().collect()
    }
}

/// All binary unfoldings reachable in at most `limits.depth` resolution
/// steps from a program clause: for every derived state, the clause from
/// the start head to the state's first goal, or to nothing when no goal is
/// left. States whose leading `lookup` cannot be decided are dropped with a
/// diagnostic.
pub fn binary_unfold(
    program: &DalvikProgram,
    clauses: &[Clause],
    limits: UnfoldLimits,
) -> Unfolding {
    assert!(limits.depth >= 1, "unfolding depth must be at least 1");
    let mut engine = Engine::new(program, clauses);
    let mut set = ClauseSet::default();
    let mut facts = ClauseSet::default();
    let mut out = Unfolding::default();
    let mut steps = 0usize;
    'start: for start in clauses {
        let Some(_) = start.head.point_of() else {
            continue;
        };
        let mut seen = HashSet::new();
        let mut vars = Vec::new();
        start.head.collect_vars(&mut vars, &mut seen);
        engine.protected = seen;
        let first = engine.settle(
            start.constraints.clone(),
            start.body.clone(),
            Fresh::default(),
        );
        let mut stack: Vec<(State, usize)> = match first {
            Step::Ok(s) => vec![(s, 1)],
            Step::Fail => continue,
            Step::Unknown(why) => {
                out.diagnostics.push(format!("{}: {why}", start.head));
                continue;
            }
        };
        while let Some((state, depth)) = stack.pop() {
            let state = match engine.discharge(state) {
                Step::Ok(s) => s,
                Step::Fail => continue,
                Step::Unknown(why) => {
                    out.diagnostics.push(format!("from {}: {why}", start.head));
                    continue;
                }
            };
            let body: Vec<Atom> = state.goals.first().cloned().into_iter().collect();
            let emitted = tidy(&Clause {
                head: start.head.clone(),
                constraints: state.store.clone(),
                body,
            });
            if state.goals.is_empty() {
                facts.insert(emitted);
                continue;
            }
            set.insert(emitted);
            if depth == limits.depth {
                continue;
            }
            let q = state.goals[0].point_of().expect("lookups discharged");
            let cands: Vec<&Clause> = engine.candidates(q).to_vec();
            let mut children = Vec::new();
            for c in cands {
                steps += 1;
                if steps > limits.max_steps {
                    out.incomplete = true;
                    break 'start;
                }
                match engine.resolve(&state, c) {
                    Step::Ok(s) => children.push((s, depth + 1)),
                    Step::Fail => {}
                    Step::Unknown(why) => out.diagnostics.push(format!("at p{q}: {why}")),
                }
            }
            // Reverse so that the first candidate is explored first.
            stack.extend(children.into_iter().rev());
        }
    }
    out.clauses = set.into_vec();
    out.clauses.extend(facts.into_vec());
    out.diagnostics.sort();
    out.diagnostics.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clp::parse_clause;
    use crate::compile::compile_program;
    use crate::program::parse_program;

    const COUNTER: &str = r#"
        class C {
            method count(2) registers 3 {
                0: const v0, 0
                1: if-lt v0, v2, 3
                2: return
                3: add v0, v0, 1
                4: goto 1
            }
        }
    "#;

    fn setup(src: &str) -> (DalvikProgram, Vec<Clause>) {
        let p = parse_program(src).unwrap();
        let c = compile_program(&p).unwrap().clauses;
        (p, c)
    }

    #[test]
    fn counter_derivation_halts() {
        let (p, c) = setup(COUNTER);
        let d = derive(&p, &c, &Query::new(0, vec![0, 0, 2], vec![]), 100);
        assert_eq!(d.status, DeriveStatus::Success);
        assert_eq!(d.trace, [0, 1, 3, 4, 1, 3, 4, 1, 2]);
        let d = derive(&p, &c, &Query::new(0, vec![0, 0, 2], vec![]), 4);
        assert_eq!(d.status, DeriveStatus::BudgetExhausted);
        assert_eq!(d.trace, [0, 1, 3, 4]);
    }

    #[test]
    fn single_fact_is_its_own_unfolding() {
        let p = parse_program("class C { method m(0) registers 1 { 0: return } }").unwrap();
        let c = compile_program(&p).unwrap().clauses;
        let u = binary_unfold(&p, &c, UnfoldLimits::default());
        let facts: Vec<&Clause> = u.clauses.iter().filter(|c| c.head.point_of() == Some(0)).collect();
        assert_eq!(facts.len(), 1);
        let want = parse_clause("p0(V0,M,Mp) :- {Mp = M}.").unwrap();
        assert!(clauses_isomorphic(facts[0], &want).is_some(), "{}", facts[0]);
    }

    #[test]
    fn counter_loop_unfolds_to_a_recursive_clause() {
        let (p, c) = setup(COUNTER);
        let u = binary_unfold(&p, &c, UnfoldLimits::default());
        let want = parse_clause(
            "p1(V0,V1,V2,M,Mp) :- {V0 < V2}, p1(V0 + 1,V1,V2,M,Mp).",
        )
        .unwrap();
        assert!(
            u.clauses.iter().any(|c| clauses_isomorphic(c, &want).is_some()),
            "{}",
            crate::clp::pretty_program(&u.clauses)
        );
        assert!(!u.incomplete);
    }

    #[test]
    fn tidy_keeps_head_names() {
        let y3 = Term::var("Y#3");
        let y7 = Term::var("Y#7");
        let c = Clause {
            head: parse_clause("p0(X,M,Mp).").unwrap().head,
            constraints: vec![
                Constraint::eq(y3.clone(), Term::var("X").plus(1)),
                Constraint::lt(y7.clone(), y3),
            ],
            body: vec![Atom::point(1, vec![y7, Term::var("M"), Term::var("Mp")])],
        };
        assert_eq!(tidy(&c).to_string(), "p0(X,M,Mp) :- {Y = X + 1, Y_1 < Y}, p1(Y_1,M,Mp).");
    }
}
