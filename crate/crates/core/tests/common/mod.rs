//! Shared test material: reference clauses for the running Loops example,
//! written in the crate's clause syntax, and a brute-force oracle for small
//! constraint sets over integers and one level of arrays.

#![allow(dead_code)]

use std::collections::BTreeSet;
use std::path::PathBuf;

use dalnot_core::clp::{parse_clause, Clause, Constraint, Rel, Term};
use dalnot_core::program::{parse_program, DalvikProgram};
use dalnot_core::solver::{holds, ArrayValue, Elem, Valuation, Value};
use dalnot_core::{sym, Int, Sym};
use rand::seq::SliceRandom;
use rand::Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name)
}

pub fn load(name: &str) -> DalvikProgram {
    let text = std::fs::read_to_string(fixture(name)).expect("fixture readable");
    parse_program(&text).expect("fixture parses")
}

/// Clause for point 0 as displayed, plus the `V1 > 0` guard the iget rule
/// requires.
pub const GOLDEN_P0: &str = "p0(V0,V1,V2,V3,[A,I],Mp) :- {read(A,V1,F) = i(V0p), V1 > 0, \
     V1p = V1, V2p = V2, V3p = V3}, p1(V0p,V1p,V2p,V3p,[A,I],Mp).";

pub const GOLDEN_P14: &str = "p14(V0,V1,V2,V3,V4,M,Mp) :- {V0 > 0, V0p = V0, V1p = V1, \
     V2p = V2, V3p = V3, V4p = V4}, lookup(M,V0,\"m/2\",0), p0(0,V0,V2,V1,M,M1), \
     p15(V0p,V1p,V2p,V3p,V4p,M1,Mp).";

/// Binary unfolding r along 0 -> 1 -> 3 -> ... -> 9 -> 0.
pub const GOLDEN_R: &str = "p0(V0,V1,V2,V3,[A,I],Mp) :- {V1 > 0, O = read(A,V1), \
     read(O,F) = i(X), X < V2, O1 = write(O,F,i(X + 1)), A1 = write(A,V1,O1), V3 > 0, \
     Op = read(A1,V3), read(Op,Fp) = i(Xp), V0p = Xp - 1, Op1 = write(Op,Fp,i(V0p)), \
     A2 = write(A1,V3,Op1), V1p = V1, V2p = V2, V3p = V3}, \
     p0(V0p,V1p,V2p,V3p,[A2,I],Mp).";

/// Binary unfolding r' along 10 -> 11 -> 12 -> 13 -> 14 -> 0.
pub const GOLDEN_R_PRIME: &str = "p10(V0,V1,V2,V3,V4,[A,I],Mp) :- {read(O,0) = 'Loops', \
     read(O,1) = i(0), A1 = write(A,I,O), I1 = I + 1, I > 0}, p0(0,I,2,I,[A1,I1],M1).";

pub fn clause(src: &str) -> Clause {
    parse_clause(src).unwrap_or_else(|e| panic!("{src}: {e}"))
}

/// Lower and upper bound of every integer variable in generated sets.
pub const BOX: Int = 3;

/// A generated constraint set together with the sort of each variable.
#[derive(Debug, Clone)]
pub struct SmallSet {
    pub constraints: Vec<Constraint>,
    pub ints: Vec<Sym>,
    pub arrays: Vec<Sym>,
    pub elems: Vec<Sym>,
}

struct Gen<'r, R: Rng> {
    rng: &'r mut R,
    ints: Vec<Sym>,
    indexes: Vec<Term>,
    arrays: Vec<Sym>,
    elems: Vec<Sym>,
    writes_left: usize,
}

impl<R: Rng> Gen<'_, R> {
    fn int(&mut self) -> Term {
        let v = Term::Var(self.ints.choose(self.rng).unwrap().clone());
        match self.rng.gen_range(0..4) {
            0 => Term::Int(self.rng.gen_range(-2..=2)),
            1 => v.plus(self.rng.gen_range(-1..=1)),
            _ => v,
        }
    }

    fn index(&mut self) -> Term {
        self.indexes.choose(self.rng).unwrap().clone()
    }

    fn array(&mut self) -> Term {
        let a = Term::Var(self.arrays.choose(self.rng).unwrap().clone());
        if self.writes_left > 0 && self.rng.gen_bool(0.25) {
            self.writes_left -= 1;
            let i = self.index();
            let e = self.ground_elem();
            return Term::write(a, i, e);
        }
        a
    }

    fn ground_elem(&mut self) -> Term {
        match self.rng.gen_range(0..5) {
            0 => Term::class("C"),
            1 | 2 => {
                let x = self.int();
                Term::functor("f", x)
            }
            _ => {
                let x = self.int();
                Term::functor("g", x)
            }
        }
    }

    fn elem(&mut self) -> Term {
        match self.rng.gen_range(0..6) {
            0 if !self.elems.is_empty() => Term::Var(self.elems[0].clone()),
            0..=2 => {
                let a = self.array();
                let i = self.index();
                Term::read(a, i)
            }
            _ => self.ground_elem(),
        }
    }

    fn constraint(&mut self) -> Constraint {
        match self.rng.gen_range(0..10) {
            0 | 1 => {
                let rel = *[Rel::Lt, Rel::Le, Rel::Eq, Rel::Ne].choose(self.rng).unwrap();
                Constraint::new(self.int(), rel, self.int())
            }
            2 if self.arrays.len() == 2 || self.writes_left > 0 => {
                let lhs = Term::Var(self.arrays[0].clone());
                let rhs = self.array();
                if self.rng.gen_bool(0.5) {
                    Constraint::eq(lhs, rhs)
                } else {
                    Constraint::ne(lhs, rhs)
                }
            }
            3..=6 => Constraint::eq(self.elem(), self.elem()),
            _ => Constraint::ne(self.elem(), self.elem()),
        }
    }
}

/// Up to three integer variables boxed in `[-3, 3]`, at most two distinct
/// index terms, one or two arrays of elements, at most one write.
pub fn small_set<R: Rng>(rng: &mut R) -> SmallSet {
    let n_ints = rng.gen_range(1..=3);
    let ints: Vec<Sym> = (0..n_ints).map(|k| sym(&format!("X{k}"))).collect();
    let two_arrays = rng.gen_bool(0.35);
    let arrays: Vec<Sym> = if two_arrays {
        vec![sym("O"), sym("P")]
    } else {
        vec![sym("O")]
    };
    let elems = if !two_arrays && rng.gen_bool(0.4) {
        vec![sym("E")]
    } else {
        vec![]
    };
    let mut g = Gen {
        rng,
        ints: ints.clone(),
        indexes: vec![],
        arrays: arrays.clone(),
        elems: elems.clone(),
        writes_left: 1,
    };
    let n_idx = g.rng.gen_range(1..=2);
    while g.indexes.len() < n_idx {
        let t = g.int();
        if !g.indexes.contains(&t) {
            g.indexes.push(t);
        }
    }
    let n = g.rng.gen_range(1..=4);
    let mut constraints: Vec<Constraint> = (0..n).map(|_| g.constraint()).collect();
    for v in &ints {
        constraints.push(Constraint::new(Term::Var(v.clone()), Rel::Ge, Term::Int(-BOX)));
        constraints.push(Constraint::new(Term::Var(v.clone()), Rel::Le, Term::Int(BOX)));
    }
    // Keep only variables that occur, so that the oracle enumerates no
    // more than it must.
    let used: BTreeSet<Sym> = constraints
        .iter()
        .flat_map(|c| {
            let mut v = c.lhs.vars();
            v.extend(c.rhs.vars());
            v
        })
        .collect();
    SmallSet {
        constraints,
        ints,
        arrays: arrays.into_iter().filter(|a| used.contains(a)).collect(),
        elems: elems.into_iter().filter(|e| used.contains(e)).collect(),
    }
}

fn index_terms(t: &Term, out: &mut Vec<Term>) {
    match t {
        Term::Read(a, idx) => {
            index_terms(a, out);
            out.extend(idx.iter().cloned());
        }
        Term::Write(a, i, e) => {
            index_terms(a, out);
            out.push((**i).clone());
            index_terms(e, out);
        }
        _ => {}
    }
}

fn ground_elems(t: &Term, out: &mut Vec<Term>) {
    match t {
        Term::Functor(..) | Term::Class(_) => out.push(t.clone()),
        Term::Read(a, _) => ground_elems(a, out),
        Term::Write(a, _, e) => {
            ground_elems(a, out);
            ground_elems(e, out);
        }
        _ => {}
    }
}

/// Position standing for every index no term denotes.
const ELSEWHERE: Int = 1000;

struct Oracle<'s> {
    set: &'s SmallSet,
    val: Valuation,
    positions: Vec<Int>,
    universe: Vec<Value>,
    fresh_used: u32,
}

impl Oracle<'_> {
    /// Constraints whose variables all have values hold.
    fn consistent(&self) -> bool {
        self.set.constraints.iter().all(|c| {
            let mut vars = c.lhs.vars();
            vars.extend(c.rhs.vars());
            !vars.iter().all(|v| self.val.contains_key(v)) || holds(c, &self.val).unwrap()
        })
    }

    /// Picks each unknown element among the ground elements or a fresh
    /// anonymous one; fresh ones are introduced in order, which covers
    /// every equality pattern once.
    fn pick(&mut self, slots: usize, k: usize, then: &mut dyn FnMut(&mut Self, &[Value]) -> bool, acc: &mut Vec<Value>) -> bool {
        if k == slots {
            return then(self, acc);
        }
        let mut choices = self.universe.clone();
        for f in 1..=self.fresh_used + 1 {
            choices.push(Value::Elem(Elem::Opaque(f)));
        }
        for c in choices {
            let before = self.fresh_used;
            if let Value::Elem(Elem::Opaque(f)) = c {
                self.fresh_used = self.fresh_used.max(f);
            }
            acc.push(c);
            let found = self.pick(slots, k + 1, then, acc);
            acc.pop();
            self.fresh_used = before;
            if found {
                return true;
            }
        }
        false
    }

    fn arrays(&mut self, k: usize) -> bool {
        if k == self.set.arrays.len() {
            return self.consistent();
        }
        let name = self.set.arrays[k].clone();
        let slots = self.positions.len() + 1;
        let mut acc = Vec::new();
        let positions = self.positions.clone();
        let mut then = |o: &mut Self, cells: &[Value]| {
            let mut arr = ArrayValue::new(cells[0].clone());
            for (p, v) in positions.iter().zip(&cells[1..]) {
                arr.set(*p, v.clone());
            }
            o.val.insert(name.clone(), Value::Array(arr));
            let ok = o.consistent() && o.arrays(k + 1);
            o.val.remove(&name);
            ok
        };
        self.pick(slots, 0, &mut then, &mut acc)
    }

    fn elems(&mut self) -> bool {
        let names = self.set.elems.clone();
        let mut acc = Vec::new();
        let mut then = |o: &mut Self, vals: &[Value]| {
            for (n, v) in names.iter().zip(vals) {
                o.val.insert(n.clone(), v.clone());
            }
            let ok = o.consistent() && o.arrays(0);
            for n in &names {
                o.val.remove(n);
            }
            ok
        };
        self.pick(names.len(), 0, &mut then, &mut acc)
    }
}

/// Exhaustive search for a valuation: integers over the box, every other
/// value over the elements the constraints mention plus anonymous ones.
pub fn brute_force(set: &SmallSet) -> Option<Valuation> {
    let n = set.ints.len();
    let mut point = vec![-BOX; n];
    loop {
        let mut val = Valuation::new();
        for (v, x) in set.ints.iter().zip(&point) {
            val.insert(v.clone(), Value::Int(*x));
        }
        let mut oracle = Oracle {
            set,
            val,
            positions: vec![],
            universe: vec![],
            fresh_used: 0,
        };
        if oracle.consistent() {
            let mut idx = Vec::new();
            let mut ground = Vec::new();
            for c in &set.constraints {
                for t in [&c.lhs, &c.rhs] {
                    index_terms(t, &mut idx);
                    ground_elems(t, &mut ground);
                }
            }
            let mut positions: Vec<Int> = idx
                .iter()
                .map(|t| match dalnot_core::solver::eval(t, &oracle.val).unwrap() {
                    Value::Int(k) => k,
                    other => panic!("index {other}"),
                })
                .collect();
            positions.sort();
            positions.dedup();
            assert!(!positions.contains(&ELSEWHERE));
            let mut universe: Vec<Value> = ground
                .iter()
                .map(|t| dalnot_core::solver::eval(t, &oracle.val).unwrap())
                .collect();
            universe.sort();
            universe.dedup();
            oracle.positions = positions;
            oracle.universe = universe;
            if oracle.elems() {
                return Some(oracle.val);
            }
        }
        // Next point of the box, odometer style.
        let mut k = 0;
        loop {
            if k == n {
                return None;
            }
            if point[k] < BOX {
                point[k] += 1;
                break;
            }
            point[k] = -BOX;
            k += 1;
        }
    }
}

pub const FIXTURES: [&str; 5] = [
    "loops.dalsub",
    "loops_noalias.dalsub",
    "counter.dalsub",
    "dispatch.dalsub",
    "fields.dalsub",
];

/// Ground query at a random point: up to three objects of random classes,
/// and register and field values in `[-2, heap size]` so that every
/// non-positive value is null and every positive one a live object.
pub fn random_query<R: Rng>(p: &DalvikProgram, rng: &mut R) -> dalnot_core::unfold::Query {
    use dalnot_core::interp::HeapObject;
    let points: Vec<_> = p.instructions().map(|(q, _, _)| q).collect();
    let q = *points.choose(rng).unwrap();
    let n = rng.gen_range(0..=3usize);
    let top = n as Int;
    let heap: Vec<HeapObject> = (0..n)
        .map(|_| {
            let class = &p.classes().choose(rng).unwrap().name;
            let mut o = HeapObject::new(p, class).unwrap();
            for v in o.fields.values_mut() {
                *v = rng.gen_range(-2..=top);
            }
            o
        })
        .collect();
    let regs = (0..p.registers_at(q).unwrap())
        .map(|_| rng.gen_range(-2..=top))
        .collect();
    dalnot_core::unfold::Query::new(q, regs, heap)
}

/// Whether derive and the interpreter agree on a query: same visited
/// points and matching end status.
pub fn corresponds(p: &DalvikProgram, clauses: &[Clause], query: &dalnot_core::unfold::Query, budget: usize) -> Result<(), String> {
    use dalnot_core::interp::{run_from, RunStatus};
    use dalnot_core::unfold::{derive, DeriveStatus};
    let d = derive(p, clauses, query, budget);
    let run = run_from(p, query.state(p).unwrap(), budget).unwrap();
    let status_ok = matches!(
        (d.status, run.status),
        (DeriveStatus::Success, RunStatus::Halted)
            | (DeriveStatus::Failure, RunStatus::Exception(_))
            | (DeriveStatus::BudgetExhausted, RunStatus::BudgetExhausted)
    );
    if d.trace != run.trace || !status_ok {
        return Err(format!(
            "{query:?}\n derive {:?} {:?} {:?}\n run    {:?} {:?}",
            d.status, d.trace, d.diagnostics, run.status, run.trace
        ));
    }
    Ok(())
}
