//! Satisfiability of flattened constraint sets over heaps, objects,
//! elements and integers.
//!
//! Terms are hash-consed into nodes. A disequality between arrays becomes a
//! disequality between their cells at a fresh index, so that afterwards
//! only elements are ever required to differ. The search then fixes, per
//! array component, which index terms denote the same integer; under such
//! an arrangement reads and writes reduce to congruence closure over
//! (array class, index class) cells. Element classes are checked for
//! constructor clashes, which yields further integer constraints, and the
//! integer part goes to the linear engine. Models are assembled from the
//! final congruence and the integer model.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::linear::{LinVerdict, Limits, RowKind, System};
use super::sorts::{Sort, SortError, Sorts};
use super::value::{ArrayValue, Elem, Valuation, Value};
use crate::clp::{Constraint, LinTerm, Rel, Term};
use crate::program::Layouts;
use crate::{sym, Int, LinScalar, Sym};

type NodeId = usize;
type IdxId = usize;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
enum Node {
    HVar(Sym),
    HWrite(NodeId, IdxId, NodeId),
    OVar(Sym),
    ORead(NodeId, IdxId),
    OWrite(NodeId, IdxId, NodeId),
    EVar(Sym),
    EFun(Sym, LinTerm),
    EClass(Sym),
    ERead(NodeId, IdxId),
}

/// `lin rel 0`.
type Row = (LinTerm, Rel);

#[derive(Debug, Clone, Default)]
struct Alt {
    rows: Vec<Row>,
    nes: Vec<(NodeId, NodeId)>,
}

#[derive(Debug, Clone)]
struct SlotOpt {
    row: Row,
    class_eq: (NodeId, NodeId),
}

#[derive(Debug, Default)]
struct Flat {
    nodes: Vec<Node>,
    ids: HashMap<Node, NodeId>,
    indices: Vec<LinTerm>,
    index_ids: HashMap<LinTerm, IdxId>,
    rows: Vec<Row>,
    eqs: Vec<(NodeId, NodeId)>,
    nes: Vec<(NodeId, NodeId)>,
    /// One alternative of each entry must hold.
    choices: Vec<Vec<Alt>>,
    /// Admissible slots for each `o[i] = f(..)`.
    slots: Vec<Vec<SlotOpt>>,
    int_vars: BTreeSet<Sym>,
    fresh: usize,
}

fn sort_of(t: &Term, sorts: &Sorts) -> Result<Sort, SortError> {
    let bad = || SortError(format!("cannot sort {t}"));
    Ok(match t {
        Term::Var(v) => *sorts.get(v).ok_or_else(bad)?,
        Term::Int(_) | Term::Lin(_) => Sort::Int,
        Term::Functor(..) | Term::Class(_) => Sort::Elem,
        Term::Read(a, idx) => {
            let mut s = sort_of(a, sorts)?;
            for _ in idx {
                s = s.cell().ok_or_else(bad)?;
            }
            s
        }
        Term::Write(a, ..) => sort_of(a, sorts)?,
        Term::Mem(..) => Sort::Mem,
    })
}

fn mem_part(v: &Sym, part: &str) -> Sym {
    sym(&format!("{v}#{part}"))
}

impl Flat {
    fn node(&mut self, n: Node) -> NodeId {
        if let Some(&id) = self.ids.get(&n) {
            return id;
        }
        let id = self.nodes.len();
        self.nodes.push(n.clone());
        self.ids.insert(n, id);
        id
    }

    fn lin(&mut self, t: &Term) -> Result<LinTerm, SortError> {
        let l = t
            .as_lin()
            .ok_or_else(|| SortError(format!("{t} is not an integer")))?;
        self.int_vars.extend(l.coeffs.keys().cloned());
        Ok(l)
    }

    fn index(&mut self, l: LinTerm) -> IdxId {
        self.int_vars.extend(l.coeffs.keys().cloned());
        if let Some(&id) = self.index_ids.get(&l) {
            return id;
        }
        let id = self.indices.len();
        self.indices.push(l.clone());
        self.index_ids.insert(l, id);
        id
    }

    fn idx(&mut self, t: &Term) -> Result<IdxId, SortError> {
        let l = self.lin(t)?;
        Ok(self.index(l))
    }

    fn fresh_index(&mut self) -> IdxId {
        self.fresh += 1;
        let v = sym(&format!("#k{}", self.fresh));
        self.index(LinTerm::var(v))
    }

    fn term(&mut self, t: &Term, s: Sort) -> Result<NodeId, SortError> {
        let bad = || SortError(format!("{t} used as {s:?}"));
        let n = match t {
            Term::Var(v) => match s {
                Sort::Heap => Node::HVar(v.clone()),
                Sort::Obj => Node::OVar(v.clone()),
                Sort::Elem => Node::EVar(v.clone()),
                _ => return Err(bad()),
            },
            Term::Functor(f, a) if s == Sort::Elem => Node::EFun(f.clone(), self.lin(a)?),
            Term::Class(c) if s == Sort::Elem => Node::EClass(c.clone()),
            Term::Read(a, idx) => {
                let mut base = s;
                for _ in idx {
                    base = base.array_of().ok_or_else(bad)?;
                }
                let mut cur = self.term(a, base)?;
                let mut cur_sort = base;
                for i in idx {
                    let i = self.idx(i)?;
                    cur = match cur_sort {
                        Sort::Heap => self.node(Node::ORead(cur, i)),
                        Sort::Obj => self.node(Node::ERead(cur, i)),
                        _ => return Err(bad()),
                    };
                    cur_sort = cur_sort.cell().ok_or_else(bad)?;
                }
                return Ok(cur);
            }
            Term::Write(a, i, e) => {
                let cell = s.cell().ok_or_else(bad)?;
                let a = self.term(a, s)?;
                let i = self.idx(i)?;
                let e = self.term(e, cell)?;
                match s {
                    Sort::Heap => Node::HWrite(a, i, e),
                    _ => Node::OWrite(a, i, e),
                }
            }
            _ => return Err(bad()),
        };
        Ok(self.node(n))
    }

    fn mem(&mut self, t: &Term) -> Result<(NodeId, LinTerm), SortError> {
        match t {
            Term::Var(v) => {
                let heap = self.node(Node::HVar(mem_part(v, "a")));
                let next = mem_part(v, "i");
                self.int_vars.insert(next.clone());
                Ok((heap, LinTerm::var(next)))
            }
            Term::Mem(a, i) => Ok((self.term(a, Sort::Heap)?, self.lin(i)?)),
            _ => Err(SortError(format!("{t} is not a memory"))),
        }
    }

    /// Element pairs one of which must differ for arrays `a` and `b` to
    /// differ: their cells at fresh indexes.
    fn differ(&mut self, a: NodeId, b: NodeId, s: Sort) -> (NodeId, NodeId) {
        match s {
            Sort::Heap => {
                let k = self.fresh_index();
                let oa = self.node(Node::ORead(a, k));
                let ob = self.node(Node::ORead(b, k));
                self.differ(oa, ob, Sort::Obj)
            }
            Sort::Obj => {
                let k = self.fresh_index();
                let ea = self.node(Node::ERead(a, k));
                let eb = self.node(Node::ERead(b, k));
                (ea, eb)
            }
            _ => (a, b),
        }
    }

    fn slot_rule(&mut self, read: NodeId, field: &Sym, layouts: &Layouts) {
        let Node::ERead(o, i) = self.nodes[read] else {
            return;
        };
        let zero = self.index(LinTerm::constant(0));
        let class_read = self.node(Node::ERead(o, zero));
        let mut opts = Vec::new();
        for (class, k) in layouts.slots_of(field) {
            let c = self.node(Node::EClass(class));
            let row = (self.indices[i].sub(&LinTerm::constant(k)), Rel::Eq);
            opts.push(SlotOpt {
                row,
                class_eq: (class_read, c),
            });
        }
        self.slots.push(opts);
    }

    fn constraint(&mut self, c: &Constraint, sorts: &Sorts, layouts: &Layouts) -> Result<(), SortError> {
        let s = if c.rel.is_ordering() {
            Sort::Int
        } else {
            sort_of(&c.lhs, sorts)?
        };
        match s {
            Sort::Int => {
                let d = self.lin(&c.lhs)?.sub(&self.lin(&c.rhs)?);
                self.rows.push((d, c.rel));
            }
            Sort::Mem => {
                let (ha, ia) = self.mem(&c.lhs)?;
                let (hb, ib) = self.mem(&c.rhs)?;
                let d = ia.sub(&ib);
                if c.rel == Rel::Eq {
                    self.eqs.push((ha, hb));
                    self.rows.push((d, Rel::Eq));
                } else {
                    let heap = Alt {
                        rows: vec![],
                        nes: vec![self.differ(ha, hb, Sort::Heap)],
                    };
                    let next = Alt {
                        rows: vec![(d, Rel::Ne)],
                        nes: vec![],
                    };
                    self.choices.push(vec![heap, next]);
                }
            }
            _ => {
                let a = self.term(&c.lhs, s)?;
                let b = self.term(&c.rhs, s)?;
                if c.rel == Rel::Eq {
                    self.eqs.push((a, b));
                    if s == Sort::Elem && !layouts.is_empty() {
                        for (read, other) in [(a, b), (b, a)] {
                            if let Node::EFun(f, _) = &self.nodes[other] {
                                let f = f.clone();
                                self.slot_rule(read, &f, layouts);
                            }
                        }
                    }
                } else {
                    let pair = self.differ(a, b, s);
                    self.nes.push(pair);
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, x: usize) -> usize {
        let mut r = x;
        while self.0[r] != r {
            r = self.0[r];
        }
        let mut y = x;
        while self.0[y] != r {
            let next = self.0[y];
            self.0[y] = r;
            y = next;
        }
        r
    }

    fn union(&mut self, a: usize, b: usize) -> bool {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.0[hi] = lo;
        true
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SearchLimits {
    /// Calls to the linear engine before giving up.
    pub max_branches: usize,
    pub linear: Limits,
}

impl Default for SearchLimits {
    fn default() -> Self {
        SearchLimits {
            max_branches: 20_000,
            linear: Limits::default(),
        }
    }
}

pub enum Outcome {
    Sat(Valuation),
    Unsat,
    Unknown(String),
}

/// One index term inside one array component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct Item {
    comp: usize,
    idx: IdxId,
}

struct Search<'a> {
    flat: &'a Flat,
    sorts: &'a Sorts,
    original: &'a [Constraint],
    limits: SearchLimits,
    branches: usize,
    unknown: Option<String>,
    items: Vec<Item>,
    /// Heap component of each heap node, object component of each object
    /// node.
    comp: Vec<usize>,
}

#[derive(Debug, Default)]
struct State {
    rows: Vec<Row>,
    nes: Vec<(NodeId, NodeId)>,
    eqs: Vec<(NodeId, NodeId)>,
    /// Class of each item; `reps[c]` is the first item of class `c`.
    class: Vec<usize>,
    reps: Vec<Item>,
}

enum Cells {
    Heap,
    Obj,
}

impl Search<'_> {
    fn lia(&mut self, rows: &[Row]) -> Option<LinVerdict<LinScalar>> {
        if self.branches >= self.limits.max_branches {
            self.unknown
                .get_or_insert_with(|| "search budget exhausted".to_string());
            return None;
        }
        self.branches += 1;
        let cols: BTreeMap<&Sym, usize> = self
            .flat
            .int_vars
            .iter()
            .enumerate()
            .map(|(k, v)| (v, k))
            .collect();
        let mut sys = System::<LinScalar>::new(cols.len());
        for (l, rel) in self.flat.rows.iter().chain(rows) {
            let mut coeffs: Vec<(usize, LinScalar)> = l
                .coeffs
                .iter()
                .map(|(v, c)| (cols[v], LinScalar::from(*c)))
                .collect();
            let mut k = LinScalar::from(l.constant);
            // Bring every relation to `= 0`, `!= 0` or `>= 0`.
            let kind = match rel {
                Rel::Eq => RowKind::Eq,
                Rel::Ne => RowKind::Neq,
                Rel::Ge => RowKind::Geq,
                Rel::Gt => {
                    k -= 1;
                    RowKind::Geq
                }
                Rel::Le | Rel::Lt => {
                    coeffs.iter_mut().for_each(|(_, c)| *c = -*c);
                    k = -k - if *rel == Rel::Lt { 1 } else { 0 };
                    RowKind::Geq
                }
            };
            sys.add(&coeffs, k, kind);
        }
        Some(sys.solve(self.limits.linear))
    }

    /// False only when the rows are known to be infeasible.
    fn feasible(&mut self, rows: &[Row]) -> bool {
        match self.lia(rows) {
            None => false,
            Some(LinVerdict::Sat(_)) => true,
            Some(LinVerdict::Unsat) => false,
            Some(LinVerdict::Unknown(why)) => {
                self.unknown.get_or_insert(why);
                true
            }
        }
    }

    fn exhausted(&self) -> bool {
        self.branches >= self.limits.max_branches
    }

    fn choose(&mut self, k: usize, st: &mut State) -> Option<Valuation> {
        if k == self.flat.choices.len() {
            return self.slot(0, st);
        }
        for alt in &self.flat.choices[k] {
            let (nr, nn) = (st.rows.len(), st.nes.len());
            st.rows.extend(alt.rows.iter().cloned());
            st.nes.extend(alt.nes.iter().cloned());
            let found = self.choose(k + 1, st);
            st.rows.truncate(nr);
            st.nes.truncate(nn);
            if found.is_some() || self.exhausted() {
                return found;
            }
        }
        None
    }

    fn slot(&mut self, k: usize, st: &mut State) -> Option<Valuation> {
        if k == self.flat.slots.len() {
            return self.arrange(0, st);
        }
        for opt in &self.flat.slots[k] {
            st.rows.push(opt.row.clone());
            st.eqs.push(opt.class_eq);
            let found = if self.feasible(&st.rows) {
                self.slot(k + 1, st)
            } else {
                None
            };
            st.rows.pop();
            st.eqs.pop();
            if found.is_some() || self.exhausted() {
                return found;
            }
        }
        None
    }

    fn arrange(&mut self, k: usize, st: &mut State) -> Option<Valuation> {
        if k == self.items.len() {
            return self.leaf(st);
        }
        let item = self.items[k];
        let t = &self.flat.indices[item.idx];
        for c in 0..st.reps.len() {
            let rep = st.reps[c];
            if rep.comp != item.comp {
                continue;
            }
            let d = t.sub(&self.flat.indices[rep.idx]);
            if d.is_constant() && d.constant != 0 {
                continue;
            }
            st.rows.push((d, Rel::Eq));
            let found = if self.feasible(&st.rows) {
                st.class.push(c);
                let r = self.arrange(k + 1, st);
                st.class.pop();
                r
            } else {
                None
            };
            st.rows.pop();
            if found.is_some() || self.exhausted() {
                return found;
            }
        }
        let n = st.rows.len();
        for rep in st.reps.iter().filter(|r| r.comp == item.comp) {
            let d = t.sub(&self.flat.indices[rep.idx]);
            if !d.is_constant() {
                st.rows.push((d, Rel::Ne));
            }
        }
        let found = if st.rows.len() == n || self.feasible(&st.rows) {
            st.class.push(st.reps.len());
            st.reps.push(item);
            let r = self.arrange(k + 1, st);
            st.reps.pop();
            st.class.pop();
            r
        } else {
            None
        };
        st.rows.truncate(n);
        found
    }

    fn class_of(&self, st: &State, comp: usize, idx: IdxId) -> usize {
        let k = self
            .items
            .iter()
            .position(|it| it.comp == comp && it.idx == idx)
            .expect("index arranged");
        st.class[k]
    }

    /// Congruence over the cells of one array level. Returns the cell map
    /// keyed by (array class, index class).
    fn cells(&self, level: Cells, st: &State, uf: &mut UnionFind) -> HashMap<(usize, usize), NodeId> {
        let mut writes = Vec::new();
        let mut reads = Vec::new();
        for (id, n) in self.flat.nodes.iter().enumerate() {
            match (&level, n) {
                (Cells::Heap, Node::HWrite(b, i, v)) | (Cells::Obj, Node::OWrite(b, i, v)) => {
                    let comp = self.comp[*b];
                    writes.push((id, *b, self.class_of(st, comp, *i), *v, comp));
                }
                (Cells::Heap, Node::ORead(a, i)) | (Cells::Obj, Node::ERead(a, i)) => {
                    let comp = self.comp[*a];
                    reads.push((id, *a, self.class_of(st, comp, *i)));
                }
                _ => {}
            }
        }
        let mut by_comp: HashMap<usize, Vec<usize>> = HashMap::new();
        for (c, rep) in st.reps.iter().enumerate() {
            by_comp.entry(rep.comp).or_default().push(c);
        }
        let mut cells: HashMap<(usize, usize), NodeId> = HashMap::new();
        let mut changed = true;
        while changed {
            changed = false;
            let set = |uf: &mut UnionFind, cells: &mut HashMap<(usize, usize), NodeId>, key, v| {
                match cells.get(&key) {
                    Some(&x) => uf.union(x, v),
                    None => {
                        cells.insert(key, v);
                        true
                    }
                }
            };
            for &(w, b, ci, v, comp) in &writes {
                let rw = uf.find(w);
                let rb = uf.find(b);
                changed |= set(uf, &mut cells, (rw, ci), v);
                if rw == rb {
                    // w = b{i <- v} and w = b: the cell at i is v in both.
                    continue;
                }
                for &cj in by_comp.get(&comp).into_iter().flatten() {
                    if cj == ci {
                        continue;
                    }
                    match (cells.get(&(rw, cj)).copied(), cells.get(&(rb, cj)).copied()) {
                        (Some(x), Some(y)) => changed |= uf.union(x, y),
                        (Some(x), None) => {
                            cells.insert((rb, cj), x);
                            changed = true;
                        }
                        (None, Some(y)) => {
                            cells.insert((rw, cj), y);
                            changed = true;
                        }
                        (None, None) => {}
                    }
                }
            }
            for &(r, a, ci) in &reads {
                let ra = uf.find(a);
                changed |= set(uf, &mut cells, (ra, ci), r);
            }
            if changed {
                // Array classes may have merged; rekey by current roots.
                let old = std::mem::take(&mut cells);
                for ((root, c), v) in old {
                    let root = uf.find(root);
                    match cells.get(&(root, c)) {
                        Some(&x) => {
                            uf.union(x, v);
                        }
                        None => {
                            cells.insert((root, c), v);
                        }
                    }
                }
            }
        }
        cells
    }

    fn leaf(&mut self, st: &mut State) -> Option<Valuation> {
        let flat = self.flat;
        let mut uf = UnionFind::new(flat.nodes.len());
        for &(a, b) in flat.eqs.iter().chain(&st.eqs) {
            uf.union(a, b);
        }
        let heap_cells = self.cells(Cells::Heap, st, &mut uf);
        let obj_cells = self.cells(Cells::Obj, st, &mut uf);

        // Element classes: at most one constructor each.
        let mut rows: Vec<Row> = Vec::new();
        let mut ctor: HashMap<usize, NodeId> = HashMap::new();
        for (id, n) in flat.nodes.iter().enumerate() {
            if !matches!(n, Node::EFun(..) | Node::EClass(_)) {
                continue;
            }
            let r = uf.find(id);
            match ctor.get(&r) {
                None => {
                    ctor.insert(r, id);
                }
                Some(&other) => match (&flat.nodes[other], n) {
                    (Node::EFun(f, a), Node::EFun(g, b)) if f == g => rows.push((a.sub(b), Rel::Eq)),
                    (Node::EClass(c), Node::EClass(d)) if c == d => {}
                    _ => return None,
                },
            }
        }
        for &(a, b) in flat.nes.iter().chain(&st.nes) {
            let (ra, rb) = (uf.find(a), uf.find(b));
            if ra == rb {
                return None;
            }
            if let (Some(&x), Some(&y)) = (ctor.get(&ra), ctor.get(&rb)) {
                match (&flat.nodes[x], &flat.nodes[y]) {
                    (Node::EFun(f, a), Node::EFun(g, b)) if f == g => rows.push((a.sub(b), Rel::Ne)),
                    (Node::EClass(c), Node::EClass(d)) if c == d => return None,
                    _ => {}
                }
            }
        }
        let n = st.rows.len();
        st.rows.extend(rows);
        let verdict = self.lia(&st.rows);
        st.rows.truncate(n);
        let model = match verdict? {
            LinVerdict::Sat(m) => m,
            LinVerdict::Unsat => return None,
            LinVerdict::Unknown(why) => {
                self.unknown.get_or_insert(why);
                return None;
            }
        };
        let ints: HashMap<Sym, Int> = match flat
            .int_vars
            .iter()
            .zip(&model)
            .map(|(v, x)| Int::try_from(*x).map(|x| (v.clone(), x)))
            .collect()
        {
            Ok(m) => m,
            Err(_) => {
                self.unknown
                    .get_or_insert_with(|| "model value out of range".to_string());
                return None;
            }
        };
        match self.model(st, &mut uf, &ctor, &heap_cells, &obj_cells, &ints) {
            Some(val) => Some(val),
            None => {
                self.unknown
                    .get_or_insert_with(|| "model failed the evaluator check".to_string());
                None
            }
        }
    }

    fn model(
        &self,
        st: &State,
        uf: &mut UnionFind,
        ctor: &HashMap<usize, NodeId>,
        heap_cells: &HashMap<(usize, usize), NodeId>,
        obj_cells: &HashMap<(usize, usize), NodeId>,
        ints: &HashMap<Sym, Int>,
    ) -> Option<Valuation> {
        let flat = self.flat;
        let lin = |l: &LinTerm| -> Option<Int> {
            l.coeffs.iter().try_fold(l.constant, |acc, (v, c)| {
                acc.checked_add(c.checked_mul(*ints.get(v).unwrap_or(&0))?)
            })
        };
        let class_val: Vec<Int> = st
            .reps
            .iter()
            .map(|r| lin(&flat.indices[r.idx]))
            .collect::<Option<_>>()?;

        let mut opaque = 0u32;
        let mut next_opaque = || {
            opaque += 1;
            Elem::Opaque(opaque)
        };
        let mut elems: HashMap<usize, Value> = HashMap::new();
        let mut elem_of = |uf: &mut UnionFind, id: NodeId, next: &mut dyn FnMut() -> Elem| -> Option<Value> {
            let r = uf.find(id);
            if let Some(v) = elems.get(&r) {
                return Some(v.clone());
            }
            let v = match ctor.get(&r).map(|&c| &flat.nodes[c]) {
                Some(Node::EFun(f, a)) => Value::Elem(Elem::Functor(f.clone(), lin(a)?)),
                Some(Node::EClass(c)) => Value::Elem(Elem::Class(c.clone())),
                _ => Value::Elem(next()),
            };
            elems.insert(r, v.clone());
            Some(v)
        };

        // Write-connected array classes share the value outside the cells.
        let mut linked = UnionFind::new(flat.nodes.len());
        for (id, n) in flat.nodes.iter().enumerate() {
            if let Node::HWrite(b, ..) | Node::OWrite(b, ..) = n {
                let (ra, rb) = (uf.find(id), uf.find(*b));
                linked.union(ra, rb);
            }
        }
        let mut grouped: HashMap<usize, Vec<(usize, NodeId)>> = HashMap::new();
        for (&(root, c), &v) in obj_cells {
            grouped.entry(uf.find(root)).or_default().push((c, v));
        }
        let mut defaults: HashMap<usize, Value> = HashMap::new();
        let mut objs: HashMap<usize, Value> = HashMap::new();
        let obj_ids: Vec<NodeId> = (0..flat.nodes.len())
            .filter(|&id| matches!(flat.nodes[id], Node::OVar(_) | Node::ORead(..) | Node::OWrite(..)))
            .collect();
        for id in obj_ids {
            let r = uf.find(id);
            if objs.contains_key(&r) {
                continue;
            }
            let comp = linked.find(r);
            let default = defaults
                .entry(comp)
                .or_insert_with(|| Value::Elem(next_opaque()))
                .clone();
            let mut arr = ArrayValue::new(default);
            for &(c, v) in grouped.get(&r).into_iter().flatten() {
                arr.set(class_val[c], elem_of(uf, v, &mut next_opaque)?);
            }
            objs.insert(r, Value::Array(arr));
        }
        let mut obj_of = |uf: &mut UnionFind, id: NodeId, next: &mut dyn FnMut() -> Elem| -> Value {
            let r = uf.find(id);
            objs.entry(r)
                .or_insert_with(|| Value::Array(ArrayValue::new(Value::Elem(next()))))
                .clone()
        };
        let mut grouped: HashMap<usize, Vec<(usize, NodeId)>> = HashMap::new();
        for (&(root, c), &v) in heap_cells {
            grouped.entry(uf.find(root)).or_default().push((c, v));
        }
        let mut heaps: HashMap<usize, Value> = HashMap::new();
        let heap_ids: Vec<NodeId> = (0..flat.nodes.len())
            .filter(|&id| matches!(flat.nodes[id], Node::HVar(_) | Node::HWrite(..)))
            .collect();
        for id in heap_ids {
            let r = uf.find(id);
            if heaps.contains_key(&r) {
                continue;
            }
            let comp = linked.find(r);
            let default = match defaults.get(&comp) {
                Some(d) => d.clone(),
                None => {
                    let d = Value::Array(ArrayValue::new(Value::Elem(next_opaque())));
                    defaults.insert(comp, d.clone());
                    d
                }
            };
            let mut arr = ArrayValue::new(default);
            for &(c, v) in grouped.get(&r).into_iter().flatten() {
                arr.set(class_val[c], obj_of(uf, v, &mut next_opaque));
            }
            heaps.insert(r, Value::Array(arr));
        }

        let mut val = Valuation::new();
        for (v, s) in self.sorts {
            let node = |n: Node| flat.ids.get(&n).copied();
            let value = match s {
                Sort::Int => Value::Int(*ints.get(v).unwrap_or(&0)),
                Sort::Elem => elem_of(uf, node(Node::EVar(v.clone()))?, &mut next_opaque)?,
                Sort::Obj => obj_of(uf, node(Node::OVar(v.clone()))?, &mut next_opaque),
                Sort::Heap => heaps.get(&uf.find(node(Node::HVar(v.clone()))?))?.clone(),
                Sort::Mem => {
                    let h = node(Node::HVar(mem_part(v, "a")))?;
                    let heap = heaps.get(&uf.find(h))?.clone();
                    let next = *ints.get(&mem_part(v, "i")).unwrap_or(&0);
                    Value::Pair(Box::new(heap), Box::new(Value::Int(next)))
                }
            };
            val.insert(v.clone(), value);
        }
        match super::value::all_hold(self.original, &val) {
            Ok(true) => Some(val),
            _ => None,
        }
    }
}

/// Decides the conjunction `cs` whose variables have sorts `sorts`.
pub fn solve(cs: &[Constraint], sorts: &Sorts, layouts: &Layouts, limits: SearchLimits) -> Result<Outcome, SortError> {
    let mut flat = Flat::default();
    for c in cs {
        flat.constraint(c, sorts, layouts)?;
    }
    // Components: arrays linked by writes or equations; every object
    // stored in one heap component shares one object component.
    let mut comps = UnionFind::new(flat.nodes.len());
    for &(a, b) in &flat.eqs {
        comps.union(a, b);
    }
    for opts in &flat.slots {
        for o in opts {
            comps.union(o.class_eq.0, o.class_eq.1);
        }
    }
    for (id, n) in flat.nodes.iter().enumerate() {
        if let Node::HWrite(b, ..) | Node::OWrite(b, ..) = n {
            comps.union(id, *b);
        }
    }
    let mut stored: HashMap<usize, NodeId> = HashMap::new();
    for (id, n) in flat.nodes.iter().enumerate() {
        let (heap, obj) = match n {
            Node::ORead(h, _) => (*h, id),
            Node::HWrite(_, _, o) => (id, *o),
            _ => continue,
        };
        let hc = comps.find(heap);
        match stored.get(&hc) {
            Some(&first) => {
                comps.union(first, obj);
            }
            None => {
                stored.insert(hc, obj);
            }
        }
    }
    let comp: Vec<usize> = (0..flat.nodes.len()).map(|id| comps.find(id)).collect();
    let mut items = Vec::new();
    // Heap-level indexes first: they decide which objects coincide.
    for heap_level in [true, false] {
        for n in &flat.nodes {
            let (arr, idx) = match n {
                Node::HWrite(b, i, _) | Node::ORead(b, i) if heap_level => (*b, *i),
                Node::OWrite(b, i, _) | Node::ERead(b, i) if !heap_level => (*b, *i),
                _ => continue,
            };
            let it = Item {
                comp: comp[arr],
                idx,
            };
            if !items.contains(&it) {
                items.push(it);
            }
        }
    }
    let mut search = Search {
        flat: &flat,
        sorts,
        original: cs,
        limits,
        branches: 0,
        unknown: None,
        items,
        comp,
    };
    let mut st = State::default();
    Ok(match search.choose(0, &mut st) {
        Some(val) => Outcome::Sat(val),
        None => match search.unknown {
            Some(why) => Outcome::Unknown(why),
            None => Outcome::Unsat,
        },
    })
}
