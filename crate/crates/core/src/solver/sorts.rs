//! Sort inference for untyped constraint sets.

use std::collections::HashMap;

use thiserror::Error;

use crate::clp::{Constraint, Term};
use crate::Sym;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Sort {
    Int,
    /// Field terms and class names.
    Elem,
    /// Arrays of elements.
    Obj,
    /// Arrays of objects.
    Heap,
    /// `[heap, next]` pairs.
    Mem,
}

impl Sort {
    /// Sort of the cells of an array sort.
    pub fn cell(self) -> Option<Sort> {
        match self {
            Sort::Heap => Some(Sort::Obj),
            Sort::Obj => Some(Sort::Elem),
            _ => None,
        }
    }

    /// Array sort whose cells have this sort.
    pub fn array_of(self) -> Option<Sort> {
        match self {
            Sort::Obj => Some(Sort::Heap),
            Sort::Elem => Some(Sort::Obj),
            _ => None,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("ill-sorted: {0}")]
pub struct SortError(pub String);

pub type Sorts = HashMap<Sym, Sort>;

struct Infer {
    sorts: Sorts,
    changed: bool,
}

impl Infer {
    fn assign(&mut self, v: &Sym, s: Sort, ctx: &Term) -> Result<(), SortError> {
        match self.sorts.get(v) {
            Some(old) if *old == s => Ok(()),
            Some(old) => Err(SortError(format!(
                "{v} used as {old:?} and as {s:?} in {ctx}"
            ))),
            None => {
                self.sorts.insert(v.clone(), s);
                self.changed = true;
                Ok(())
            }
        }
    }

    /// Checks `t` against `expected` and returns its sort when known.
    fn term(&mut self, t: &Term, expected: Option<Sort>) -> Result<Option<Sort>, SortError> {
        let got = match t {
            Term::Var(v) => {
                if let Some(e) = expected {
                    self.assign(v, e, t)?;
                }
                self.sorts.get(v).copied()
            }
            Term::Int(_) => Some(Sort::Int),
            Term::Lin(l) => {
                for v in l.coeffs.keys() {
                    self.assign(v, Sort::Int, t)?;
                }
                Some(Sort::Int)
            }
            Term::Functor(_, a) => {
                self.term(a, Some(Sort::Int))?;
                Some(Sort::Elem)
            }
            Term::Class(_) => Some(Sort::Elem),
            Term::Read(a, idx) => {
                for i in idx {
                    self.term(i, Some(Sort::Int))?;
                }
                if idx.len() == 2 {
                    self.term(a, Some(Sort::Heap))?;
                    Some(Sort::Elem)
                } else {
                    let arr = expected.and_then(Sort::array_of);
                    match self.term(a, arr)? {
                        Some(s) => Some(s.cell().ok_or_else(|| {
                            SortError(format!("read from non-array in {t}"))
                        })?),
                        None => None,
                    }
                }
            }
            Term::Write(a, i, e) => {
                self.term(i, Some(Sort::Int))?;
                let mut s = expected;
                if s.is_none() {
                    s = self.term(a, None)?;
                }
                if s.is_none() {
                    s = self.term(e, None)?.and_then(Sort::array_of);
                }
                if let Some(s) = s {
                    let cell = s
                        .cell()
                        .ok_or_else(|| SortError(format!("write into non-array in {t}")))?;
                    self.term(a, Some(s))?;
                    self.term(e, Some(cell))?;
                }
                s
            }
            Term::Mem(a, i) => {
                self.term(a, Some(Sort::Heap))?;
                self.term(i, Some(Sort::Int))?;
                Some(Sort::Mem)
            }
        };
        if let (Some(e), Some(g)) = (expected, got) {
            if e != g {
                return Err(SortError(format!("{t} is {g:?}, expected {e:?}")));
            }
        }
        Ok(got.or(expected))
    }

    fn constraint(&mut self, c: &Constraint) -> Result<(), SortError> {
        if c.rel.is_ordering() {
            self.term(&c.lhs, Some(Sort::Int))?;
            self.term(&c.rhs, Some(Sort::Int))?;
            return Ok(());
        }
        let s = match self.term(&c.lhs, None)? {
            Some(s) => Some(s),
            None => self.term(&c.rhs, None)?,
        };
        if let Some(s) = s {
            self.term(&c.lhs, Some(s))?;
            self.term(&c.rhs, Some(s))?;
        }
        Ok(())
    }
}

fn array_bases(t: &Term, out: &mut Vec<Sym>) {
    match t {
        Term::Read(a, idx) => {
            if let Term::Var(v) = &**a {
                out.push(v.clone());
            }
            array_bases(a, out);
            idx.iter().for_each(|i| array_bases(i, out));
        }
        Term::Write(a, i, e) => {
            if let Term::Var(v) = &**a {
                out.push(v.clone());
            }
            array_bases(a, out);
            array_bases(i, out);
            array_bases(e, out);
        }
        Term::Functor(_, a) => array_bases(a, out),
        Term::Mem(a, i) => {
            array_bases(a, out);
            array_bases(i, out);
        }
        _ => {}
    }
}

/// Sort of every variable. Variables left open by the constraints default
/// to objects when used as arrays and to integers otherwise; either choice
/// is equisatisfiable since all such sorts are infinite.
pub fn infer(cs: &[Constraint]) -> Result<Sorts, SortError> {
    let mut inf = Infer {
        sorts: HashMap::new(),
        changed: true,
    };
    let mut bases = Vec::new();
    for c in cs {
        array_bases(&c.lhs, &mut bases);
        array_bases(&c.rhs, &mut bases);
    }
    loop {
        while inf.changed {
            inf.changed = false;
            for c in cs {
                inf.constraint(c)?;
            }
        }
        if let Some(v) = bases.iter().find(|v| !inf.sorts.contains_key(*v)) {
            let v = v.clone();
            inf.assign(&v, Sort::Obj, &Term::Var(v.clone()))?;
            continue;
        }
        let open = cs
            .iter()
            .flat_map(|c| {
                let mut vs = c.lhs.vars();
                vs.extend(c.rhs.vars());
                vs
            })
            .find(|v| !inf.sorts.contains_key(v));
        match open {
            Some(v) => inf.assign(&v, Sort::Int, &Term::Var(v.clone()))?,
            None => return Ok(inf.sorts),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clp::parse_constraint;

    fn sorts(src: &[&str]) -> Result<Sorts, SortError> {
        let cs: Vec<Constraint> = src.iter().map(|s| parse_constraint(s).unwrap()).collect();
        infer(&cs)
    }

    #[test]
    fn compiled_shapes() {
        let s = sorts(&[
            "M = [A,I]",
            "read(A,V1,F) = i(X)",
            "O = read(A,V1)",
            "A1 = write(A,V1,O1)",
            "Mp = M",
        ])
        .unwrap();
        assert_eq!(s["A"], Sort::Heap);
        assert_eq!(s["O"], Sort::Obj);
        assert_eq!(s["O1"], Sort::Obj);
        assert_eq!(s["A1"], Sort::Heap);
        assert_eq!(s["F"], Sort::Int);
        assert_eq!(s["X"], Sort::Int);
        assert_eq!(s["Mp"], Sort::Mem);
    }

    #[test]
    fn defaults() {
        let s = sorts(&["read(O,K) = E", "X = Y"]).unwrap();
        assert_eq!(s["O"], Sort::Obj);
        assert_eq!(s["E"], Sort::Elem);
        assert_eq!(s["X"], Sort::Int);
    }

    #[test]
    fn clashes() {
        assert!(sorts(&["X < 1", "X = f(1)"]).is_err());
        assert!(sorts(&["read(X,1) = 2"]).is_err());
        assert!(sorts(&["M = [A,I]", "read(A,1) = f(2)"]).is_err());
    }
}
