//! Concrete values of the constraint domain and a direct evaluator.
//!
//! The evaluator shares no code with the decision procedure; it is what
//! solver models are checked against.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::clp::{Constraint, Rel, Term};
use crate::{Int, Sym};

/// Array element: a field term `f(n)`, a class name, or an anonymous
/// element distinct from every other value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Elem {
    Functor(Sym, Int),
    Class(Sym),
    Opaque(u32),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Value {
    Int(Int),
    Elem(Elem),
    Array(ArrayValue),
    /// Memory `[heap, next]`.
    Pair(Box<Value>, Box<Value>),
}

/// Total array: a default value plus the cells that differ from it.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ArrayValue {
    default: Box<Value>,
    cells: BTreeMap<Int, Value>,
}

impl ArrayValue {
    pub fn new(default: Value) -> Self {
        ArrayValue {
            default: Box::new(default),
            cells: BTreeMap::new(),
        }
    }

    pub fn get(&self, i: Int) -> &Value {
        self.cells.get(&i).unwrap_or(&self.default)
    }

    pub fn set(&mut self, i: Int, v: Value) {
        if v == *self.default {
            self.cells.remove(&i);
        } else {
            self.cells.insert(i, v);
        }
    }

    pub fn with(&self, i: Int, v: Value) -> Self {
        let mut out = self.clone();
        out.set(i, v);
        out
    }

    pub fn default_value(&self) -> &Value {
        &self.default
    }

    pub fn cells(&self) -> impl Iterator<Item = (Int, &Value)> {
        self.cells.iter().map(|(k, v)| (*k, v))
    }
}

pub type Valuation = BTreeMap<Sym, Value>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EvalError {
    #[error("variable {0} has no value")]
    Unbound(Sym),
    #[error("ill-sorted term {0}")]
    Sort(String),
    #[error("integer overflow in {0}")]
    Overflow(String),
}

fn int_of(t: &Term, v: &Value) -> Result<Int, EvalError> {
    match v {
        Value::Int(k) => Ok(*k),
        _ => Err(EvalError::Sort(t.to_string())),
    }
}

pub fn eval(t: &Term, val: &Valuation) -> Result<Value, EvalError> {
    eval_with(t, &|s: &Sym| val.get(s).cloned())
}

fn eval_with(t: &Term, lookup: &dyn Fn(&Sym) -> Option<Value>) -> Result<Value, EvalError> {
    let ev = |x: &Term| eval_with(x, lookup);
    match t {
        Term::Var(v) => lookup(v).ok_or_else(|| EvalError::Unbound(v.clone())),
        Term::Int(k) => Ok(Value::Int(*k)),
        Term::Lin(l) => {
            let mut acc = l.constant;
            for (v, c) in &l.coeffs {
                let x = int_of(t, &lookup(v).ok_or_else(|| EvalError::Unbound(v.clone()))?)?;
                acc = c
                    .checked_mul(x)
                    .and_then(|p| acc.checked_add(p))
                    .ok_or_else(|| EvalError::Overflow(t.to_string()))?;
            }
            Ok(Value::Int(acc))
        }
        Term::Functor(f, a) => Ok(Value::Elem(Elem::Functor(f.clone(), int_of(a, &ev(a)?)?))),
        Term::Class(c) => Ok(Value::Elem(Elem::Class(c.clone()))),
        Term::Read(a, idx) => {
            let mut cur = ev(a)?;
            for i in idx {
                let k = int_of(i, &ev(i)?)?;
                cur = match cur {
                    Value::Array(arr) => arr.get(k).clone(),
                    _ => return Err(EvalError::Sort(t.to_string())),
                };
            }
            Ok(cur)
        }
        Term::Write(a, i, e) => match ev(a)? {
            Value::Array(arr) => Ok(Value::Array(arr.with(int_of(i, &ev(i)?)?, ev(e)?))),
            _ => Err(EvalError::Sort(t.to_string())),
        },
        Term::Mem(a, i) => {
            let heap = ev(a)?;
            let next = ev(i)?;
            int_of(i, &next)?;
            Ok(Value::Pair(Box::new(heap), Box::new(next)))
        }
    }
}

/// Truth value of a constraint under a valuation.
pub fn holds(c: &Constraint, val: &Valuation) -> Result<bool, EvalError> {
    let l = eval(&c.lhs, val)?;
    let r = eval(&c.rhs, val)?;
    match c.rel {
        Rel::Eq => Ok(l == r),
        Rel::Ne => Ok(l != r),
        rel => {
            let a = int_of(&c.lhs, &l)?;
            let b = int_of(&c.rhs, &r)?;
            Ok(rel.holds(a.cmp(&b)))
        }
    }
}

pub fn all_hold(cs: &[Constraint], val: &Valuation) -> Result<bool, EvalError> {
    for c in cs {
        if !holds(c, val)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Evaluates a term under a partial substitution of values, leaving the
/// result `None` when some variable is missing.
pub fn eval_partial(t: &Term, val: &HashMap<Sym, Value>) -> Option<Value> {
    eval_with(t, &|s: &Sym| val.get(s).cloned()).ok()
}

impl fmt::Display for Elem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Elem::Functor(name, k) => write!(f, "{name}({k})"),
            Elem::Class(c) => write!(f, "'{c}'"),
            Elem::Opaque(n) => write!(f, "#{n}"),
        }
    }
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Int(k) => write!(f, "{k}"),
            Value::Elem(e) => write!(f, "{e}"),
            Value::Array(a) => {
                write!(f, "{{")?;
                for (k, v) in a.cells() {
                    write!(f, "{k}: {v}, ")?;
                }
                write!(f, "_: {}}}", a.default_value())
            }
            Value::Pair(a, i) => write!(f, "[{a}, {i}]"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clp::parse_constraint;
    use crate::sym;

    fn val(pairs: &[(&str, Value)]) -> Valuation {
        pairs.iter().map(|(k, v)| (sym(k), v.clone())).collect()
    }

    #[test]
    fn arrays_normalize_default_cells() {
        let zero = Value::Int(0);
        let a = ArrayValue::new(zero.clone());
        let b = a.with(3, Value::Int(1)).with(3, zero);
        assert_eq!(a, b);
    }

    #[test]
    fn read_over_write() {
        let obj = ArrayValue::new(Value::Elem(Elem::Opaque(0)));
        let v = val(&[
            ("O", Value::Array(obj)),
            ("I", Value::Int(2)),
            ("J", Value::Int(3)),
        ]);
        let same = parse_constraint("read(write(O,I,f(1)),I) = f(1)").unwrap();
        let other = parse_constraint("read(write(O,I,f(1)),J) = read(O,J)").unwrap();
        assert!(holds(&same, &v).unwrap());
        assert!(holds(&other, &v).unwrap());
    }

    #[test]
    fn orderings_need_integers() {
        let v = val(&[("X", Value::Elem(Elem::Class(sym("C"))))]);
        let c = parse_constraint("X < 1").unwrap();
        assert!(matches!(holds(&c, &v), Err(EvalError::Sort(_))));
        let v = val(&[]);
        assert!(matches!(
            holds(&parse_constraint("Y = 1").unwrap(), &v),
            Err(EvalError::Unbound(_))
        ));
    }
}
