//! Conjunctions of linear integer constraints, decided with the Omega test.
//!
//! Equalities are eliminated by substitution, using the symmetric-modulo
//! trick when no coefficient is a unit. Inequalities are eliminated one
//! variable at a time: exactly when one side has unit coefficients,
//! otherwise through the real shadow, the dark shadow and, if both
//! disagree, the splinters. Disequalities are handled lazily by splitting
//! the first one a candidate model violates.
//!
//! Every answer comes with a model, built by back substitution and biased
//! towards values near zero.

use std::collections::HashMap;
use std::fmt;
use std::hash::Hash;

use num_integer::Integer;
use num_traits::{CheckedAdd, CheckedMul, CheckedSub, Signed};

/// Integer type the engine runs over.
pub trait Scalar:
    Integer + Signed + Clone + Hash + fmt::Debug + From<i64> + CheckedAdd + CheckedSub + CheckedMul
{
}

impl<T> Scalar for T where
    T: Integer
        + Signed
        + Clone
        + Hash
        + fmt::Debug
        + From<i64>
        + CheckedAdd
        + CheckedSub
        + CheckedMul
{
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    /// `Σ aᵢxᵢ + k = 0`
    Eq,
    /// `Σ aᵢxᵢ + k >= 0`
    Geq,
    /// `Σ aᵢxᵢ + k != 0`
    Neq,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum LinVerdict<T> {
    Sat(Vec<T>),
    Unsat,
    Unknown(String),
}

impl<T> LinVerdict<T> {
    pub fn is_sat(&self) -> bool {
        matches!(self, LinVerdict::Sat(_))
    }

    pub fn is_unsat(&self) -> bool {
        matches!(self, LinVerdict::Unsat)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum LinError {
    Overflow,
    Budget,
    Internal(&'static str),
}

type Res<T> = Result<T, LinError>;

fn add<T: Scalar>(a: &T, b: &T) -> Res<T> {
    a.checked_add(b).ok_or(LinError::Overflow)
}

fn mul<T: Scalar>(a: &T, b: &T) -> Res<T> {
    a.checked_mul(b).ok_or(LinError::Overflow)
}

fn sub<T: Scalar>(a: &T, b: &T) -> Res<T> {
    a.checked_sub(b).ok_or(LinError::Overflow)
}

fn ceil_div<T: Scalar>(a: &T, b: &T) -> T {
    -((-a.clone()).div_floor(b))
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct Row<T> {
    c: Vec<T>,
    k: T,
}

impl<T: Scalar> Row<T> {
    fn is_constant(&self) -> bool {
        self.c.iter().all(|a| a.is_zero())
    }

    /// `self + f * other`
    fn add_scaled(&self, other: &Row<T>, f: &T) -> Res<Row<T>> {
        let mut c = Vec::with_capacity(self.c.len());
        for (a, b) in self.c.iter().zip(&other.c) {
            c.push(add(a, &mul(f, b)?)?);
        }
        Ok(Row {
            c,
            k: add(&self.k, &mul(f, &other.k)?)?,
        })
    }

    fn scale(&self, f: &T) -> Res<Row<T>> {
        Ok(Row {
            c: self.c.iter().map(|a| mul(a, f)).collect::<Res<_>>()?,
            k: mul(&self.k, f)?,
        })
    }

    /// Value of the row with variable `skip` treated as zero.
    fn eval_without(&self, m: &[T], skip: usize) -> Res<T> {
        let mut acc = self.k.clone();
        for (i, (a, v)) in self.c.iter().zip(m).enumerate() {
            if i != skip && !a.is_zero() {
                acc = add(&acc, &mul(a, v)?)?;
            }
        }
        Ok(acc)
    }

    fn eval(&self, m: &[T]) -> Res<T> {
        self.eval_without(m, usize::MAX)
    }

    fn gcd(&self) -> T {
        self.c.iter().fold(T::zero(), |g, a| g.gcd(a))
    }

    /// Replaces `x_j` by `expr` (whose own `j` coefficient is zero).
    fn substitute(&self, j: usize, expr: &Row<T>) -> Res<Row<T>> {
        if self.c[j].is_zero() {
            return Ok(self.clone());
        }
        let f = self.c[j].clone();
        let mut out = self.clone();
        out.c[j] = T::zero();
        out.add_scaled(expr, &f)
    }
}

/// A conjunction of linear constraints over `nvars` integer variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct System<T> {
    nvars: usize,
    eqs: Vec<Row<T>>,
    geqs: Vec<Row<T>>,
    neqs: Vec<Row<T>>,
}

/// Work limits. Exceeding one yields `Unknown`.
#[derive(Debug, Clone, Copy)]
pub struct Limits {
    pub max_steps: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Limits { max_steps: 200_000 }
    }
}

struct Ctx {
    steps: usize,
    limits: Limits,
}

impl Ctx {
    fn tick(&mut self) -> Res<()> {
        self.steps += 1;
        if self.steps > self.limits.max_steps {
            Err(LinError::Budget)
        } else {
            Ok(())
        }
    }
}

#[derive(Clone)]
struct Problem<T> {
    n: usize,
    eqs: Vec<Row<T>>,
    geqs: Vec<Row<T>>,
}

impl<T: Scalar> System<T> {
    pub fn new(nvars: usize) -> Self {
        System {
            nvars,
            eqs: Vec::new(),
            geqs: Vec::new(),
            neqs: Vec::new(),
        }
    }

    pub fn nvars(&self) -> usize {
        self.nvars
    }

    pub fn len(&self) -> usize {
        self.eqs.len() + self.geqs.len() + self.neqs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Adds `Σ coeffs + constant (kind) 0`. Repeated variables accumulate.
    pub fn add(&mut self, coeffs: &[(usize, T)], constant: T, kind: RowKind) {
        let mut c = vec![T::zero(); self.nvars];
        for (v, a) in coeffs {
            assert!(*v < self.nvars, "variable {v} out of range");
            c[*v] = c[*v].clone() + a.clone();
        }
        let row = Row { c, k: constant };
        match kind {
            RowKind::Eq => self.eqs.push(row),
            RowKind::Geq => self.geqs.push(row),
            RowKind::Neq => self.neqs.push(row),
        }
    }

    /// Does `model` satisfy every constraint?
    pub fn holds(&self, model: &[T]) -> bool {
        let value = |r: &Row<T>| r.eval(model).ok();
        self.eqs.iter().all(|r| value(r).is_some_and(|v| v.is_zero()))
            && self
                .geqs
                .iter()
                .all(|r| value(r).is_some_and(|v| !v.is_negative()))
            && self.neqs.iter().all(|r| value(r).is_some_and(|v| !v.is_zero()))
    }

    pub fn solve(&self, limits: Limits) -> LinVerdict<T> {
        let mut ctx = Ctx { steps: 0, limits };
        let base = Problem {
            n: self.nvars,
            eqs: self.eqs.clone(),
            geqs: self.geqs.clone(),
        };
        match solve_neq(base, &self.neqs, &mut ctx) {
            Ok(Some(m)) => {
                debug_assert!(self.holds(&m), "model violates the system");
                LinVerdict::Sat(m)
            }
            Ok(None) => LinVerdict::Unsat,
            Err(LinError::Overflow) => LinVerdict::Unknown("arithmetic overflow".into()),
            Err(LinError::Budget) => LinVerdict::Unknown("step limit reached".into()),
            Err(LinError::Internal(why)) => LinVerdict::Unknown(why.into()),
        }
    }
}

fn solve_neq<T: Scalar>(p: Problem<T>, neqs: &[Row<T>], ctx: &mut Ctx) -> Res<Option<Vec<T>>> {
    let Some(m) = solve(p.clone(), ctx)? else {
        return Ok(None);
    };
    let violated = neqs.iter().position(|r| r.eval(&m).map(|v| v.is_zero()).unwrap_or(true));
    let Some(i) = violated else {
        return Ok(Some(m));
    };
    let row = &neqs[i];
    let rest: Vec<Row<T>> = neqs
        .iter()
        .enumerate()
        .filter(|&(j, _)| j != i)
        .map(|(_, r)| r.clone())
        .collect();
    let one = T::one();
    // row >= 1, then row <= -1.
    let above = Row {
        c: row.c.clone(),
        k: sub(&row.k, &one)?,
    };
    let below = Row {
        c: row.c.iter().map(|a| -a.clone()).collect(),
        k: sub(&-row.k.clone(), &one)?,
    };
    for side in [above, below] {
        let mut q = p.clone();
        q.geqs.push(side);
        if let Some(m) = solve_neq(q, &rest, ctx)? {
            return Ok(Some(m));
        }
    }
    Ok(None)
}

/// Divides rows by the gcd of their coefficients, drops trivial rows,
/// merges parallel inequalities. `false` when a contradiction shows up.
fn normalize<T: Scalar>(p: &mut Problem<T>) -> Res<bool> {
    let mut eqs = Vec::with_capacity(p.eqs.len());
    for r in p.eqs.drain(..) {
        if r.is_constant() {
            if !r.k.is_zero() {
                return Ok(false);
            }
            continue;
        }
        let g = r.gcd();
        if !r.k.is_multiple_of(&g) {
            return Ok(false);
        }
        let mut r = Row {
            c: r.c.iter().map(|a| a.clone() / g.clone()).collect(),
            k: r.k / g,
        };
        if let Some(first) = r.c.iter().find(|a| !a.is_zero()) {
            if first.is_negative() {
                r = r.scale(&-T::one())?;
            }
        }
        if !eqs.contains(&r) {
            eqs.push(r);
        }
    }
    p.eqs = eqs;

    let mut tightest: HashMap<Vec<T>, T> = HashMap::new();
    let mut order: Vec<Vec<T>> = Vec::new();
    for r in p.geqs.drain(..) {
        if r.is_constant() {
            if r.k.is_negative() {
                return Ok(false);
            }
            continue;
        }
        let g = r.gcd();
        let c: Vec<T> = r.c.iter().map(|a| a.clone() / g.clone()).collect();
        let k = r.k.div_floor(&g);
        match tightest.get_mut(&c) {
            Some(old) => {
                if k < *old {
                    *old = k;
                }
            }
            None => {
                order.push(c.clone());
                tightest.insert(c, k);
            }
        }
    }
    let mut geqs = Vec::with_capacity(order.len());
    for c in order {
        let k = tightest[&c].clone();
        let neg: Vec<T> = c.iter().map(|a| -a.clone()).collect();
        if let Some(k2) = tightest.get(&neg) {
            let s = add(&k, k2)?;
            if s.is_negative() {
                return Ok(false);
            }
            if s.is_zero() {
                // c·x + k >= 0 and -c·x - k >= 0.
                let first_positive = c.iter().find(|a| !a.is_zero()).is_some_and(|a| a.is_positive());
                if first_positive {
                    p.eqs.push(Row { c, k });
                }
                continue;
            }
        }
        geqs.push(Row { c, k });
    }
    p.geqs = geqs;
    Ok(true)
}

/// `a mod^ m`: the representative of `a` modulo `m` in `(-m/2, m/2]`.
fn mod_hat<T: Scalar>(a: &T, m: &T) -> Res<T> {
    let two = T::from(2);
    let q = add(&mul(&two, a)?, m)?.div_floor(&mul(&two, m)?);
    sub(a, &mul(m, &q)?)
}

fn solve<T: Scalar>(mut p: Problem<T>, ctx: &mut Ctx) -> Res<Option<Vec<T>>> {
    ctx.tick()?;
    if !normalize(&mut p)? {
        return Ok(None);
    }
    if !p.eqs.is_empty() {
        return solve_eq(p, ctx);
    }
    if p.geqs.is_empty() {
        return Ok(Some(vec![T::zero(); p.n]));
    }
    eliminate(p, ctx)
}

fn solve_eq<T: Scalar>(mut p: Problem<T>, ctx: &mut Ctx) -> Res<Option<Vec<T>>> {
    // Prefer an equality with a unit coefficient.
    let pick = p
        .eqs
        .iter()
        .position(|r| r.c.iter().any(|a| a.abs().is_one()))
        .unwrap_or(0);
    let eq = p.eqs.swap_remove(pick);
    if let Some(j) = eq.c.iter().position(|a| a.abs().is_one()) {
        // a_j x_j + rest = 0, so x_j = -a_j * rest.
        let mut rest = eq.clone();
        rest.c[j] = T::zero();
        let expr = rest.scale(&-eq.c[j].clone())?;
        substitute_all(&mut p, j, &expr)?;
        let Some(mut m) = solve(p, ctx)? else {
            return Ok(None);
        };
        m[j] = expr.eval(&m)?;
        return Ok(Some(m));
    }

    // No unit coefficient: introduce sigma with
    // m·sigma = Σ (a_i mod^ m) x_i + (c mod^ m), m = |a_k| + 1.
    let k = eq
        .c
        .iter()
        .enumerate()
        .filter(|(_, a)| !a.is_zero())
        .min_by(|(_, a), (_, b)| a.abs().cmp(&b.abs()))
        .map(|(i, _)| i)
        .ok_or(LinError::Internal("constant equality survived normalization"))?;
    let ak = eq.c[k].clone();
    let sign = ak.signum();
    let m = add(&ak.abs(), &T::one())?;
    let sigma = p.n;
    p.n += 1;
    for r in p.eqs.iter_mut().chain(p.geqs.iter_mut()) {
        r.c.push(T::zero());
    }
    let mut eq = eq;
    eq.c.push(T::zero());
    let mut expr = Row {
        c: vec![T::zero(); p.n],
        k: mul(&sign, &mod_hat(&eq.k, &m)?)?,
    };
    for i in 0..sigma {
        if i != k {
            expr.c[i] = mul(&sign, &mod_hat(&eq.c[i], &m)?)?;
        }
    }
    expr.c[sigma] = -mul(&sign, &m)?;
    p.eqs.push(eq.substitute(k, &expr)?);
    substitute_all(&mut p, k, &expr)?;
    let Some(mut model) = solve(p, ctx)? else {
        return Ok(None);
    };
    model[k] = expr.eval(&model)?;
    model.truncate(sigma);
    Ok(Some(model))
}

fn substitute_all<T: Scalar>(p: &mut Problem<T>, j: usize, expr: &Row<T>) -> Res<()> {
    for r in p.eqs.iter_mut().chain(p.geqs.iter_mut()) {
        *r = r.substitute(j, expr)?;
    }
    Ok(())
}

struct Choice {
    var: usize,
    lowers: usize,
    uppers: usize,
    exact: bool,
}

fn choose<T: Scalar>(p: &Problem<T>) -> Option<Choice> {
    let mut best: Option<Choice> = None;
    for v in 0..p.n {
        let (mut lo, mut up) = (0, 0);
        let (mut lo_unit, mut up_unit) = (true, true);
        for r in &p.geqs {
            let a = &r.c[v];
            if a.is_positive() {
                lo += 1;
                lo_unit &= a.is_one();
            } else if a.is_negative() {
                up += 1;
                up_unit &= a.abs().is_one();
            }
        }
        if lo + up == 0 {
            continue;
        }
        let c = Choice {
            var: v,
            lowers: lo,
            uppers: up,
            exact: lo_unit || up_unit,
        };
        let key = |c: &Choice| {
            let one_sided = c.lowers == 0 || c.uppers == 0;
            (!one_sided, !c.exact, c.lowers * c.uppers)
        };
        if best.as_ref().is_none_or(|b| key(&c) < key(b)) {
            best = Some(c);
        }
    }
    best
}

fn eliminate<T: Scalar>(p: Problem<T>, ctx: &mut Ctx) -> Res<Option<Vec<T>>> {
    let Some(choice) = choose(&p) else {
        return Err(LinError::Internal("no variable to eliminate"));
    };
    let x = choice.var;
    let mut keep = Vec::new();
    let mut lowers = Vec::new();
    let mut uppers = Vec::new();
    for r in &p.geqs {
        if r.c[x].is_positive() {
            lowers.push(r.clone());
        } else if r.c[x].is_negative() {
            uppers.push(r.clone());
        } else {
            keep.push(r.clone());
        }
    }

    if lowers.is_empty() || uppers.is_empty() {
        let q = Problem {
            n: p.n,
            eqs: vec![],
            geqs: keep,
        };
        let Some(m) = solve(q, ctx)? else {
            return Ok(None);
        };
        return back_substitute(m, x, &lowers, &uppers).map(Some);
    }

    let shadow = |dark: bool| -> Res<Problem<T>> {
        let mut geqs = keep.clone();
        for l in &lowers {
            let b = l.c[x].clone();
            for u in &uppers {
                let a = -u.c[x].clone();
                let mut row = l.scale(&a)?.add_scaled(u, &b)?;
                if dark {
                    let slack = mul(&sub(&a, &T::one())?, &sub(&b, &T::one())?)?;
                    row.k = sub(&row.k, &slack)?;
                }
                geqs.push(row);
            }
        }
        Ok(Problem {
            n: p.n,
            eqs: vec![],
            geqs,
        })
    };

    if choice.exact {
        let Some(m) = solve(shadow(false)?, ctx)? else {
            return Ok(None);
        };
        return back_substitute(m, x, &lowers, &uppers).map(Some);
    }

    if solve(shadow(false)?, ctx)?.is_none() {
        return Ok(None);
    }
    if let Some(m) = solve(shadow(true)?, ctx)? {
        return back_substitute(m, x, &lowers, &uppers).map(Some);
    }
    // Splinters: any integer solution outside the dark shadow lies close to
    // some lower bound.
    let a_max = uppers
        .iter()
        .map(|u| u.c[x].abs())
        .max()
        .expect("uppers is non-empty");
    for l in &lowers {
        let b = l.c[x].clone();
        let span = sub(&sub(&mul(&a_max, &b)?, &a_max)?, &b)?.div_floor(&a_max);
        let mut i = T::zero();
        while i <= span {
            ctx.tick()?;
            let mut q = p.clone();
            q.eqs.push(Row {
                c: l.c.clone(),
                k: sub(&l.k, &i)?,
            });
            if let Some(m) = solve(q, ctx)? {
                return Ok(Some(m));
            }
            i = i + T::one();
        }
    }
    Ok(None)
}

/// Chooses `x` within the bounds the eliminated rows impose, nearest zero.
fn back_substitute<T: Scalar>(
    mut m: Vec<T>,
    x: usize,
    lowers: &[Row<T>],
    uppers: &[Row<T>],
) -> Res<Vec<T>> {
    let mut lo: Option<T> = None;
    for l in lowers {
        // b x + rest >= 0  =>  x >= ceil(-rest / b)
        let bound = ceil_div(&-l.eval_without(&m, x)?, &l.c[x]);
        if lo.as_ref().is_none_or(|v| bound > *v) {
            lo = Some(bound);
        }
    }
    let mut hi: Option<T> = None;
    for u in uppers {
        // -a x + rest >= 0  =>  x <= floor(rest / a)
        let bound = u.eval_without(&m, x)?.div_floor(&-u.c[x].clone());
        if hi.as_ref().is_none_or(|v| bound < *v) {
            hi = Some(bound);
        }
    }
    let value = match (lo, hi) {
        (Some(l), Some(h)) if l > h => return Err(LinError::Internal("empty bound interval")),
        (Some(l), _) if l.is_positive() => l,
        (_, Some(h)) if h.is_negative() => h,
        _ => T::zero(),
    };
    m[x] = value;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_bigint::BigInt;
    use proptest::prelude::*;

    fn sys(n: usize, rows: &[(&[i64], i64, RowKind)]) -> System<i128> {
        let mut s = System::new(n);
        for (c, k, kind) in rows {
            let coeffs: Vec<(usize, i128)> =
                c.iter().enumerate().map(|(i, a)| (i, *a as i128)).collect();
            s.add(&coeffs, *k as i128, *kind);
        }
        s
    }

    use RowKind::{Eq, Geq, Neq};

    #[test]
    fn trivial_cases() {
        assert!(sys(0, &[]).solve(Limits::default()).is_sat());
        // x < y, y < x
        assert!(sys(2, &[(&[-1, 1], -1, Geq), (&[1, -1], -1, Geq)])
            .solve(Limits::default())
            .is_unsat());
        // 2x = 1
        assert!(sys(1, &[(&[2], -1, Eq)]).solve(Limits::default()).is_unsat());
    }

    #[test]
    fn integer_gap_needs_splinters() {
        // 27 <= 11x + 13y <= 45, -10 <= 7x - 9y <= 4: the real relaxation
        // is feasible, no integer point is.
        let s = sys(
            2,
            &[
                (&[11, 13], -27, Geq),
                (&[-11, -13], 45, Geq),
                (&[7, -9], 10, Geq),
                (&[-7, 9], 4, Geq),
            ],
        );
        assert!(s.solve(Limits::default()).is_unsat());
    }

    #[test]
    fn non_unit_equalities() {
        // 3x + 5y = 7 has integer solutions, e.g. x = 4, y = -1.
        let s = sys(2, &[(&[3, 5], -7, Eq)]);
        match s.solve(Limits::default()) {
            LinVerdict::Sat(m) => assert_eq!(3 * m[0] + 5 * m[1], 7),
            other => panic!("{other:?}"),
        }
        // 6x + 4y = 5 does not.
        assert!(sys(2, &[(&[6, 4], -5, Eq)]).solve(Limits::default()).is_unsat());
    }

    #[test]
    fn disequalities_split() {
        // 0 <= x <= 1, x != 0, x != 1
        let s = sys(
            1,
            &[(&[1], 0, Geq), (&[-1], 1, Geq), (&[1], 0, Neq), (&[1], -1, Neq)],
        );
        assert!(s.solve(Limits::default()).is_unsat());
        let s = sys(1, &[(&[1], 0, Neq)]);
        match s.solve(Limits::default()) {
            LinVerdict::Sat(m) => assert_ne!(m[0], 0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn step_limit_gives_unknown() {
        let s = sys(2, &[(&[3, 5], -7, Eq)]);
        assert!(matches!(
            s.solve(Limits { max_steps: 1 }),
            LinVerdict::Unknown(_)
        ));
    }

    fn brute(rows: &[(Vec<i64>, i64, RowKind)], n: usize, bound: i64) -> bool {
        let mut point = vec![-bound; n];
        loop {
            let ok = rows.iter().all(|(c, k, kind)| {
                let v: i64 = c.iter().zip(&point).map(|(a, x)| a * x).sum::<i64>() + k;
                match kind {
                    Eq => v == 0,
                    Geq => v >= 0,
                    Neq => v != 0,
                }
            });
            if ok {
                return true;
            }
            let mut i = 0;
            loop {
                if i == n {
                    return false;
                }
                point[i] += 1;
                if point[i] <= bound {
                    break;
                }
                point[i] = -bound;
                i += 1;
            }
        }
    }

    fn row_strategy(n: usize) -> impl Strategy<Value = (Vec<i64>, i64, RowKind)> {
        (
            prop::collection::vec(-4i64..=4, n),
            -6i64..=6,
            prop_oneof![3 => Just(Geq), 1 => Just(Eq), 1 => Just(Neq)],
        )
    }

    fn boxed(n: usize, bound: i64, mut rows: Vec<(Vec<i64>, i64, RowKind)>) -> Vec<(Vec<i64>, i64, RowKind)> {
        for v in 0..n {
            let mut c = vec![0; n];
            c[v] = 1;
            rows.push((c.clone(), bound, Geq));
            c[v] = -1;
            rows.push((c, bound, Geq));
        }
        rows
    }

    fn build<T: Scalar>(n: usize, rows: &[(Vec<i64>, i64, RowKind)]) -> System<T> {
        let mut s = System::new(n);
        for (c, k, kind) in rows {
            let coeffs: Vec<(usize, T)> =
                c.iter().enumerate().map(|(i, a)| (i, T::from(*a))).collect();
            s.add(&coeffs, T::from(*k), *kind);
        }
        s
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(400))]

        #[test]
        fn agrees_with_enumeration(rows in prop::collection::vec(row_strategy(3), 0..6)) {
            let rows = boxed(3, 4, rows);
            let expected = brute(&rows, 3, 4);
            let s: System<i128> = build(3, &rows);
            match s.solve(Limits::default()) {
                LinVerdict::Sat(m) => {
                    prop_assert!(expected);
                    prop_assert!(s.holds(&m));
                }
                LinVerdict::Unsat => prop_assert!(!expected),
                LinVerdict::Unknown(why) => prop_assert!(false, "unknown: {}", why),
            }
        }

        #[test]
        fn scalar_choice_does_not_change_verdict(rows in prop::collection::vec(row_strategy(3), 0..6)) {
            let small: System<i64> = build(3, &rows);
            let big: System<BigInt> = build(3, &rows);
            let a = small.solve(Limits::default());
            let b = big.solve(Limits::default());
            prop_assert_eq!(a.is_sat(), b.is_sat());
            prop_assert_eq!(a.is_unsat(), b.is_unsat());
        }
    }
}
