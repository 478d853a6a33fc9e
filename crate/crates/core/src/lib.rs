//! Compile a small Dalvik bytecode subset into constraint logic programs over
//! integers and arrays, and look for non-termination witnesses over the
//! binary unfoldings of the result.
//!
//! Pipeline: [`program`] parses the textual input, [`compile`] produces the
//! [`clp`] clauses, [`unfold`] derives and unfolds them with the help of the
//! array [`solver`], and [`nonterm`] searches for recurrent sets. [`interp`]
//! is the reference interpreter the CLP semantics is checked against.

pub mod clp;
pub mod compile;
pub mod interp;
pub mod nonterm;
pub mod program;
pub mod solver;
pub mod unfold;

use std::sync::Arc;

/// Integer values of the bytecode and of CLP terms.
pub type Int = i64;

/// Scalar used by the linear-arithmetic engine. Wider than [`Int`] so that
/// Fourier-Motzkin products of program constants do not overflow.
pub type LinScalar = i128;

/// Linear constraint system over [`LinScalar`].
pub type LinSystem = solver::linear::System<LinScalar>;

/// Interned-ish identifier shared across programs, clauses and values.
pub type Sym = Arc<str>;

pub fn sym(s: &str) -> Sym {
    Arc::from(s)
}
