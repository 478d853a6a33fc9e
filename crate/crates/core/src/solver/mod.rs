//! Satisfiability and entailment for constraints over integers, elements,
//! objects, heaps and memories.

pub mod linear;
mod search;
pub mod simplify;
pub mod sorts;
pub mod value;

use crate::clp::Constraint;
use crate::program::Layouts;

pub use search::SearchLimits;
pub use simplify::{simplify, Fresh, Simplified};
pub use sorts::{infer, Sort, SortError, Sorts};
pub use value::{all_hold, eval, eval_partial, holds, ArrayValue, Elem, EvalError, Valuation, Value};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Verdict {
    /// Satisfiable, with a model the evaluator accepts.
    Sat(Valuation),
    Unsat,
    Unknown(String),
}

impl Verdict {
    pub fn is_sat(&self) -> bool {
        matches!(self, Verdict::Sat(_))
    }

    pub fn is_unsat(&self) -> bool {
        matches!(self, Verdict::Unsat)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Entailment {
    Holds,
    /// A model of the premises violating the goal.
    Fails(Valuation),
    Unknown(String),
}

impl Entailment {
    pub fn holds(&self) -> bool {
        matches!(self, Entailment::Holds)
    }
}

/// Decision procedure parameterized by the class layouts of a program.
/// With layouts, a constraint `o[i] = f(..)` also requires `i` to be a slot
/// holding field `f` in the class stored at `o[0]`.
#[derive(Debug, Clone, Default)]
pub struct Solver {
    layouts: Layouts,
    limits: SearchLimits,
}

impl Solver {
    pub fn new(layouts: Layouts) -> Self {
        Solver {
            layouts,
            limits: SearchLimits::default(),
        }
    }

    pub fn with_limits(mut self, limits: SearchLimits) -> Self {
        self.limits = limits;
        self
    }

    pub fn layouts(&self) -> &Layouts {
        &self.layouts
    }

    pub fn satisfiable(&self, cs: &[Constraint]) -> Result<Verdict, SortError> {
        let sorts = infer(cs)?;
        Ok(
            match search::solve(cs, &sorts, &self.layouts, self.limits)? {
                search::Outcome::Sat(v) => Verdict::Sat(v),
                search::Outcome::Unsat => Verdict::Unsat,
                search::Outcome::Unknown(why) => Verdict::Unknown(why),
            },
        )
    }

    /// Whether every solution of `cs` satisfies `goal`.
    pub fn entails(&self, cs: &[Constraint], goal: &Constraint) -> Result<Entailment, SortError> {
        let mut all = cs.to_vec();
        all.push(goal.negate());
        Ok(match self.satisfiable(&all)? {
            Verdict::Unsat => Entailment::Holds,
            Verdict::Sat(m) => Entailment::Fails(m),
            Verdict::Unknown(why) => Entailment::Unknown(why),
        })
    }

    /// Whether `cs` entails every goal.
    pub fn entails_all(&self, cs: &[Constraint], goals: &[Constraint]) -> Result<Entailment, SortError> {
        for g in goals {
            match self.entails(cs, g)? {
                Entailment::Holds => {}
                other => return Ok(other),
            }
        }
        Ok(Entailment::Holds)
    }
}
