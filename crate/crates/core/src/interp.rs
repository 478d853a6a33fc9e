//! Reference operational semantics of the bytecode subset.
//!
//! Integers are unbounded in the CLP model; here they are `i64` and an
//! overflowing `add` aborts the execution like an exception would.

use std::collections::BTreeMap;
use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::program::{DalvikProgram, Instruction, MethodId, Point};
use crate::{Int, Sym};

/// A concrete object: its class and the value of every field in its layout.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HeapObject {
    pub class: Sym,
    pub fields: BTreeMap<Sym, Int>,
}

impl HeapObject {
    /// A fresh object with every field of the class layout set to 0.
    pub fn new(program: &DalvikProgram, class: &str) -> Option<Self> {
        let layout = program.flatten_layout(class).ok()?;
        Some(HeapObject {
            class: program.class(class)?.name.clone(),
            fields: layout.into_iter().map(|f| (f, 0)).collect(),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub method: MethodId,
    pub point: Point,
    pub registers: Vec<Int>,
}

/// Call stack plus heap. Location `k >= 1` is `heap[k - 1]`; 0 is null.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DvmState {
    pub stack: Vec<Frame>,
    pub heap: Vec<HeapObject>,
}

impl DvmState {
    pub fn point(&self) -> Option<Point> {
        self.stack.last().map(|f| f.point)
    }

    pub fn object(&self, location: Int) -> Option<&HeapObject> {
        if location < 1 {
            return None;
        }
        self.heap.get(usize::try_from(location - 1).ok()?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExceptionKind {
    NullReceiver,
    DanglingReference,
    NoSuchField,
    NoSuchMethod,
    Overflow,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StepOutcome {
    Continue(DvmState),
    Halt(DvmState),
    Exception { point: Point, kind: ExceptionKind },
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum InterpError {
    #[error("{method} uses {registers} registers but {given} values were given")]
    TooManyArgs {
        method: String,
        registers: usize,
        given: usize,
    },
    #[error("no instruction at point {0}")]
    InvalidPoint(Point),
    #[error("step budget must be at least 1")]
    ZeroBudget,
}

/// Entry state for `entry`: the arguments land in the last registers, every
/// other register is 0.
pub fn initial_state(
    program: &DalvikProgram,
    entry: MethodId,
    args: &[Int],
    heap: Vec<HeapObject>,
) -> Result<DvmState, InterpError> {
    let method = program.method(entry);
    if args.len() > method.registers {
        return Err(InterpError::TooManyArgs {
            method: method.qualified_name(),
            registers: method.registers,
            given: args.len(),
        });
    }
    let mut registers = vec![0; method.registers - args.len()];
    registers.extend_from_slice(args);
    Ok(DvmState {
        stack: vec![Frame {
            method: entry,
            point: method.entry,
            registers,
        }],
        heap,
    })
}

/// State at an arbitrary point `q` with a full register file.
pub fn state_at(
    program: &DalvikProgram,
    q: Point,
    registers: Vec<Int>,
    heap: Vec<HeapObject>,
) -> Result<DvmState, InterpError> {
    let method = program.method_at(q).ok_or(InterpError::InvalidPoint(q))?;
    let count = program.method(method).registers;
    if registers.len() != count {
        return Err(InterpError::TooManyArgs {
            method: program.method(method).qualified_name(),
            registers: count,
            given: registers.len(),
        });
    }
    Ok(DvmState {
        stack: vec![Frame {
            method,
            point: q,
            registers,
        }],
        heap,
    })
}

/// Executes the instruction at the top frame's point.
pub fn step(program: &DalvikProgram, mut state: DvmState) -> Result<StepOutcome, InterpError> {
    let frame = state.stack.last_mut().expect("step on an empty stack");
    let q = frame.point;
    let ins = program.instruction(q).ok_or(InterpError::InvalidPoint(q))?;
    let throw = |kind| Ok(StepOutcome::Exception { point: q, kind });
    match ins {
        Instruction::Const { dst, value } => {
            frame.registers[*dst] = *value;
            frame.point += 1;
        }
        Instruction::Move { dst, src } => {
            frame.registers[*dst] = frame.registers[*src];
            frame.point += 1;
        }
        Instruction::Add { dst, src, value } => {
            let Some(sum) = frame.registers[*src].checked_add(*value) else {
                return throw(ExceptionKind::Overflow);
            };
            frame.registers[*dst] = sum;
            frame.point += 1;
        }
        Instruction::IfLt {
            left,
            right,
            target,
        } => {
            frame.point = if frame.registers[*left] < frame.registers[*right] {
                *target
            } else {
                q + 1
            };
        }
        Instruction::Goto { target } => frame.point = *target,
        Instruction::Return => {
            state.stack.pop();
            match state.stack.last_mut() {
                Some(caller) => caller.point += 1,
                None => return Ok(StepOutcome::Halt(state)),
            }
        }
        Instruction::NewInstance { dst, class } => {
            let object = HeapObject::new(program, class).expect("validated class");
            state.heap.push(object);
            let location = state.heap.len() as Int;
            let frame = state.stack.last_mut().expect("frame");
            frame.registers[*dst] = location;
            frame.point += 1;
        }
        Instruction::Iget { dst, obj, field } => {
            let location = frame.registers[*obj];
            if location == 0 {
                return throw(ExceptionKind::NullReceiver);
            }
            let Some(object) = state.object(location) else {
                return throw(ExceptionKind::DanglingReference);
            };
            let Some(&value) = object.fields.get(field) else {
                return throw(ExceptionKind::NoSuchField);
            };
            let frame = state.stack.last_mut().expect("frame");
            frame.registers[*dst] = value;
            frame.point += 1;
        }
        Instruction::Iput { src, obj, field } => {
            let location = frame.registers[*obj];
            let value = frame.registers[*src];
            if location == 0 {
                return throw(ExceptionKind::NullReceiver);
            }
            if state.object(location).is_none() {
                return throw(ExceptionKind::DanglingReference);
            }
            let object = &mut state.heap[(location - 1) as usize];
            match object.fields.get_mut(field) {
                Some(slot) => *slot = value,
                None => return throw(ExceptionKind::NoSuchField),
            }
            state.stack.last_mut().expect("frame").point += 1;
        }
        Instruction::Invoke { args, method } => {
            let receiver = frame.registers[args[0]];
            let actuals: Vec<Int> = args.iter().map(|&r| frame.registers[r]).collect();
            if receiver == 0 {
                return throw(ExceptionKind::NullReceiver);
            }
            let Some(object) = state.object(receiver) else {
                return throw(ExceptionKind::DanglingReference);
            };
            let Some(callee) = program.lookup(&object.class, &method.sig) else {
                return throw(ExceptionKind::NoSuchMethod);
            };
            let def = program.method(callee);
            let mut registers = vec![0; def.registers - actuals.len()];
            registers.extend(actuals);
            state.stack.push(Frame {
                method: callee,
                point: def.entry,
                registers,
            });
        }
    }
    Ok(StepOutcome::Continue(state))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Halted,
    Exception(ExceptionKind),
    BudgetExhausted,
}

impl fmt::Display for RunStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunStatus::Halted => write!(f, "halted"),
            RunStatus::Exception(kind) => write!(f, "exception ({kind:?})"),
            RunStatus::BudgetExhausted => write!(f, "budget-exhausted"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    /// Points of the executed instructions, in order.
    pub trace: Vec<Point>,
    pub status: RunStatus,
    pub final_state: DvmState,
}

/// Runs at most `budget` steps from `state`.
pub fn run_from(
    program: &DalvikProgram,
    mut state: DvmState,
    budget: usize,
) -> Result<RunResult, InterpError> {
    if budget == 0 {
        return Err(InterpError::ZeroBudget);
    }
    let mut trace = Vec::new();
    while trace.len() < budget {
        let q = state.point().expect("non-empty stack");
        trace.push(q);
        let snapshot = state.clone();
        match step(program, state)? {
            StepOutcome::Continue(next) => state = next,
            StepOutcome::Halt(end) => {
                return Ok(RunResult {
                    trace,
                    status: RunStatus::Halted,
                    final_state: end,
                })
            }
            StepOutcome::Exception { kind, .. } => {
                return Ok(RunResult {
                    trace,
                    status: RunStatus::Exception(kind),
                    final_state: snapshot,
                })
            }
        }
    }
    Ok(RunResult {
        trace,
        status: RunStatus::BudgetExhausted,
        final_state: state,
    })
}

/// `initial_state` followed by `run_from`.
pub fn run(
    program: &DalvikProgram,
    entry: MethodId,
    args: &[Int],
    heap: Vec<HeapObject>,
    budget: usize,
) -> Result<RunResult, InterpError> {
    let state = initial_state(program, entry, args, heap)?;
    run_from(program, state, budget)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::program::parse_program;
    use crate::sym;

    const LOOPS_M: &str = r#"
        class Loops {
            field i;
            method m(2) registers 4 {
                0: iget v0, v1, i
                1: if-lt v0, v2, 3
                2: return
                3: iget v0, v1, i
                4: add v0, v0, 1
                5: iput v0, v1, i
                6: iget v0, v3, i
                7: add v0, v0, -1
                8: iput v0, v3, i
                9: goto 0
            }
        }
    "#;

    fn loops_object(p: &DalvikProgram) -> HeapObject {
        HeapObject::new(p, "Loops").unwrap()
    }

    #[test]
    fn arguments_land_in_last_registers() {
        let p = parse_program(LOOPS_M).unwrap();
        let m = p.find_method("Loops.m").unwrap();
        let s = initial_state(&p, m, &[1, 2, 1], vec![]).unwrap();
        assert_eq!(s.stack[0].registers, vec![0, 1, 2, 1]);
        assert_eq!(s.point(), Some(0));
        assert!(matches!(
            initial_state(&p, m, &[1, 2, 3, 4, 5], vec![]),
            Err(InterpError::TooManyArgs { .. })
        ));
    }

    #[test]
    fn zero_arg_method_gets_zeroed_registers() {
        let p = parse_program("class A { method f(0) registers 2 { 0: return } }").unwrap();
        let s = initial_state(&p, p.find_method("f").unwrap(), &[], vec![]).unwrap();
        assert_eq!(s.stack[0].registers, vec![0, 0]);
    }

    #[test]
    fn if_lt_jumps_when_less() {
        let p = parse_program(LOOPS_M).unwrap();
        let s = state_at(&p, 1, vec![0, 1, 2, 1], vec![loops_object(&p)]).unwrap();
        match step(&p, s).unwrap() {
            StepOutcome::Continue(next) => assert_eq!(next.point(), Some(3)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn goto_and_null_dereference() {
        let p = parse_program(LOOPS_M).unwrap();
        let s = state_at(&p, 9, vec![0, 1, 2, 1], vec![loops_object(&p)]).unwrap();
        match step(&p, s).unwrap() {
            StepOutcome::Continue(next) => assert_eq!(next.point(), Some(0)),
            other => panic!("unexpected {other:?}"),
        }
        let s = state_at(&p, 0, vec![0, 0, 2, 0], vec![]).unwrap();
        assert_eq!(
            step(&p, s).unwrap(),
            StepOutcome::Exception {
                point: 0,
                kind: ExceptionKind::NullReceiver
            }
        );
    }

    #[test]
    fn single_return_halts() {
        let p = parse_program("class A { method f(0) registers 1 { 7: return } }").unwrap();
        let r = run(&p, p.find_method("f").unwrap(), &[], vec![], 10).unwrap();
        assert_eq!(r.trace, vec![7]);
        assert_eq!(r.status, RunStatus::Halted);
    }

    #[test]
    fn distinct_objects_make_the_loop_terminate() {
        // this = 1, x = 2, n = 2: this.i goes 0 -> 1 -> 2, x.i goes 0 -> -1 -> -2.
        let p = parse_program(LOOPS_M).unwrap();
        let m = p.find_method("Loops.m").unwrap();
        let heap = vec![loops_object(&p), loops_object(&p)];
        let r = run(&p, m, &[1, 2, 2], heap, 1000).unwrap();
        assert_eq!(r.status, RunStatus::Halted);
        let iterations = r.trace.iter().filter(|&&q| q == 9).count();
        assert_eq!(iterations, 2);
        assert_eq!(r.final_state.heap[0].fields[&sym("i")], 2);
        assert_eq!(r.final_state.heap[1].fields[&sym("i")], -2);
    }

    #[test]
    fn aliased_objects_loop_forever() {
        let p = parse_program(LOOPS_M).unwrap();
        let m = p.find_method("Loops.m").unwrap();
        let r = run(&p, m, &[1, 2, 1], vec![loops_object(&p)], 500).unwrap();
        assert_eq!(r.status, RunStatus::BudgetExhausted);
        assert_eq!(r.trace.len(), 500);
    }

    #[test]
    fn frames_are_isolated() {
        let src = r#"
            class A {
                method main(0) registers 3 {
                    0: new-instance v0, A
                    1: const v1, 7
                    2: invoke v0, A.clobber/0
                    3: return
                }
                method clobber(0) registers 2 {
                    4: const v0, 99
                    5: return
                }
            }
        "#;
        let p = parse_program(src).unwrap();
        let mut state = initial_state(&p, p.find_method("main").unwrap(), &[], vec![]).unwrap();
        for _ in 0..5 {
            state = match step(&p, state).unwrap() {
                StepOutcome::Continue(s) => s,
                other => panic!("unexpected {other:?}"),
            };
        }
        assert_eq!(state.point(), Some(3));
        assert_eq!(state.stack[0].registers, vec![1, 7, 0]);
    }

    #[test]
    fn allocation_is_monotone() {
        let src = r#"
            class A {
                method main(0) registers 2 {
                    0: new-instance v0, A
                    1: new-instance v1, A
                    2: return
                }
            }
        "#;
        let p = parse_program(src).unwrap();
        let r = run(&p, p.find_method("main").unwrap(), &[], vec![], 10).unwrap();
        assert_eq!(r.final_state.heap.len(), 2);
        let s = initial_state(&p, p.find_method("main").unwrap(), &[], vec![]).unwrap();
        let StepOutcome::Continue(s) = step(&p, s).unwrap() else {
            panic!()
        };
        assert_eq!(s.stack[0].registers[0], 1);
    }

    #[test]
    fn zero_budget_is_rejected() {
        let p = parse_program(LOOPS_M).unwrap();
        let m = p.find_method("Loops.m").unwrap();
        assert_eq!(run(&p, m, &[], vec![], 0).unwrap_err(), InterpError::ZeroBudget);
    }
}
