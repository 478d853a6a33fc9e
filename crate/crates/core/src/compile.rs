//! Translation of Dalvik instructions into CLP clauses.
//!
//! Each instruction at point `q` of a method with `r` registers becomes one
//! or more clauses with head `p_q(V0..V{r-1}, M, Mp)`. Memory instructions
//! destructure the input memory as `[A,I]`.

use thiserror::Error;

use crate::clp::{id_except, id_seq, reg_in, reg_out, Atom, Clause, Constraint, Term};
use crate::program::{DalvikProgram, Instruction, MethodSig, Point, ProgramError, Reg};
use crate::Int;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CompileError {
    #[error("point {0} has no instruction")]
    NoInstruction(Point),
    #[error(transparent)]
    Program(#[from] ProgramError),
}

/// Compiled program plus warnings about call sites that can never succeed.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CompiledProgram {
    pub clauses: Vec<Clause>,
    pub warnings: Vec<String>,
}

fn regs_in(r: usize) -> Vec<Term> {
    (0..r).map(reg_in).collect()
}

fn regs_out(r: usize) -> Vec<Term> {
    (0..r).map(reg_out).collect()
}

fn m() -> Term {
    Term::var("M")
}

fn mp() -> Term {
    Term::var("Mp")
}

fn mem(a: &str, i: &str) -> Term {
    Term::mem(Term::var(a), Term::var(i))
}

fn atom(q: Point, mut regs: Vec<Term>, input: Term, output: Term) -> Atom {
    regs.push(input);
    regs.push(output);
    Atom::point(q, regs)
}

fn except(r: usize, d: Reg) -> Vec<Constraint> {
    id_except(r, d).unwrap_or_else(|| panic!("register v{d} out of range for {r} registers"))
}

/// Straight-line clause: `p_q(V,M,Mp) <- {V'_d = value} ∪ id_{-d}, p_{q+1}(V',M,Mp)`.
fn assign(q: Point, d: Reg, value: Term, r: usize) -> Clause {
    let mut constraints = vec![Constraint::eq(reg_out(d), value)];
    constraints.extend(except(r, d));
    Clause {
        head: atom(q, regs_in(r), m(), mp()),
        constraints,
        body: vec![atom(q + 1, regs_out(r), m(), mp())],
    }
}

pub fn compile_const(q: Point, d: Reg, c: Int, r: usize) -> Clause {
    assign(q, d, Term::Int(c), r)
}

pub fn compile_move(q: Point, d: Reg, s: Reg, r: usize) -> Clause {
    assign(q, d, reg_in(s), r)
}

pub fn compile_add(q: Point, d: Reg, s: Reg, c: Int, r: usize) -> Clause {
    assign(q, d, reg_in(s).plus(c), r)
}

pub fn compile_goto(q: Point, target: Point, r: usize) -> Clause {
    Clause {
        head: atom(q, regs_in(r), m(), mp()),
        constraints: id_seq(r),
        body: vec![atom(target, regs_out(r), m(), mp())],
    }
}

/// The taken branch first, then the fall-through.
pub fn compile_iflt(q: Point, i: Reg, j: Reg, target: Point, r: usize) -> [Clause; 2] {
    assert!(i < r && j < r, "if-lt operands out of range");
    let branch = |guard: Constraint, next: Point| {
        let mut constraints = vec![guard];
        constraints.extend(id_seq(r));
        Clause {
            head: atom(q, regs_in(r), m(), mp()),
            constraints,
            body: vec![atom(next, regs_out(r), m(), mp())],
        }
    };
    [
        branch(Constraint::lt(reg_in(i), reg_in(j)), target),
        branch(Constraint::ge(reg_in(i), reg_in(j)), q + 1),
    ]
}

/// One clause per method sharing the signature, in entry-point order.
/// Callee registers are zero-padded on the left so the arguments land in
/// the last registers.
pub fn compile_invoke(
    q: Point,
    args: &[Reg],
    sig: &MethodSig,
    r: usize,
    program: &DalvikProgram,
) -> Vec<Clause> {
    assert!(!args.is_empty(), "invoke needs a receiver");
    let receiver = reg_in(args[0]);
    program
        .sign(sig)
        .into_iter()
        .map(|callee| {
            let pad = callee
                .registers
                .checked_sub(args.len())
                .expect("callee register count checked at parse time");
            let mut callee_regs = vec![Term::Int(0); pad];
            callee_regs.extend(args.iter().map(|&s| reg_in(s)));
            let mut constraints = vec![Constraint::gt(receiver.clone(), Term::Int(0))];
            constraints.extend(id_seq(r));
            Clause {
                head: atom(q, regs_in(r), m(), mp()),
                constraints,
                body: vec![
                    Atom::lookup(m(), receiver.clone(), sig.clone(), callee.entry),
                    atom(callee.entry, callee_regs, m(), Term::var("M1")),
                    atom(q + 1, regs_out(r), Term::var("M1"), mp()),
                ],
            }
        })
        .collect()
}

pub fn compile_return(q: Point, r: usize) -> Clause {
    Clause {
        head: atom(q, regs_in(r), m(), mp()),
        constraints: vec![Constraint::eq(mp(), m())],
        body: vec![],
    }
}

pub fn compile_newinstance(
    q: Point,
    d: Reg,
    class: &str,
    r: usize,
    program: &DalvikProgram,
) -> Result<Clause, CompileError> {
    let layout = program.flatten_layout(class)?;
    let o = Term::var("O");
    let mut constraints = vec![Constraint::eq(
        Term::read(o.clone(), Term::Int(0)),
        Term::class(class),
    )];
    for (k, field) in layout.iter().enumerate() {
        constraints.push(Constraint::eq(
            Term::read(o.clone(), Term::Int(k as Int + 1)),
            Term::Functor(field.clone(), Box::new(Term::Int(0))),
        ));
    }
    constraints.push(Constraint::eq(
        Term::var("A1"),
        Term::write(Term::var("A"), Term::var("I"), o),
    ));
    constraints.push(Constraint::eq(reg_out(d), Term::var("I")));
    constraints.push(Constraint::eq(Term::var("I1"), Term::var("I").plus(1)));
    constraints.extend(except(r, d));
    Ok(Clause {
        head: atom(q, regs_in(r), mem("A", "I"), mp()),
        constraints,
        body: vec![atom(q + 1, regs_out(r), mem("A1", "I1"), mp())],
    })
}

pub fn compile_iget(q: Point, d: Reg, i: Reg, field: &str, r: usize) -> Clause {
    let mut constraints = vec![
        Constraint::gt(reg_in(i), Term::Int(0)),
        Constraint::eq(
            Term::read2(Term::var("A"), reg_in(i), Term::var("F")),
            Term::functor(field, reg_out(d)),
        ),
    ];
    constraints.extend(except(r, d));
    Clause {
        head: atom(q, regs_in(r), mem("A", "I"), mp()),
        constraints,
        body: vec![atom(q + 1, regs_out(r), mem("A", "I"), mp())],
    }
}

pub fn compile_iput(q: Point, s: Reg, i: Reg, field: &str, r: usize) -> Clause {
    assert!(s < r && i < r, "iput operands out of range");
    let o = Term::var("O");
    let f = Term::var("F");
    let mut constraints = vec![
        Constraint::gt(reg_in(i), Term::Int(0)),
        Constraint::eq(o.clone(), Term::read(Term::var("A"), reg_in(i))),
        Constraint::eq(
            Term::read(o.clone(), f.clone()),
            Term::functor(field, Term::var("X")),
        ),
        Constraint::eq(
            Term::var("O1"),
            Term::write(o, f, Term::functor(field, reg_in(s))),
        ),
        Constraint::eq(
            Term::var("A1"),
            Term::write(Term::var("A"), reg_in(i), Term::var("O1")),
        ),
    ];
    constraints.extend(id_seq(r));
    Clause {
        head: atom(q, regs_in(r), mem("A", "I"), mp()),
        constraints,
        body: vec![atom(q + 1, regs_out(r), mem("A1", "I"), mp())],
    }
}

/// Clauses for the instruction at `q`, plus a warning when an invoke has
/// no candidate method.
pub fn compile_point(
    program: &DalvikProgram,
    q: Point,
) -> Result<(Vec<Clause>, Option<String>), CompileError> {
    let ins = program
        .instruction(q)
        .ok_or(CompileError::NoInstruction(q))?;
    let r = program.registers_at(q).expect("instruction has a method");
    let one = |c: Clause| Ok((vec![c], None));
    match ins {
        Instruction::Const { dst, value } => one(compile_const(q, *dst, *value, r)),
        Instruction::Move { dst, src } => one(compile_move(q, *dst, *src, r)),
        Instruction::Add { dst, src, value } => one(compile_add(q, *dst, *src, *value, r)),
        Instruction::IfLt {
            left,
            right,
            target,
        } => Ok((compile_iflt(q, *left, *right, *target, r).to_vec(), None)),
        Instruction::Goto { target } => one(compile_goto(q, *target, r)),
        Instruction::Invoke { args, method } => {
            let clauses = compile_invoke(q, args, &method.sig, r, program);
            let warning = clauses
                .is_empty()
                .then(|| format!("point {q}: no method matches {}, call always fails", method.sig));
            Ok((clauses, warning))
        }
        Instruction::Return => one(compile_return(q, r)),
        Instruction::NewInstance { dst, class } => {
            one(compile_newinstance(q, *dst, class, r, program)?)
        }
        Instruction::Iget { dst, obj, field } => one(compile_iget(q, *dst, *obj, field, r)),
        Instruction::Iput { src, obj, field } => one(compile_iput(q, *src, *obj, field, r)),
    }
}

/// Every instruction in program-point order.
pub fn compile_program(program: &DalvikProgram) -> Result<CompiledProgram, CompileError> {
    let mut out = CompiledProgram::default();
    for (q, _, _) in program.instructions() {
        let (clauses, warning) = compile_point(program, q)?;
        out.clauses.extend(clauses);
        out.warnings.extend(warning);
    }
    Ok(out)
}
