//! Typed model of the supported Dalvik subset.
//!
//! Program points are global: every instruction carries a label that is
//! unique across the whole program, and the instructions of one method
//! occupy a contiguous run of labels.

mod parse;
mod print;

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use thiserror::Error;

use crate::{sym, Int, Sym};

pub use parse::parse_program;

/// Global index of an instruction.
pub type Point = u32;

/// Register index, local to a method.
pub type Reg = usize;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProgramError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("class {class} extends unknown class {superclass}")]
    UnknownSuperclass { class: Sym, superclass: Sym },
    #[error("superclass chain of {0} is cyclic")]
    CyclicHierarchy(Sym),
    #[error("class {0} is defined twice")]
    DuplicateClass(Sym),
    #[error("unknown class {0}")]
    UnknownClass(Sym),
    #[error("field {field} appears twice in the layout of {class}")]
    DuplicateField { class: Sym, field: Sym },
    #[error("field {0} is not declared by any class")]
    UnknownField(Sym),
    #[error("method {0} is defined twice")]
    DuplicateMethod(String),
    #[error("method {0} has no instructions")]
    EmptyMethod(String),
    #[error("program point {0} is used twice")]
    DuplicatePoint(Point),
    #[error("method {method}: expected label {expected}, found {found}")]
    NonContiguousPoints {
        method: String,
        expected: Point,
        found: Point,
    },
    #[error("jump at {at} targets {target}, which is not a point of the same method")]
    BadJumpTarget { at: Point, target: Point },
    #[error("register v{register} at point {at} is out of range (method has {count} registers)")]
    RegisterOutOfRange {
        at: Point,
        register: Reg,
        count: usize,
    },
    #[error("method {method} declares {registers} registers but needs at least {needed}")]
    TooFewRegisters {
        method: String,
        registers: usize,
        needed: usize,
    },
    #[error("invoke at {at} passes {passed} registers to {method}, expected {expected}")]
    InvokeArity {
        at: Point,
        method: String,
        passed: usize,
        expected: usize,
    },
}

/// Method signature: name and parameter count. Every supported method
/// returns void, so that part of the Dalvik signature is implicit.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MethodSig {
    pub name: Sym,
    pub params: usize,
}

impl MethodSig {
    pub fn new(name: &str, params: usize) -> Self {
        MethodSig {
            name: sym(name),
            params,
        }
    }
}

impl fmt::Display for MethodSig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}", self.name, self.params)
    }
}

/// Method reference at an invoke site: the static class plus the signature.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MethodRef {
    pub class: Sym,
    pub sig: MethodSig,
}

impl fmt::Display for MethodRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.class, self.sig)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Instruction {
    Const { dst: Reg, value: Int },
    Move { dst: Reg, src: Reg },
    Add { dst: Reg, src: Reg, value: Int },
    IfLt { left: Reg, right: Reg, target: Point },
    Goto { target: Point },
    Invoke { args: Vec<Reg>, method: MethodRef },
    Return,
    NewInstance { dst: Reg, class: Sym },
    Iget { dst: Reg, obj: Reg, field: Sym },
    Iput { src: Reg, obj: Reg, field: Sym },
}

impl Instruction {
    /// Registers read or written by the instruction.
    pub fn registers(&self) -> Vec<Reg> {
        match self {
            Instruction::Const { dst, .. } | Instruction::NewInstance { dst, .. } => vec![*dst],
            Instruction::Move { dst, src } | Instruction::Add { dst, src, .. } => vec![*dst, *src],
            Instruction::IfLt { left, right, .. } => vec![*left, *right],
            Instruction::Goto { .. } | Instruction::Return => vec![],
            Instruction::Invoke { args, .. } => args.clone(),
            Instruction::Iget { dst, obj, .. } => vec![*dst, *obj],
            Instruction::Iput { src, obj, .. } => vec![*src, *obj],
        }
    }

    pub fn jump_target(&self) -> Option<Point> {
        match self {
            Instruction::IfLt { target, .. } | Instruction::Goto { target } => Some(*target),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MethodId(pub usize);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MethodDef {
    pub class: Sym,
    pub sig: MethodSig,
    /// `reg(m)`.
    pub registers: usize,
    /// `q_m`, the first point of the body.
    pub entry: Point,
    /// Number of instructions; the body is `entry .. entry + len`.
    pub len: usize,
    /// Synthesized `<init>` for classes without an explicit constructor.
    pub implicit: bool,
}

impl MethodDef {
    pub fn contains(&self, q: Point) -> bool {
        q >= self.entry && ((q - self.entry) as usize) < self.len
    }

    pub fn points(&self) -> impl Iterator<Item = Point> {
        self.entry..self.entry + self.len as Point
    }

    pub fn qualified_name(&self) -> String {
        format!("{}.{}", self.class, self.sig)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassDef {
    pub name: Sym,
    pub superclass: Option<Sym>,
    /// Fields declared by this class, in declaration order.
    pub fields: Vec<Sym>,
    pub methods: Vec<MethodId>,
}

/// A parsed and validated program. Immutable after construction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DalvikProgram {
    classes: Vec<ClassDef>,
    methods: Vec<MethodDef>,
    code: BTreeMap<Point, (Instruction, MethodId)>,
    class_index: HashMap<Sym, usize>,
}

impl DalvikProgram {
    /// Builds and validates a program. Classes without an explicit `<init>/0`
    /// receive one whose body is a single `return`, placed after the highest
    /// explicit point in class order.
    pub fn new(
        classes: Vec<(Sym, Option<Sym>, Vec<Sym>)>,
        methods: Vec<(MethodDef, Vec<(Point, Instruction)>)>,
    ) -> Result<Self, ProgramError> {
        let mut program = DalvikProgram {
            classes: Vec::new(),
            methods: Vec::new(),
            code: BTreeMap::new(),
            class_index: HashMap::new(),
        };
        for (name, superclass, fields) in classes {
            if program.class_index.contains_key(&name) {
                return Err(ProgramError::DuplicateClass(name));
            }
            program.class_index.insert(name.clone(), program.classes.len());
            program.classes.push(ClassDef {
                name,
                superclass,
                fields,
                methods: Vec::new(),
            });
        }
        for (def, body) in methods {
            program.add_method(def, body)?;
        }
        program.add_implicit_constructors()?;
        program.validate()?;
        Ok(program)
    }

    fn add_method(
        &mut self,
        mut def: MethodDef,
        body: Vec<(Point, Instruction)>,
    ) -> Result<(), ProgramError> {
        let class_idx = *self
            .class_index
            .get(&def.class)
            .ok_or_else(|| ProgramError::UnknownClass(def.class.clone()))?;
        let name = def.qualified_name();
        if self.classes[class_idx]
            .methods
            .iter()
            .any(|m| self.methods[m.0].sig == def.sig)
        {
            return Err(ProgramError::DuplicateMethod(name));
        }
        let Some(&(first, _)) = body.first() else {
            return Err(ProgramError::EmptyMethod(name));
        };
        def.entry = first;
        def.len = body.len();
        let id = MethodId(self.methods.len());
        for (offset, (point, ins)) in body.into_iter().enumerate() {
            let expected = first + offset as Point;
            if point != expected {
                return Err(ProgramError::NonContiguousPoints {
                    method: name,
                    expected,
                    found: point,
                });
            }
            if self.code.insert(point, (ins, id)).is_some() {
                return Err(ProgramError::DuplicatePoint(point));
            }
        }
        self.methods.push(def);
        self.classes[class_idx].methods.push(id);
        Ok(())
    }

    fn add_implicit_constructors(&mut self) -> Result<(), ProgramError> {
        let init = MethodSig::new("<init>", 0);
        let mut next = self.code.keys().next_back().map_or(0, |q| q + 1);
        for idx in 0..self.classes.len() {
            let has_init = self.classes[idx]
                .methods
                .iter()
                .any(|m| self.methods[m.0].sig == init);
            if has_init {
                continue;
            }
            let def = MethodDef {
                class: self.classes[idx].name.clone(),
                sig: init.clone(),
                registers: 1,
                entry: next,
                len: 1,
                implicit: true,
            };
            self.add_method(def, vec![(next, Instruction::Return)])?;
            next += 1;
        }
        Ok(())
    }

    fn validate(&self) -> Result<(), ProgramError> {
        for class in &self.classes {
            if let Some(sup) = &class.superclass {
                if !self.class_index.contains_key(sup) {
                    return Err(ProgramError::UnknownSuperclass {
                        class: class.name.clone(),
                        superclass: sup.clone(),
                    });
                }
            }
            // Walking the chain detects cycles; the layout detects duplicates.
            self.superclass_chain(&class.name)?;
            let layout = self.flatten_layout(&class.name)?;
            for (i, f) in layout.iter().enumerate() {
                if layout[..i].contains(f) {
                    return Err(ProgramError::DuplicateField {
                        class: class.name.clone(),
                        field: f.clone(),
                    });
                }
            }
        }
        for method in &self.methods {
            let needed = method.sig.params + 1;
            if method.registers < needed {
                return Err(ProgramError::TooFewRegisters {
                    method: method.qualified_name(),
                    registers: method.registers,
                    needed,
                });
            }
        }
        for (&at, (ins, mid)) in &self.code {
            let method = &self.methods[mid.0];
            for register in ins.registers() {
                if register >= method.registers {
                    return Err(ProgramError::RegisterOutOfRange {
                        at,
                        register,
                        count: method.registers,
                    });
                }
            }
            if let Some(target) = ins.jump_target() {
                if !method.contains(target) {
                    return Err(ProgramError::BadJumpTarget { at, target });
                }
            }
            match ins {
                Instruction::Invoke { args, method: mref } => {
                    if args.len() != mref.sig.params + 1 {
                        return Err(ProgramError::InvokeArity {
                            at,
                            method: mref.to_string(),
                            passed: args.len(),
                            expected: mref.sig.params + 1,
                        });
                    }
                    if !self.class_index.contains_key(&mref.class) {
                        return Err(ProgramError::UnknownClass(mref.class.clone()));
                    }
                    for callee in self.sign(&mref.sig) {
                        if callee.registers < args.len() {
                            return Err(ProgramError::TooFewRegisters {
                                method: callee.qualified_name(),
                                registers: callee.registers,
                                needed: args.len(),
                            });
                        }
                    }
                }
                Instruction::NewInstance { class, .. } if !self.class_index.contains_key(class) => {
                    return Err(ProgramError::UnknownClass(class.clone()));
                }
                Instruction::Iget { field, .. } | Instruction::Iput { field, .. }
                    if !self.classes.iter().any(|c| c.fields.contains(field)) =>
                {
                    return Err(ProgramError::UnknownField(field.clone()));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn classes(&self) -> &[ClassDef] {
        &self.classes
    }

    pub fn methods(&self) -> &[MethodDef] {
        &self.methods
    }

    pub fn method(&self, id: MethodId) -> &MethodDef {
        &self.methods[id.0]
    }

    pub fn class(&self, name: &str) -> Option<&ClassDef> {
        self.class_index.get(name).map(|&i| &self.classes[i])
    }

    pub fn is_empty(&self) -> bool {
        self.code.is_empty()
    }

    /// All instructions in point order.
    pub fn instructions(&self) -> impl Iterator<Item = (Point, &Instruction, MethodId)> {
        self.code.iter().map(|(&q, (ins, m))| (q, ins, *m))
    }

    pub fn instruction(&self, q: Point) -> Option<&Instruction> {
        self.code.get(&q).map(|(ins, _)| ins)
    }

    /// Method whose body contains point `q`.
    pub fn method_at(&self, q: Point) -> Option<MethodId> {
        self.code.get(&q).map(|(_, m)| *m)
    }

    /// Registers used by the method containing `q`.
    pub fn registers_at(&self, q: Point) -> Option<usize> {
        self.method_at(q).map(|m| self.methods[m.0].registers)
    }

    /// `sign(m)`: every method with the same signature, in entry-point order.
    pub fn sign(&self, sig: &MethodSig) -> Vec<&MethodDef> {
        let mut found: Vec<&MethodDef> = self.methods.iter().filter(|m| &m.sig == sig).collect();
        found.sort_by_key(|m| m.entry);
        found
    }

    pub fn sign_ids(&self, sig: &MethodSig) -> Vec<MethodId> {
        let mut found: Vec<MethodId> = (0..self.methods.len())
            .map(MethodId)
            .filter(|&id| &self.methods[id.0].sig == sig)
            .collect();
        found.sort_by_key(|id| self.methods[id.0].entry);
        found
    }

    /// The class itself followed by its ancestors.
    pub fn superclass_chain(&self, class: &str) -> Result<Vec<Sym>, ProgramError> {
        let mut chain = Vec::new();
        let mut current = self
            .class(class)
            .ok_or_else(|| ProgramError::UnknownClass(sym(class)))?;
        loop {
            if chain.contains(&current.name) {
                return Err(ProgramError::CyclicHierarchy(current.name.clone()));
            }
            chain.push(current.name.clone());
            match &current.superclass {
                Some(sup) => {
                    current = self
                        .class(sup)
                        .ok_or_else(|| ProgramError::UnknownClass(sup.clone()))?;
                }
                None => return Ok(chain),
            }
        }
    }

    /// Field layout of `class`: inherited fields first (root class first),
    /// then own fields, each in declaration order. Slot `k + 1` of an object
    /// holds field `k` of this list; slot 0 holds the class name.
    pub fn flatten_layout(&self, class: &str) -> Result<Vec<Sym>, ProgramError> {
        let chain = self.superclass_chain(class)?;
        Ok(chain
            .iter()
            .rev()
            .flat_map(|c| self.class(c).expect("chain classes exist").fields.clone())
            .collect())
    }

    /// Layouts of every class, keyed by class name.
    pub fn layouts(&self) -> Layouts {
        Layouts(
            self.classes
                .iter()
                .map(|c| {
                    let layout = self.flatten_layout(&c.name).expect("validated program");
                    (c.name.clone(), layout)
                })
                .collect(),
        )
    }

    /// Dynamic dispatch: the closest method with signature `sig`, searching
    /// from `class` upwards along the superclass chain.
    pub fn lookup(&self, class: &str, sig: &MethodSig) -> Option<MethodId> {
        let chain = self.superclass_chain(class).ok()?;
        chain.iter().find_map(|c| {
            self.class(c)?
                .methods
                .iter()
                .copied()
                .find(|m| &self.methods[m.0].sig == sig)
        })
    }

    /// Resolves `Class.method/n`, `Class.method` or a bare method name when
    /// it is unambiguous.
    pub fn find_method(&self, spec: &str) -> Option<MethodId> {
        let (class, rest) = match spec.rsplit_once('.') {
            Some((c, r)) => (Some(c), r),
            None => (None, spec),
        };
        let (name, params) = match rest.rsplit_once('/') {
            Some((n, p)) => (n, p.parse::<usize>().ok()),
            None => (rest, None),
        };
        let matches: Vec<MethodId> = (0..self.methods.len())
            .map(MethodId)
            .filter(|id| {
                let m = &self.methods[id.0];
                &*m.sig.name == name
                    && params.is_none_or(|p| p == m.sig.params)
                    && class.is_none_or(|c| &*m.class == c)
            })
            .collect();
        match matches.as_slice() {
            [one] => Some(*one),
            _ => None,
        }
    }

    /// Every integer literal in the program, sorted and deduplicated.
    pub fn constants(&self) -> Vec<Int> {
        let mut out: Vec<Int> = self
            .code
            .values()
            .filter_map(|(ins, _)| match ins {
                Instruction::Const { value, .. } | Instruction::Add { value, .. } => Some(*value),
                _ => None,
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Class layouts: class name to flattened field list. Used by the solver to
/// restrict which slot an `f(..)` field term may occupy.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Layouts(pub BTreeMap<Sym, Vec<Sym>>);

impl Layouts {
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// `(class, slot)` pairs whose slot holds `field`. Slots start at 1.
    pub fn slots_of(&self, field: &str) -> Vec<(Sym, Int)> {
        let mut out = Vec::new();
        for (class, fields) in &self.0 {
            for (k, f) in fields.iter().enumerate() {
                if &**f == field {
                    out.push((class.clone(), k as Int + 1));
                }
            }
        }
        out
    }

    pub fn slot_in(&self, class: &str, field: &str) -> Option<Int> {
        self.0
            .get(class)?
            .iter()
            .position(|f| &**f == field)
            .map(|k| k as Int + 1)
    }

    pub fn contains_class(&self, class: &str) -> bool {
        self.0.contains_key(class)
    }
}
