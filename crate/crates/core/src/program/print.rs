use std::fmt;

use super::{DalvikProgram, Instruction};

impl fmt::Display for Instruction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Instruction::Const { dst, value } => write!(f, "const v{dst}, {value}"),
            Instruction::Move { dst, src } => write!(f, "move v{dst}, v{src}"),
            Instruction::Add { dst, src, value } => write!(f, "add v{dst}, v{src}, {value}"),
            Instruction::IfLt {
                left,
                right,
                target,
            } => write!(f, "if-lt v{left}, v{right}, {target}"),
            Instruction::Goto { target } => write!(f, "goto {target}"),
            Instruction::Invoke { args, method } => {
                write!(f, "invoke")?;
                for a in args {
                    write!(f, " v{a}")?;
                }
                write!(f, ", {method}")
            }
            Instruction::Return => write!(f, "return"),
            Instruction::NewInstance { dst, class } => write!(f, "new-instance v{dst}, {class}"),
            Instruction::Iget { dst, obj, field } => write!(f, "iget v{dst}, v{obj}, {field}"),
            Instruction::Iput { src, obj, field } => write!(f, "iput v{src}, v{obj}, {field}"),
        }
    }
}

/// Prints the program in the input dialect. Implicit constructors are
/// omitted since parsing recreates them.
impl fmt::Display for DalvikProgram {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for class in self.classes() {
            write!(f, "class {}", class.name)?;
            if let Some(sup) = &class.superclass {
                write!(f, " extends {sup}")?;
            }
            writeln!(f, " {{")?;
            for field in &class.fields {
                writeln!(f, "    field {field};")?;
            }
            for &mid in &class.methods {
                let m = self.method(mid);
                if m.implicit {
                    continue;
                }
                writeln!(
                    f,
                    "    method {}({}) registers {} {{",
                    m.sig.name, m.sig.params, m.registers
                )?;
                for q in m.points() {
                    let ins = self.instruction(q).expect("method points have code");
                    writeln!(f, "        {q}: {ins}")?;
                }
                writeln!(f, "    }}")?;
            }
            writeln!(f, "}}")?;
        }
        Ok(())
    }
}
