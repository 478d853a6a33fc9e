//! Parser for the simplified smali dialect:
//!
//! ```text
//! class Loops extends Object {
//!     field i;
//!     method m(2) registers 4 {
//!         0: iget v0, v1, i
//!         1: if-lt v0, v2, 3
//!         ...
//!     }
//! }
//! ```
//!
//! Registers may be written `v3` or `3`. A few Dalvik aliases are accepted
//! (`const/16`, `add-int/lit8`, `move-object`, `return-void`,
//! `invoke-virtual`, `invoke-direct`, `iget-object`, `iput-object`).
//! `#` starts a comment that runs to the end of the line.

use super::{Instruction, MethodDef, MethodRef, MethodSig, Point, ProgramError, Reg};
use super::DalvikProgram;
use crate::{sym, Int, Sym};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Word(String),
    Num(Int),
    Punct(char),
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

fn is_word_start(c: char) -> bool {
    c.is_ascii_alphabetic() || matches!(c, '_' | '$' | '<')
}

fn is_word_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '$' | '<' | '>' | '-' | '/' | '.' | ':')
}

fn lex(text: &str) -> Result<Vec<Token>, ProgramError> {
    let chars: Vec<char> = text.chars().collect();
    let mut tokens = Vec::new();
    let (mut i, mut line, mut column) = (0, 1, 1);
    let err = |line, column, message: String| ProgramError::Syntax {
        line,
        column,
        message,
    };
    while i < chars.len() {
        let c = chars[i];
        let (start_line, start_col) = (line, column);
        if c == '\n' {
            i += 1;
            line += 1;
            column = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            column += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let negative_number = c == '-' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit());
        if c.is_ascii_digit() || negative_number {
            let start = i;
            i += 1;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric()) {
                i += 1;
            }
            let raw: String = chars[start..i].iter().collect();
            column += i - start;
            let (neg, body) = match raw.strip_prefix('-') {
                Some(rest) => (true, rest),
                None => (false, raw.as_str()),
            };
            let parsed = match body.strip_prefix("0x").or_else(|| body.strip_prefix("0X")) {
                Some(hex) => Int::from_str_radix(hex, 16),
                None => body.parse::<Int>(),
            }
            .map_err(|_| err(start_line, start_col, format!("bad number `{raw}`")))?;
            tokens.push(Token {
                tok: Tok::Num(if neg { -parsed } else { parsed }),
                line: start_line,
                column: start_col,
            });
            continue;
        }
        if is_word_start(c) {
            let start = i;
            while i < chars.len() && is_word_char(chars[i]) {
                i += 1;
            }
            column += i - start;
            tokens.push(Token {
                tok: Tok::Word(chars[start..i].iter().collect()),
                line: start_line,
                column: start_col,
            });
            continue;
        }
        if matches!(c, '{' | '}' | '(' | ')' | ',' | ';' | ':') {
            i += 1;
            column += 1;
            tokens.push(Token {
                tok: Tok::Punct(c),
                line: start_line,
                column: start_col,
            });
            continue;
        }
        return Err(err(line, column, format!("unexpected character `{c}`")));
    }
    Ok(tokens)
}

struct Parser {
    tokens: Vec<Token>,
    pos: usize,
    end: (usize, usize),
}

type ClassDecl = (Sym, Option<Sym>, Vec<Sym>);
type MethodDecl = (MethodDef, Vec<(Point, Instruction)>);

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.tokens.get(self.pos).map(|t| &t.tok)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ProgramError> {
        let (line, column) = self
            .tokens
            .get(self.pos)
            .map_or(self.end, |t| (t.line, t.column));
        Err(ProgramError::Syntax {
            line,
            column,
            message: message.into(),
        })
    }

    fn expect_punct(&mut self, p: char) -> Result<(), ProgramError> {
        match self.peek() {
            Some(Tok::Punct(c)) if *c == p => {
                self.pos += 1;
                Ok(())
            }
            other => self.error(format!("expected `{p}`, found {}", describe(other))),
        }
    }

    fn eat_punct(&mut self, p: char) -> bool {
        if matches!(self.peek(), Some(Tok::Punct(c)) if *c == p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_keyword(&mut self, kw: &str) -> Result<(), ProgramError> {
        match self.peek() {
            Some(Tok::Word(w)) if w == kw => {
                self.pos += 1;
                Ok(())
            }
            other => self.error(format!("expected `{kw}`, found {}", describe(other))),
        }
    }

    fn word(&mut self, what: &str) -> Result<String, ProgramError> {
        match self.peek() {
            Some(Tok::Word(w)) => {
                let w = w.clone();
                self.pos += 1;
                Ok(w)
            }
            other => self.error(format!("expected {what}, found {}", describe(other))),
        }
    }

    fn number(&mut self, what: &str) -> Result<Int, ProgramError> {
        match self.peek() {
            Some(Tok::Num(n)) => {
                let n = *n;
                self.pos += 1;
                Ok(n)
            }
            other => self.error(format!("expected {what}, found {}", describe(other))),
        }
    }

    fn count(&mut self, what: &str) -> Result<usize, ProgramError> {
        let n = self.number(what)?;
        usize::try_from(n).or_else(|_| self.error(format!("{what} must be non-negative")))
    }

    fn register(&mut self) -> Result<Reg, ProgramError> {
        match self.peek().cloned() {
            Some(Tok::Num(n)) if n >= 0 => {
                self.pos += 1;
                Ok(n as Reg)
            }
            Some(Tok::Word(w)) => match w.strip_prefix('v').and_then(|r| r.parse::<Reg>().ok()) {
                Some(r) => {
                    self.pos += 1;
                    Ok(r)
                }
                None => self.error(format!("expected a register, found `{w}`")),
            },
            other => self.error(format!("expected a register, found {}", describe(other.as_ref()))),
        }
    }

    fn point(&mut self) -> Result<Point, ProgramError> {
        let n = self.number("a program point")?;
        Point::try_from(n).or_else(|_| self.error("program points must be non-negative"))
    }

    fn program(&mut self) -> Result<(Vec<ClassDecl>, Vec<MethodDecl>), ProgramError> {
        let mut classes = Vec::new();
        let mut methods = Vec::new();
        while self.peek().is_some() {
            self.class(&mut classes, &mut methods)?;
        }
        Ok((classes, methods))
    }

    fn class(
        &mut self,
        classes: &mut Vec<ClassDecl>,
        methods: &mut Vec<MethodDecl>,
    ) -> Result<(), ProgramError> {
        self.expect_keyword("class")?;
        let name = sym(&self.word("a class name")?);
        let superclass = if matches!(self.peek(), Some(Tok::Word(w)) if w == "extends") {
            self.pos += 1;
            Some(sym(&self.word("a superclass name")?))
        } else {
            None
        };
        self.expect_punct('{')?;
        let mut fields = Vec::new();
        loop {
            match self.peek() {
                Some(Tok::Punct('}')) => {
                    self.pos += 1;
                    break;
                }
                Some(Tok::Word(w)) if w == "field" => {
                    self.pos += 1;
                    fields.push(sym(&self.word("a field name")?));
                    self.expect_punct(';')?;
                }
                Some(Tok::Word(w)) if w == "method" => {
                    self.pos += 1;
                    methods.push(self.method(&name)?);
                }
                other => {
                    return self.error(format!(
                        "expected `field`, `method` or `}}`, found {}",
                        describe(other)
                    ))
                }
            }
        }
        classes.push((name, superclass, fields));
        Ok(())
    }

    fn method(&mut self, class: &Sym) -> Result<MethodDecl, ProgramError> {
        let name = self.word("a method name")?;
        self.expect_punct('(')?;
        let params = self.count("a parameter count")?;
        self.expect_punct(')')?;
        self.expect_keyword("registers")?;
        let registers = self.count("a register count")?;
        self.expect_punct('{')?;
        let mut body = Vec::new();
        while !self.eat_punct('}') {
            let q = self.point()?;
            self.expect_punct(':')?;
            body.push((q, self.instruction()?));
        }
        let def = MethodDef {
            class: class.clone(),
            sig: MethodSig::new(&name, params),
            registers,
            entry: 0,
            len: 0,
            implicit: false,
        };
        Ok((def, body))
    }

    fn instruction(&mut self) -> Result<Instruction, ProgramError> {
        let mnemonic = self.word("an instruction")?;
        let ins = match mnemonic.as_str() {
            "const" | "const/4" | "const/16" => {
                let dst = self.register()?;
                self.expect_punct(',')?;
                Instruction::Const {
                    dst,
                    value: self.number("a constant")?,
                }
            }
            "move" | "move-object" => {
                let dst = self.register()?;
                self.expect_punct(',')?;
                Instruction::Move {
                    dst,
                    src: self.register()?,
                }
            }
            "add" | "add-int/lit8" | "add-int/lit16" => {
                let dst = self.register()?;
                self.expect_punct(',')?;
                let src = self.register()?;
                self.expect_punct(',')?;
                Instruction::Add {
                    dst,
                    src,
                    value: self.number("a constant")?,
                }
            }
            "if-lt" => {
                let left = self.register()?;
                self.expect_punct(',')?;
                let right = self.register()?;
                self.expect_punct(',')?;
                Instruction::IfLt {
                    left,
                    right,
                    target: self.point()?,
                }
            }
            "goto" => Instruction::Goto {
                target: self.point()?,
            },
            "return" | "return-void" => Instruction::Return,
            "invoke" | "invoke-virtual" | "invoke-direct" => self.invoke()?,
            "new-instance" => {
                let dst = self.register()?;
                self.expect_punct(',')?;
                Instruction::NewInstance {
                    dst,
                    class: sym(&self.word("a class name")?),
                }
            }
            "iget" | "iget-object" => {
                let dst = self.register()?;
                self.expect_punct(',')?;
                let obj = self.register()?;
                self.expect_punct(',')?;
                Instruction::Iget {
                    dst,
                    obj,
                    field: self.field()?,
                }
            }
            "iput" | "iput-object" => {
                let src = self.register()?;
                self.expect_punct(',')?;
                let obj = self.register()?;
                self.expect_punct(',')?;
                Instruction::Iput {
                    src,
                    obj,
                    field: self.field()?,
                }
            }
            other => {
                self.pos -= 1;
                return self.error(format!("unknown instruction `{other}`"));
            }
        };
        Ok(ins)
    }

    /// `invoke v0 v2 v1, Loops.m/2`; commas and braces between registers are
    /// optional.
    fn invoke(&mut self) -> Result<Instruction, ProgramError> {
        let mut args = Vec::new();
        let braced = self.eat_punct('{');
        loop {
            if braced && self.eat_punct('}') {
                self.expect_punct(',')?;
                break;
            }
            if !braced && self.eat_punct(',') {
                if self.is_method_ref() {
                    break;
                }
                continue;
            }
            if braced && self.eat_punct(',') {
                continue;
            }
            args.push(self.register()?);
        }
        let raw = self.word("a method reference")?;
        let method = parse_method_ref(&raw).map_or_else(
            || {
                self.pos -= 1;
                self.error(format!("bad method reference `{raw}`, expected Class.name/argcount"))
            },
            Ok,
        )?;
        Ok(Instruction::Invoke { args, method })
    }

    fn is_method_ref(&self) -> bool {
        matches!(self.peek(), Some(Tok::Word(w)) if w.contains('.') && !w.starts_with('v'))
            || matches!(self.peek(), Some(Tok::Word(w)) if parse_method_ref(w).is_some())
    }

    /// Field operand: a bare name, or smali style `Class->name:Type`.
    fn field(&mut self) -> Result<Sym, ProgramError> {
        let raw = self.word("a field name")?;
        let name = match raw.split_once("->") {
            Some((_, rest)) => rest.split(':').next().unwrap_or(rest),
            None => raw.as_str(),
        };
        Ok(sym(name))
    }
}

fn parse_method_ref(raw: &str) -> Option<MethodRef> {
    let (class, rest) = raw.rsplit_once('.')?;
    let (name, params) = rest.rsplit_once('/')?;
    if class.is_empty() || name.is_empty() {
        return None;
    }
    Some(MethodRef {
        class: sym(class),
        sig: MethodSig::new(name, params.parse().ok()?),
    })
}

fn describe(tok: Option<&Tok>) -> String {
    match tok {
        None => "end of input".to_string(),
        Some(Tok::Word(w)) => format!("`{w}`"),
        Some(Tok::Num(n)) => format!("`{n}`"),
        Some(Tok::Punct(c)) => format!("`{c}`"),
    }
}

/// Parses and validates a program.
pub fn parse_program(text: &str) -> Result<DalvikProgram, ProgramError> {
    let tokens = lex(text)?;
    let end = text
        .lines()
        .enumerate()
        .last()
        .map_or((1, 1), |(i, l)| (i + 1, l.chars().count() + 1));
    let mut parser = Parser {
        tokens,
        pos: 0,
        end,
    };
    let (classes, methods) = parser.program()?;
    DalvikProgram::new(classes, methods)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_return_method() {
        let p = parse_program("class A { method run(0) registers 1 { 0: return } }").unwrap();
        assert_eq!(p.instruction(0), Some(&Instruction::Return));
        // plus the implicit constructor at point 1
        assert_eq!(p.instructions().count(), 2);
    }

    #[test]
    fn jump_to_missing_label() {
        let src = "class A { method run(0) registers 1 { 0: goto 99 } }";
        assert_eq!(
            parse_program(src),
            Err(ProgramError::BadJumpTarget { at: 0, target: 99 })
        );
    }

    #[test]
    fn jump_into_another_method_is_rejected() {
        let src = r#"class A {
            method f(0) registers 1 { 0: goto 1 }
            method g(0) registers 1 { 1: return }
        }"#;
        assert!(matches!(
            parse_program(src),
            Err(ProgramError::BadJumpTarget { at: 0, target: 1 })
        ));
    }

    #[test]
    fn register_out_of_range() {
        let src = "class A { method f(0) registers 2 { 0: const v2, 1\n 1: return } }";
        assert!(matches!(
            parse_program(src),
            Err(ProgramError::RegisterOutOfRange { register: 2, .. })
        ));
    }

    #[test]
    fn unknown_superclass() {
        assert!(matches!(
            parse_program("class A extends Missing { }"),
            Err(ProgramError::UnknownSuperclass { .. })
        ));
    }

    #[test]
    fn syntax_error_reports_position() {
        let err = parse_program("class A {\n  method f(0) registers 1 {\n    0: frobnicate v0\n  }\n}")
            .unwrap_err();
        match err {
            ProgramError::Syntax { line, column, .. } => assert_eq!((line, column), (3, 8)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn too_few_registers_for_parameters() {
        let src = "class A { method f(2) registers 2 { 0: return } }";
        assert!(matches!(
            parse_program(src),
            Err(ProgramError::TooFewRegisters { .. })
        ));
    }

    #[test]
    fn non_contiguous_labels() {
        let src = "class A { method f(0) registers 1 { 0: const v0, 1\n 2: return } }";
        assert!(matches!(
            parse_program(src),
            Err(ProgramError::NonContiguousPoints { .. })
        ));
    }

    #[test]
    fn aliases_and_operand_forms() {
        let src = r#"
            class Loops {
                field i;
                method m(0) registers 3 {
                    5: const/16 v2, 0x2
                    6: add-int/lit8 v0, v0, -0x1
                    7: iget v0, v1, Loops->i:I
                    8: invoke-virtual {v1}, Loops.m/0
                    9: invoke 1, Loops.m/0
                    10: return-void
                }
            }
        "#;
        let p = parse_program(src).unwrap();
        assert_eq!(p.instruction(5), Some(&Instruction::Const { dst: 2, value: 2 }));
        assert_eq!(
            p.instruction(6),
            Some(&Instruction::Add {
                dst: 0,
                src: 0,
                value: -1
            })
        );
        assert_eq!(
            p.instruction(7),
            Some(&Instruction::Iget {
                dst: 0,
                obj: 1,
                field: sym("i")
            })
        );
        for q in [8, 9] {
            match p.instruction(q) {
                Some(Instruction::Invoke { args, method }) => {
                    assert_eq!(args, &vec![1]);
                    assert_eq!(method.to_string(), "Loops.m/0");
                }
                other => panic!("unexpected {other:?}"),
            }
        }
    }
}
