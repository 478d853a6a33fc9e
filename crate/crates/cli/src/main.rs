//! `dalnot`: compile, run, unfold, derive and analyze Dalvik subset programs.
//!
//! Exit status is 2 for usage errors and 1 for unreadable or invalid input.
//! `run` and `derive` report how the execution ended through the status:
//! 0 when it halted, 3 on an exception or failed derivation, 4 when the
//! budget ran out. Every other successful command exits with 0.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dalnot_core::clp::pretty_program;
use dalnot_core::compile::compile_program;
use dalnot_core::interp::{initial_state, run_from, state_at, HeapObject, RunStatus};
use dalnot_core::nonterm::{analyze, AnalyzeOptions};
use dalnot_core::program::{parse_program, DalvikProgram, Point};
use dalnot_core::unfold::{binary_unfold, derive, DeriveStatus, Query, UnfoldLimits, DEFAULT_DEPTH};
use dalnot_core::Int;

const HALTED: u8 = 0;
const STOPPED: u8 = 3;
const OUT_OF_BUDGET: u8 = 4;

#[derive(Parser)]
#[command(name = "dalnot", version, about = "Non-termination proofs for a Dalvik bytecode subset")]
struct Cli {
    /// Print solver and unfolding diagnostics on stderr.
    #[arg(short, long, global = true)]
    verbose: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the CLP translation, one clause per line.
    Compile {
        file: PathBuf,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Execute a method and print the visited program points.
    Run {
        file: PathBuf,
        /// Method (`Class.name/arity`, `Class.name` or `name`) or entry point.
        #[arg(long)]
        entry: String,
        /// Arguments, placed in the last registers.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        args: Vec<Int>,
        /// Classes of fresh objects preallocated at locations 1, 2, ...
        #[arg(long, value_delimiter = ',')]
        heap: Vec<String>,
        #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
        budget: u64,
    },
    /// Print the binary unfoldings of the compiled program.
    Unfold {
        file: PathBuf,
        #[arg(long, default_value_t = DEFAULT_DEPTH as u64, value_parser = clap::value_parser!(u64).range(1..))]
        depth: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Leftmost CLP derivation from a ground query.
    Derive {
        file: PathBuf,
        /// Program point of the query atom.
        #[arg(long)]
        query: Point,
        /// Register values; missing leading registers are 0.
        #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
        args: Vec<Int>,
        #[arg(long, value_delimiter = ',')]
        heap: Vec<String>,
        #[arg(long, default_value_t = 10_000, value_parser = clap::value_parser!(u64).range(1..))]
        budget: u64,
    },
    /// Search for a non-termination witness.
    Analyze {
        file: PathBuf,
        /// Entry point or method; every method entry when absent.
        #[arg(long)]
        entry: Option<String>,
        #[arg(long, default_value_t = DEFAULT_DEPTH as u64, value_parser = clap::value_parser!(u64).range(1..))]
        depth: u64,
        /// Also write the JSON report to this path (`-` for stdout).
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

/// Problems with the input files or names in them.
struct InputError(String);

impl<E: std::fmt::Display> From<E> for InputError {
    fn from(e: E) -> Self {
        InputError(e.to_string())
    }
}

fn load(path: &Path) -> Result<DalvikProgram, InputError> {
    let text = fs::read_to_string(path)
        .map_err(|e| InputError(format!("{}: {e}", path.display())))?;
    parse_program(&text).map_err(|e| InputError(format!("{}: {e}", path.display())))
}

fn emit(text: &str, output: Option<&Path>) -> Result<(), InputError> {
    match output {
        Some(p) if p != Path::new("-") => {
            fs::write(p, text).map_err(|e| InputError(format!("{}: {e}", p.display())))
        }
        _ => {
            print!("{text}");
            Ok(())
        }
    }
}

fn heap(program: &DalvikProgram, classes: &[String]) -> Result<Vec<HeapObject>, InputError> {
    classes
        .iter()
        .map(|c| HeapObject::new(program, c).ok_or_else(|| InputError(format!("unknown class {c}"))))
        .collect()
}

/// Entry point named by a number or a method.
fn entry_point(program: &DalvikProgram, spec: &str) -> Result<Point, InputError> {
    if let Ok(q) = spec.parse::<Point>() {
        return match program.instruction(q) {
            Some(_) => Ok(q),
            None => Err(InputError(format!("no instruction at point {q}"))),
        };
    }
    program
        .find_method(spec)
        .map(|m| program.method(m).entry)
        .ok_or_else(|| InputError(format!("no unique method matches {spec}")))
}

fn trace_lines(trace: &[Point]) -> String {
    trace.iter().map(|q| format!("{q}\n")).collect()
}

fn execute(cli: Cli) -> Result<u8, InputError> {
    match cli.command {
        Command::Compile { file, output } => {
            let program = load(&file)?;
            let compiled = compile_program(&program)?;
            for w in &compiled.warnings {
                eprintln!("warning: {w}");
            }
            emit(&pretty_program(&compiled.clauses), output.as_deref())?;
            Ok(0)
        }
        Command::Run {
            file,
            entry,
            args,
            heap: classes,
            budget,
        } => {
            let program = load(&file)?;
            let q = entry_point(&program, &entry)?;
            let objects = heap(&program, &classes)?;
            let method = program.method_at(q).expect("entry has a method");
            let state = if program.method(method).entry == q {
                initial_state(&program, method, &args, objects)?
            } else {
                let mut regs = vec![0; program.method(method).registers.saturating_sub(args.len())];
                regs.extend(&args);
                state_at(&program, q, regs, objects)?
            };
            let result = run_from(&program, state, budget as usize)?;
            print!("{}", trace_lines(&result.trace));
            eprintln!("{}", result.status);
            Ok(match result.status {
                RunStatus::Halted => HALTED,
                RunStatus::Exception(_) => STOPPED,
                RunStatus::BudgetExhausted => OUT_OF_BUDGET,
            })
        }
        Command::Unfold {
            file,
            depth,
            output,
        } => {
            let program = load(&file)?;
            let compiled = compile_program(&program)?;
            let u = binary_unfold(
                &program,
                &compiled.clauses,
                UnfoldLimits {
                    depth: depth as usize,
                    ..UnfoldLimits::default()
                },
            );
            if cli.verbose {
                for d in &u.diagnostics {
                    eprintln!("note: {d}");
                }
            }
            if u.incomplete {
                eprintln!("warning: step limit reached, the set is incomplete");
            }
            emit(&pretty_program(&u.clauses), output.as_deref())?;
            Ok(0)
        }
        Command::Derive {
            file,
            query,
            args,
            heap: classes,
            budget,
        } => {
            let program = load(&file)?;
            let regs_count = program
                .registers_at(query)
                .ok_or_else(|| InputError(format!("no instruction at point {query}")))?;
            if args.len() > regs_count {
                return Err(InputError(format!(
                    "point {query} has {regs_count} registers, {} values given",
                    args.len()
                )));
            }
            let mut regs = vec![0; regs_count - args.len()];
            regs.extend(&args);
            let objects = heap(&program, &classes)?;
            let compiled = compile_program(&program)?;
            let d = derive(
                &program,
                &compiled.clauses,
                &Query::new(query, regs, objects),
                budget as usize,
            );
            if cli.verbose {
                for msg in &d.diagnostics {
                    eprintln!("note: {msg}");
                }
            }
            print!("{}", trace_lines(&d.trace));
            eprintln!("{}", d.status);
            Ok(match d.status {
                DeriveStatus::Success => HALTED,
                DeriveStatus::Failure => STOPPED,
                DeriveStatus::BudgetExhausted => OUT_OF_BUDGET,
            })
        }
        Command::Analyze {
            file,
            entry,
            depth,
            json,
        } => {
            let program = load(&file)?;
            let entry = entry.map(|e| entry_point(&program, &e)).transpose()?;
            let options = AnalyzeOptions {
                depth: depth as usize,
                ..AnalyzeOptions::default()
            };
            let (report, _) = analyze(&program, entry, options)?;
            let to_stdout = json.as_deref() == Some(Path::new("-"));
            if !to_stdout {
                print!("{}", report.text());
            }
            if let Some(path) = json {
                let mut text = serde_json::to_string_pretty(&report)?;
                text.push('\n');
                emit(&text, Some(&path))?;
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli) {
        Ok(code) => ExitCode::from(code),
        Err(InputError(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
