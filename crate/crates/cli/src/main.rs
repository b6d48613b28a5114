//! `qlam`: check, infer, run, explore and consistency-check `.qlam`
//! programs.
//!
//! Exit codes: 0 success; 1 type error, untypable program, inconsistency or
//! exhausted step budget; 2 unreadable or unparsable input; 3 a runtime
//! error state was reached (only possible with `--unsafe`).

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use qlam_core::infer::{infer_all, infer_program, InferOutcome, SimpleTypeError};
use qlam_core::quantum::GateTable;
use qlam_core::reduction::{
    check_consistency, explore, run, Consistency, Distribution, ProgramState, RunOutcome,
    RunResult,
};
use qlam_core::syntax::{parse, Term};
use qlam_core::typecheck::{check, TypeError, TypingContext};
use qlam_core::types::parse_qtype;
use qlam_core::QuantumState;

#[derive(Parser)]
#[command(name = "qlam", version, about = "A quantum lambda calculus with classical control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Extend the gate table from a file (one gate per line:
    /// `NAME arity re,im re,im ...`, row-major)
    #[arg(long, global = true, value_name = "FILE")]
    gates: Option<PathBuf>,
    /// Line-oriented, tab-separated output with a stable field order
    #[arg(long, global = true)]
    machine: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Type-check a program, against an annotation or an inferred type
    Check {
        file: PathBuf,
        /// Expected type, e.g. "(qbit -o bit (*) bit) (*) (bit (*) bit -o qbit)"
        #[arg(long = "type", value_name = "TYPE")]
        type_annotation: Option<String>,
        /// Print the full derivation tree
        #[arg(long)]
        explain: bool,
    },
    /// Infer a type for the program
    Infer {
        file: PathBuf,
        /// Enumerate every type the decoration search admits
        #[arg(long)]
        all: bool,
        /// Print the derivation of the inferred type
        #[arg(long)]
        explain: bool,
    },
    /// Reduce under the seeded probabilistic semantics, printing the trace
    Run {
        file: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long = "max-steps", default_value_t = 10_000)]
        max_steps: usize,
        #[command(flatten)]
        safety: Safety,
    },
    /// Exhaustively expand the reduction tree into an outcome distribution
    Explore {
        file: PathBuf,
        #[arg(long, default_value_t = 1_000)]
        depth: usize,
        #[command(flatten)]
        safety: Safety,
    },
    /// Search all weakly reachable states (including zero-probability
    /// branches) for error states
    Consistency {
        file: PathBuf,
        #[arg(long, default_value_t = 1_000)]
        depth: usize,
    },
}

#[derive(Args)]
struct Safety {
    /// Skip the type check before running (error states become reachable)
    #[arg(long = "unsafe")]
    unchecked: bool,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    ExitCode::from(dispatch(&cli))
}

fn dispatch(cli: &Cli) -> u8 {
    let mut gates = GateTable::builtin();
    if let Some(path) = &cli.gates {
        if let Err(e) = gates.extend_from_file(path) {
            eprintln!("gate table error: {e}");
            return 2;
        }
    }
    match &cli.command {
        Command::Check { file, type_annotation, explain } => {
            cmd_check(file, type_annotation.as_deref(), *explain, &gates, cli.machine)
        }
        Command::Infer { file, all, explain } => cmd_infer(file, *all, *explain, &gates, cli.machine),
        Command::Run { file, seed, max_steps, safety } => {
            cmd_run(file, *seed, *max_steps, safety.unchecked, &gates, cli.machine)
        }
        Command::Explore { file, depth, safety } => {
            cmd_explore(file, *depth, safety.unchecked, &gates, cli.machine)
        }
        Command::Consistency { file, depth } => cmd_consistency(file, *depth, &gates, cli.machine),
    }
}

fn load(file: &Path, gates: &GateTable) -> Result<Term, u8> {
    let source = std::fs::read_to_string(file).map_err(|e| {
        eprintln!("cannot read {}: {e}", file.display());
        2u8
    })?;
    parse(&source, gates).map_err(|e| {
        eprintln!("{}: {e}", file.display());
        2u8
    })
}

fn initial_state(term: Term) -> Result<ProgramState, u8> {
    ProgramState::initial(term).map_err(|e| {
        eprintln!("cannot build a program state: {e}");
        2u8
    })
}

/// Gate for run/explore: the program must pass the checker at some inferred
/// type. Progress then guarantees no error state is reachable.
fn typecheck_gate(term: &Term) -> Result<(), u8> {
    match infer_program(term) {
        InferOutcome::Typed { .. } => Ok(()),
        other => {
            eprintln!("type error: {}; use --unsafe to run anyway", describe_failure(&other));
            Err(1)
        }
    }
}

fn describe_failure(outcome: &InferOutcome) -> String {
    match outcome {
        InferOutcome::Typed { ty, .. } => format!("well-typed at {ty}"),
        InferOutcome::NotSimplyTyped(e) => simple_error_to_type_error(e).to_string(),
        InferOutcome::NoDecoration(e) => e.to_string(),
    }
}

/// A simple-type head clash is a subtype mismatch in every decoration;
/// report it in the checker's vocabulary.
fn simple_error_to_type_error(e: &SimpleTypeError) -> TypeError {
    match e {
        SimpleTypeError::Unbound(x) => TypeError::Unbound(x.clone()),
        SimpleTypeError::Mismatch { found, required } => {
            TypeError::Subtype { found: found.clone(), required: required.clone() }
        }
        SimpleTypeError::Occurs => TypeError::Subtype {
            found: "<self-applied term>".into(),
            required: "<any type>".into(),
        },
    }
}

fn cmd_check(
    file: &Path,
    annotation: Option<&str>,
    explain: bool,
    gates: &GateTable,
    machine: bool,
) -> u8 {
    let term = match load(file, gates) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let checked = match annotation {
        Some(src) => {
            let ty = match parse_qtype(src) {
                Ok(ty) => ty,
                Err(e) => {
                    eprintln!("bad type annotation: {e}");
                    return 2;
                }
            };
            let ctx = TypingContext::qbits_for(&term);
            check(&ctx, &term, &ty).map(|d| (ty, d))
        }
        None => match infer_program(&term) {
            InferOutcome::Typed { ty, derivation } => Ok((ty, derivation)),
            InferOutcome::NotSimplyTyped(e) => Err(simple_error_to_type_error(&e)),
            InferOutcome::NoDecoration(e) => Err(e),
        },
    };
    match checked {
        Ok((ty, derivation)) => {
            if machine {
                println!("well-typed\t{ty}");
            } else {
                println!("well-typed: {ty}");
            }
            if explain {
                print!("{}", derivation.pretty_tree());
            }
            0
        }
        Err(e) => {
            eprintln!("type error: {e}");
            1
        }
    }
}

fn cmd_infer(file: &Path, all: bool, explain: bool, gates: &GateTable, machine: bool) -> u8 {
    let term = match load(file, gates) {
        Ok(t) => t,
        Err(code) => return code,
    };
    match infer_program(&term) {
        InferOutcome::Typed { ty, derivation } => {
            if machine {
                println!("type\t{ty}");
            } else {
                println!("{ty}");
            }
            if explain {
                print!("{}", derivation.pretty_tree());
            }
            if all {
                let ctx = TypingContext::qbits_for(&term);
                match infer_all(&ctx, &term, 1 << 16) {
                    Ok(tys) => {
                        for t in tys {
                            if machine {
                                println!("type\t{t}");
                            } else {
                                println!("also: {t}");
                            }
                        }
                    }
                    Err(e) => eprintln!("enumeration failed: {e}"),
                }
            }
            0
        }
        InferOutcome::NotSimplyTyped(e) => {
            println!("untypable (no simple type): {e}");
            1
        }
        InferOutcome::NoDecoration(e) => {
            println!("untypable (no valid decoration): {e}");
            1
        }
    }
}

fn amps_machine(q: &QuantumState) -> String {
    q.amplitudes()
        .iter()
        .map(|a| format!("{:.12},{:.12}", a.re, a.im))
        .collect::<Vec<_>>()
        .join(";")
}

fn term_key(state: &ProgramState) -> String {
    state.term.canonical().pretty()
}

fn cmd_run(
    file: &Path,
    seed: u64,
    max_steps: usize,
    unchecked: bool,
    gates: &GateTable,
    machine: bool,
) -> u8 {
    let term = match load(file, gates) {
        Ok(t) => t,
        Err(code) => return code,
    };
    if !unchecked {
        if let Err(code) = typecheck_gate(&term) {
            return code;
        }
    }
    let state = match initial_state(term) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let result: RunResult = run(&state, seed, max_steps, gates);
    for (i, ts) in result.trace.iter().enumerate() {
        let c = ts.state.canonical();
        if machine {
            println!("step\t{i}\t{:.12}\t{}\t{}", ts.probability, c.term.pretty(), amps_machine(&c.quantum));
        } else {
            println!("{i}  p={:.6}  {}  {}", ts.probability, c.term.pretty(), c.quantum);
        }
    }
    let (status, final_state, code) = match &result.outcome {
        RunOutcome::Value(s) => ("value", s, 0u8),
        RunOutcome::Error(s, reason) => {
            eprintln!("error state: {reason}");
            ("error", s, 3)
        }
        RunOutcome::OutOfFuel(s) => {
            eprintln!("step budget of {max_steps} exhausted");
            ("out-of-fuel", s, 1)
        }
    };
    let c = final_state.canonical();
    if machine {
        println!(
            "outcome\t{}\t{:.12}\t{}",
            c.term.pretty(),
            result.path_probability(),
            amps_machine(&c.quantum)
        );
        println!("status\t{status}");
    } else {
        println!("result ({status}): {}  {}", c.term.pretty(), c.quantum);
    }
    code
}

fn print_distribution(dist: &Distribution, machine: bool) {
    if machine {
        let mut lines: Vec<(String, String)> = dist
            .outcomes()
            .iter()
            .map(|(s, m)| {
                let c = s.canonical();
                (term_key(s), format!("outcome\t{}\t{m:.12}\t{}", c.term.pretty(), amps_machine(&c.quantum)))
            })
            .collect();
        lines.sort();
        for (_, l) in lines {
            println!("{l}");
        }
        println!("pending\t{:.12}", dist.pending_mass());
        println!("error\t{:.12}", dist.error_mass());
    } else {
        for (term, mass) in dist.by_term() {
            println!("{} : {:.9}", term.pretty(), mass);
        }
        if dist.pending_mass() > 0.0 {
            println!("pending : {:.9}", dist.pending_mass());
        }
        if dist.error_mass() > 0.0 {
            println!("error : {:.9}", dist.error_mass());
        }
    }
}

fn cmd_explore(file: &Path, depth: usize, unchecked: bool, gates: &GateTable, machine: bool) -> u8 {
    let term = match load(file, gates) {
        Ok(t) => t,
        Err(code) => return code,
    };
    if !unchecked {
        if let Err(code) = typecheck_gate(&term) {
            return code;
        }
    }
    let state = match initial_state(term) {
        Ok(s) => s,
        Err(code) => return code,
    };
    let dist = explore(&state, depth, gates);
    print_distribution(&dist, machine);
    if dist.error_mass() > 0.0 {
        3
    } else {
        0
    }
}

fn cmd_consistency(file: &Path, depth: usize, gates: &GateTable, machine: bool) -> u8 {
    let term = match load(file, gates) {
        Ok(t) => t,
        Err(code) => return code,
    };
    let state = match initial_state(term) {
        Ok(s) => s,
        Err(code) => return code,
    };
    match check_consistency(&state, depth, gates) {
        Consistency::Consistent => {
            if machine {
                println!("consistent\t1");
            } else {
                println!("consistent to depth {depth}: no reachable error state");
            }
            0
        }
        Consistency::ErrorReachable { path, reason } => {
            if machine {
                println!("consistent\t0");
                println!("reason\t{reason}");
                for s in &path {
                    let c = s.canonical();
                    println!("path\t{}\t{}", c.term.pretty(), amps_machine(&c.quantum));
                }
            } else {
                println!("error state reachable within depth {depth}: {reason}");
                for (i, s) in path.iter().enumerate() {
                    let c = s.canonical();
                    println!("  step {}: {}  {}", i + 1, c.term.pretty(), c.quantum);
                }
            }
            1
        }
    }
}
