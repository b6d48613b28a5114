//! Shared helpers for the integration suites: the bundled program corpus,
//! deterministic random generators for types and terms, and the independent
//! n-step probability oracle.

#![allow(dead_code)]

use std::path::PathBuf;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use qlam_core::quantum::GateTable;
use qlam_core::reduction::{step, ProgramState, StepResult};
use qlam_core::syntax::{parse, Term};
use qlam_core::types::QType;
use qlam_core::EPS_NORM;

pub fn programs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../programs")
}

pub fn read_program(name: &str) -> String {
    let path = programs_dir().join(name);
    std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

pub fn parse_program(name: &str, gates: &GateTable) -> Term {
    parse(&read_program(name), gates).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Every bundled program that is supposed to be well-typed (all of them
/// except the two rejection examples).
pub fn well_typed_corpus(gates: &GateTable) -> Vec<(String, Term)> {
    let mut out = Vec::new();
    let mut names: Vec<_> = std::fs::read_dir(programs_dir())
        .expect("bundled programs directory")
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.ends_with(".qlam") && !n.starts_with("bad"))
        .collect();
    names.sort();
    for name in names {
        let term = parse_program(&name, gates);
        out.push((name, term));
    }
    out
}

// --- Random generation -------------------------------------------------------

/// A random type of the given depth, with bang counts up to 2.
pub fn gen_qtype(rng: &mut ChaCha8Rng, depth: u32) -> QType {
    let inner = if depth == 0 {
        match rng.gen_range(0..5) {
            0 => QType::bit(),
            1 => QType::qbit(),
            2 => QType::top(),
            3 => QType::var("X"),
            _ => QType::var("Y"),
        }
    } else {
        match rng.gen_range(0..7) {
            0 => QType::bit(),
            1 => QType::qbit(),
            2 => QType::var("X"),
            3 | 4 => QType::arrow(gen_qtype(rng, depth - 1), gen_qtype(rng, depth - 1)),
            _ => QType::tensor(gen_qtype(rng, depth - 1), gen_qtype(rng, depth - 1)),
        }
    };
    inner.banged(rng.gen_range(0..3))
}

/// A random supertype of `a` (always satisfies `a <: result`).
pub fn gen_supertype(rng: &mut ChaCha8Rng, a: &QType) -> QType {
    use qlam_core::types::QHead;
    let head = match a.head() {
        QHead::Arrow(l, r) => QType::arrow(gen_subtype(rng, l), gen_supertype(rng, r)),
        QHead::Tensor(l, r) => QType::tensor(gen_supertype(rng, l), gen_supertype(rng, r)),
        QHead::Const(c) => QType::constant(c.clone()),
        QHead::Var(x) => QType::var(x.clone()),
        QHead::Top => QType::top(),
    };
    let m = if a.bangs() == 0 { 0 } else { rng.gen_range(0..3) };
    head.banged(m)
}

/// A random subtype of `a` (always satisfies `result <: a`).
pub fn gen_subtype(rng: &mut ChaCha8Rng, a: &QType) -> QType {
    use qlam_core::types::QHead;
    let head = match a.head() {
        QHead::Arrow(l, r) => QType::arrow(gen_supertype(rng, l), gen_subtype(rng, r)),
        QHead::Tensor(l, r) => QType::tensor(gen_subtype(rng, l), gen_subtype(rng, r)),
        QHead::Const(c) => QType::constant(c.clone()),
        QHead::Var(x) => QType::var(x.clone()),
        QHead::Top => QType::top(),
    };
    let n = if a.bangs() == 0 { rng.gen_range(0..3) } else { rng.gen_range(1..3) };
    head.banged(n)
}

// --- The independent n-step probability oracle --------------------------------

/// `Σ_{n ≤ depth} probⁿ(state, u)` for every terminal `u`, computed by the
/// direct recursion over the one-step relation — independent of the
/// frontier bookkeeping in `explore`.
pub fn prob_upto(
    state: &ProgramState,
    depth: usize,
    gates: &GateTable,
) -> Vec<(ProgramState, f64)> {
    fn merge(acc: &mut Vec<(ProgramState, f64)>, s: ProgramState, m: f64) {
        use qlam_core::reduction::same_state;
        match acc.iter_mut().find(|(t, _)| same_state(t, &s, EPS_NORM)) {
            Some((_, m0)) => *m0 += m,
            None => acc.push((s, m)),
        }
    }
    let mut acc = Vec::new();
    match step(state, gates) {
        StepResult::Value => merge(&mut acc, state.canonical(), 1.0),
        StepResult::Error(_) => {}
        StepResult::Reducible(succs) => {
            if depth > 0 {
                for (p, s) in succs {
                    for (u, m) in prob_upto(&s, depth - 1, gates) {
                        merge(&mut acc, u, p * m);
                    }
                }
            }
        }
    }
    acc
}
