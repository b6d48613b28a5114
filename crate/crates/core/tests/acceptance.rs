//! Acceptance suite: one test per shipped guarantee, each printing a
//! PASS line with the measured figure. Tolerances are pinned in the
//! assertions.
//!
//! Run with `cargo test -p qlam-core --test acceptance -- --nocapture`.

mod common;

use std::time::Instant;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use qlam_core::infer::{infer_program, infer_simple_in, DecorationProblem, InferOutcome};
use qlam_core::quantum::{GateTable, Unitary};
use qlam_core::reduction::{
    check_consistency, explore, reachable, run_many, Consistency, EvalMode, ProgramState,
    RunOutcome, StepResult,
};
use qlam_core::syntax::{parse, Term, VarName};
use qlam_core::typecheck::{check, well_typed_program, TypeError, TypingContext};
use qlam_core::types::{lift, skeleton, subtype, QType};

const TOL: f64 = 1e-9;

fn gates() -> GateTable {
    GateTable::builtin()
}

fn initial(name: &str, gates: &GateTable) -> ProgramState {
    ProgramState::initial(common::parse_program(name, gates)).unwrap()
}

/// 1. Call-by-value measures the shared coin once: boolean addition of a
///    coin with itself is 0 with probability 1.
#[test]
fn criterion_1_cbv_determinism() {
    let gates = gates();
    let start = initial("plus_cbv.qlam", &gates);
    let t0 = Instant::now();
    let dist = explore(&start, 30, &gates);
    let elapsed = t0.elapsed();
    let mass = dist.mass_for_term(&Term::Bit(false));
    assert!((mass - 1.0).abs() <= TOL, "mass on 0 was {mass}");
    assert!(dist.error_mass() == 0.0, "error mass {}", dist.error_mass());
    assert!(dist.pending_mass() <= TOL, "pending {}", dist.pending_mass());
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!("acceptance 1 (CBV determinism): PASS — mass(0) = {mass:.12}, {elapsed:?}");
}

/// 2. Two independent coins under addition: 0 and 1 with equal probability,
///    four quantum-state branches recombining into two terminal keys.
#[test]
fn criterion_2_duplication_distribution() {
    let gates = gates();
    let start = initial("plus_dup.qlam", &gates);
    let t0 = Instant::now();
    let dist = explore(&start, 30, &gates);
    let elapsed = t0.elapsed();
    let by_term = dist.by_term();
    assert_eq!(dist.outcomes().len(), 4, "four quantum-state branches");
    assert_eq!(by_term.len(), 2, "two terminal keys");
    for bit in [false, true] {
        let mass = dist.mass_for_term(&Term::Bit(bit));
        assert!((mass - 0.5).abs() <= TOL, "mass on {bit} was {mass}");
    }
    assert!(dist.error_mass() == 0.0 && dist.pending_mass() <= TOL);
    assert!(elapsed.as_secs_f64() < 1.0, "took {elapsed:?}");
    println!(
        "acceptance 2 (duplication distribution): PASS — {{0: {:.12}, 1: {:.12}}}, 4 branches -> 2 keys, {elapsed:?}",
        dist.mass_for_term(&Term::Bit(false)),
        dist.mass_for_term(&Term::Bit(true)),
    );
}

/// 3. Teleportation identity: for random qubits prepared by a parameterized
///    gate, g ∘ f is the identity on every measurement branch, each branch
///    carrying probability 1/4.
#[test]
fn criterion_3_teleportation_identity() {
    let teleport_src = common::read_program("teleport.qlam");
    let t0 = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut worst_fidelity = 1.0f64;
    for trial in 0..100 {
        let theta = rng.gen::<f64>() * std::f64::consts::FRAC_PI_2;
        let phi = rng.gen::<f64>() * std::f64::consts::TAU;
        let alpha = Complex64::new(theta.cos(), 0.0);
        let beta = Complex64::from_polar(theta.sin(), phi);
        let prep = Unitary::new(2, vec![alpha, -beta.conj(), beta, alpha.conj()])
            .expect("preparation gate is unitary");
        let mut gates = GateTable::builtin();
        gates.insert("Prep", prep).unwrap();

        let src = format!("let <f, g> = (\n{teleport_src}\n) in g (f (Prep (new 0)))");
        let term = parse(&src, &gates).unwrap();
        let start = ProgramState::initial(term).unwrap();
        let dist = explore(&start, 100, &gates);

        assert!(dist.pending_mass() <= TOL, "trial {trial}: pending {}", dist.pending_mass());
        assert_eq!(dist.error_mass(), 0.0, "trial {trial}");
        assert_eq!(dist.outcomes().len(), 4, "trial {trial}: four measurement branches");
        for (state, mass) in dist.outcomes() {
            assert!((mass - 0.25).abs() <= TOL, "trial {trial}: branch mass {mass}");
            let q = &state.quantum;
            assert_eq!(q.qubit_count(), 3);
            let amps = q.amplitudes();
            // The teleported qubit is index 1 (bit position 1); the other
            // two qubits hold the measured bits, so exactly one basis pair
            // is populated.
            let kmax = (0..amps.len())
                .max_by(|&a, &b| amps[a].norm_sqr().total_cmp(&amps[b].norm_sqr()))
                .unwrap();
            let base = kmax & !0b010;
            let a0 = amps[base];
            let a1 = amps[base | 0b010];
            for (k, a) in amps.iter().enumerate() {
                if k != base && k != (base | 0b010) {
                    assert!(a.norm() <= TOL, "trial {trial}: stray amplitude at {k}");
                }
            }
            let fidelity = (alpha.conj() * a0 + beta.conj() * a1).norm_sqr();
            worst_fidelity = worst_fidelity.min(fidelity);
            assert!(
                fidelity >= 1.0 - TOL,
                "trial {trial}: fidelity {fidelity} for alpha={alpha}, beta={beta}"
            );
        }
    }
    let elapsed = t0.elapsed();
    assert!(elapsed.as_secs_f64() < 5.0, "took {elapsed:?}");
    println!(
        "acceptance 3 (teleportation identity): PASS — 100 random qubits, worst fidelity {worst_fidelity:.15}, {elapsed:?}"
    );
}

/// 4. Progress: on the well-typed corpus no error state is weakly reachable
///    (zero-probability branches included) and outgoing probabilities of
///    every reducible state sum to 1.
#[test]
fn criterion_4_progress_safety() {
    let gates = gates();
    let corpus = common::well_typed_corpus(&gates);
    assert!(corpus.len() >= 20, "corpus has only {} programs", corpus.len());
    let mut states_checked = 0usize;
    for (name, term) in &corpus {
        let start = ProgramState::initial(term.clone()).unwrap();
        match check_consistency(&start, 200, &gates) {
            Consistency::Consistent => {}
            Consistency::ErrorReachable { path, reason } => {
                panic!("{name}: error state reachable ({reason}) after {} steps", path.len())
            }
        }
        for (state, result) in reachable(&start, 200, &gates, true) {
            if let StepResult::Reducible(succs) = result {
                let total: f64 = succs.iter().map(|(p, _)| p).sum();
                assert!(
                    (total - 1.0).abs() <= TOL,
                    "{name}: outgoing probability {total} from {}",
                    state.term
                );
                states_checked += 1;
            }
        }
    }
    println!(
        "acceptance 4 (progress/safety): PASS — {} programs, {states_checked} reducible states, all consistent",
        corpus.len()
    );
}

/// 5. Subject reduction: every state on every weakly reachable path stays
///    well-typed at the program's inferred type.
#[test]
fn criterion_5_subject_reduction() {
    let gates = gates();
    let corpus = common::well_typed_corpus(&gates);
    let t0 = Instant::now();
    let counts: Vec<usize> = corpus
        .par_iter()
        .map(|(name, term)| {
            let b = match infer_program(term) {
                InferOutcome::Typed { ty, .. } => ty,
                other => panic!("{name}: expected a type, got {other:?}"),
            };
            let start = ProgramState::initial(term.clone()).unwrap();
            let states = reachable(&start, 200, &gates, true);
            for (state, _) in &states {
                assert!(
                    well_typed_program(state, &b),
                    "{name}: state `{}` is not well-typed at {b}",
                    state.term
                );
            }
            states.len()
        })
        .collect();
    let elapsed = t0.elapsed();
    assert!(elapsed.as_secs_f64() < 30.0, "took {elapsed:?}");
    println!(
        "acceptance 5 (subject reduction): PASS — {} programs, {} states re-typed, {elapsed:?}",
        corpus.len(),
        counts.iter().sum::<usize>()
    );
}

/// 6. Rejection suite: the two ill-formed bundled programs fail with the
///    documented error categories.
#[test]
fn criterion_6_rejection_suite() {
    let gates = gates();

    // H (\x.x): a gate applied to a function — subtype mismatch.
    let badgate = common::parse_program("badgate.qlam", &gates);
    let ctx = TypingContext::qbits_for(&badgate);
    let err = check(&ctx, &badgate, &QType::qbit()).unwrap_err();
    assert!(matches!(err, TypeError::Subtype { .. }), "badgate: {err}");
    // And inference agrees (phase 1 clash).
    assert!(!matches!(infer_program(&badgate), InferOutcome::Typed { .. }));

    // CNOT <p0, p0>: the same register twice — linearity violation on p0.
    let badpair = common::parse_program("badpair.qlam", &gates);
    let ctx = TypingContext::qbits_for(&badpair);
    let err = check(
        &ctx,
        &badpair,
        &QType::tensor(QType::qbit(), QType::qbit()),
    )
    .unwrap_err();
    assert_eq!(err, TypeError::Linearity(VarName::new("p0")), "badpair: {err}");
    match infer_program(&badpair) {
        InferOutcome::NoDecoration(TypeError::Linearity(x)) => {
            assert_eq!(x, VarName::new("p0"))
        }
        other => panic!("badpair inference: {other:?}"),
    }

    println!("acceptance 6 (rejection suite): PASS — badgate: subtype mismatch, badpair: linearity violation on p0");
}

/// 7. Inference soundness (corpus types validate through the checker) and
///    completeness of decoration search against brute-force enumeration of
///    all single-bang decorations on every instance with at most 12 flags.
#[test]
fn criterion_7_inference_soundness_and_oracle_completeness() {
    let gates = gates();

    // Soundness on the corpus.
    let corpus = common::well_typed_corpus(&gates);
    for (name, term) in &corpus {
        match infer_program(term) {
            InferOutcome::Typed { ty, derivation } => {
                derivation.validate().unwrap_or_else(|e| panic!("{name}: {e}"));
                let ctx = TypingContext::qbits_for(term);
                check(&ctx, term, &ty)
                    .unwrap_or_else(|e| panic!("{name}: inferred {ty} rejected: {e}"));
            }
            other => panic!("{name}: untypable ({other:?})"),
        }
    }

    // Brute-force oracle: curated small instances plus every corpus program
    // whose decoration instance is small enough.
    let mut oracle_terms: Vec<(String, Term)> = [
        "\\x.x",
        "\\x.<x, x>",
        "\\x.\\y.x y",
        "0",
        "*",
        "<0, 1>",
        "<*, *>",
        "new 0",
        "meas p0",
        "H p0",
        "CNOT <p0, p1>",
        "CNOT <p0, p0>",
        "(\\x.<x, x>) (new 0)",
        "(\\x.<x, x>) 0",
        "\\x.if x then 0 else 1",
        "let <a, b> = <0, 1> in a",
        "if 0 then p0 else p0",
    ]
    .into_iter()
    .map(|s| (s.to_string(), parse(s, &gates).unwrap()))
    .collect();
    for (name, term) in &corpus {
        oracle_terms.push((name.clone(), term.clone()));
    }

    let mut compared = 0usize;
    let mut typable = 0usize;
    for (name, term) in &oracle_terms {
        let ctx = TypingContext::qbits_for(term);
        let ictx = ctx.iter().map(|(x, q)| (x.clone(), skeleton(q))).collect();
        let Ok((pi, _)) = infer_simple_in(&ictx, term) else {
            continue; // not simply typed: no decoration instance exists
        };
        let problem = DecorationProblem::new(&pi, &ctx);
        let k = problem.flag_count();
        if k > 12 {
            continue;
        }
        let solver_says = problem.solve();
        if let Some(assign) = &solver_says {
            let (d, ty) = problem.realize(assign);
            d.validate().unwrap_or_else(|e| panic!("{name}: solver solution invalid: {e}"));
            assert!(subtype(&ty, &ty), "sanity");
        }
        let brute_found = (0u64..1 << k).any(|bits| {
            let assign: Vec<bool> = (0..k).map(|i| bits >> i & 1 == 1).collect();
            match problem.realize_with_free(&assign) {
                Some((d, _)) => d.validate().is_ok(),
                None => false,
            }
        });
        assert_eq!(
            solver_says.is_some(),
            brute_found,
            "{name}: solver {} but brute force {}",
            if solver_says.is_some() { "typed it" } else { "rejected it" },
            if brute_found { "found a decoration" } else { "found none" },
        );
        compared += 1;
        typable += usize::from(brute_found);
    }
    assert!(compared >= 15, "only {compared} oracle instances compared");
    println!(
        "acceptance 7 (inference soundness + oracle): PASS — corpus validated, {compared} instances brute-forced ({typable} typable), 0 mismatches"
    );
}

/// 8. Type-algebra properties over 10000 generated types of depth <= 4.
#[test]
fn criterion_8_type_algebra_properties() {
    let t0 = Instant::now();
    (0u64..10_000).into_par_iter().for_each(|seed| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = common::gen_qtype(&mut rng, 4);

        // Reflexivity.
        assert!(subtype(&a, &a), "reflexivity failed on {a}");

        // Constructed supertypes witness transitivity and skeleton equality.
        let b = common::gen_supertype(&mut rng, &a);
        let c = common::gen_supertype(&mut rng, &b);
        assert!(subtype(&a, &b) && subtype(&b, &c), "generator is off for {a}");
        assert!(subtype(&a, &c), "transitivity failed: {a} <: {b} <: {c}");
        assert_eq!(skeleton(&a), skeleton(&b), "subtyping changed the skeleton");

        // Bang lemma: a <: !… forces an outer exponential on a.
        if b.is_banged() {
            assert!(a.is_banged(), "bang lemma failed: {a} <: {b}");
        }

        // Bang monotonicity.
        let n = rng.gen_range(0..3u32);
        let m = if n >= 1 { rng.gen_range(0..3u32) } else { 0 };
        assert!(
            subtype(&a.clone().banged(n), &b.clone().banged(m)),
            "bang monotonicity failed on {a} <: {b} with n={n}, m={m}"
        );

        // skeleton ∘ lift is the identity.
        let u = skeleton(&a);
        assert_eq!(skeleton(&lift(&u)), u, "skel(lift(u)) != u for {u}");
    });
    let elapsed = t0.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "took {elapsed:?}");
    println!("acceptance 8 (type algebra): PASS — 10000 types, 0 counterexamples, {elapsed:?}");
}

/// 9. Sampler statistics: 10000 seeded runs of a fair coin land within the
///    three-sigma band around one half.
#[test]
fn criterion_9_sampler_statistics() {
    let gates = gates();
    let start = initial("coin.qlam", &gates);
    let seeds: Vec<u64> = (0..10_000).collect();
    let results = run_many(&start, &seeds, 100, &gates, EvalMode::default());
    let ones = results
        .iter()
        .filter(|r| matches!(&r.outcome, RunOutcome::Value(s) if s.term == Term::Bit(true)))
        .count();
    let freq = ones as f64 / seeds.len() as f64;
    assert!(
        (freq - 0.5).abs() <= 0.02,
        "outcome 1 frequency {freq} outside 0.5 ± 0.02"
    );
    // Every run terminates in a value; none errs.
    assert!(results
        .iter()
        .all(|r| matches!(r.outcome, RunOutcome::Value(_))));

    // The call-by-value coin-addition program lands on 0 for every seed.
    let cbv = initial("plus_cbv.qlam", &gates);
    let all_zero = run_many(&cbv, &seeds, 100, &gates, EvalMode::default())
        .iter()
        .all(|r| matches!(&r.outcome, RunOutcome::Value(s) if s.term == Term::Bit(false)));
    assert!(all_zero, "a plus_cbv run produced something other than 0");

    println!("acceptance 9 (sampler statistics): PASS — freq(1) = {freq:.4} over 10000 seeded runs; plus_cbv 10000/10000 on 0");
}

/// Determinism of the machine-facing surface: same seed, same trace; the
/// exhaustive explorer agrees with itself across evaluation modes.
#[test]
fn byte_stable_outputs() {
    let gates = gates();
    let start = initial("plus_dup.qlam", &gates);
    let a = explore(&start, 30, &gates);
    let b = explore(&start, 30, &gates);
    let render = |d: &qlam_core::Distribution| {
        d.outcomes()
            .iter()
            .map(|(s, m)| format!("{}\t{m:.12}\t{}", s.term, s.quantum))
            .collect::<Vec<_>>()
            .join("\n")
    };
    assert_eq!(render(&a), render(&b));

    let seq = qlam_core::reduction::explore_with(&start, 30, &gates, EvalMode::Sequential);
    assert_eq!(render(&a), render(&seq), "parallel and sequential outputs differ");
}
