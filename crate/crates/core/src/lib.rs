//! A quantum lambda calculus with classical control: a lambda calculus whose
//! terms drive a simulated quantum store under a probabilistic call-by-value
//! semantics, statically guarded by an affine intuitionistic linear type
//! system with a two-phase type inference engine.
//!
//! The crate is organized around the pipeline a program goes through:
//!
//! * [`syntax`] — terms, parsing, printing, substitution;
//! * [`quantum`] — the state-vector backend (allocation, gates, measurement);
//! * [`reduction`] — program states, small-step reduction, sampling and
//!   exhaustive distribution exploration;
//! * [`types`] — the linear type language, subtyping, skeletons, decoration;
//! * [`typecheck`] — derivations and the linear type checker;
//! * [`infer`] — intuitionistic inference plus bang-decoration search.

pub mod infer;
pub mod quantum;
pub mod reduction;
pub mod syntax;
pub mod typecheck;
pub mod types;

pub use quantum::{GateTable, QuantumState, EPS_NORM};
pub use reduction::{Distribution, EvalMode, ProgramState, StepResult};
pub use syntax::{Term, VarName};
pub use typecheck::{check, well_typed_program, Derivation, TypeError, TypingContext};
pub use types::{IType, QType};
