//! Program states `[Q, L, M]` and the probabilistic call-by-value reduction
//! relation: single steps, seeded sampling runs, exhaustive distribution
//! exploration and the weak-reachability consistency check.
//!
//! Redex selection is deterministic: in an application the argument reduces
//! before the function, pairs reduce left component first, and `if`/`let`
//! reduce their scrutinee first. Sticking to one strategy is not a matter
//! of taste here — substituting an unevaluated measurement (call-by-name
//! style) into a duplicating function would copy a register reference and
//! crash on the no-cloning discipline, and even a single strategy switch
//! mid-run can turn a well-behaved program into an error state. The only
//! probabilistic rule is measurement, which always yields both outcomes —
//! a zero-probability branch is retained (never sampled, but traversed by
//! the consistency checker, which models the fact that a null probability
//! is not a physical impossibility).

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::quantum::{GateTable, QuantumState, EPS_NORM};
use crate::syntax::{Term, VarName};

/// Branches with probability below this are kept but counted separately.
pub const EPS_PRUNE: f64 = 1e-12;

/// A program state: quantum store, linking function and term.
#[derive(Debug, Clone)]
pub struct ProgramState {
    pub quantum: QuantumState,
    pub link: BTreeMap<VarName, usize>,
    pub term: Term,
}

impl ProgramState {
    /// Builds a state, validating that every free variable of the term is
    /// linked and every linked index is allocated.
    pub fn new(
        quantum: QuantumState,
        link: BTreeMap<VarName, usize>,
        term: Term,
    ) -> Result<Self, String> {
        for x in term.free_vars() {
            match link.get(&x) {
                None => return Err(format!("free variable `{x}` is not linked")),
                Some(&i) if i >= quantum.qubit_count() => {
                    return Err(format!(
                        "`{x}` is linked to qubit {i}, but only {} are allocated",
                        quantum.qubit_count()
                    ))
                }
                _ => {}
            }
        }
        Ok(ProgramState { quantum, link, term })
    }

    /// The starting state of a program: an empty store for a closed term.
    /// Free register references `p0, p1, …` are linked to fresh `|0⟩`
    /// qubits; any other free variable is an error.
    pub fn initial(term: Term) -> Result<Self, String> {
        let mut max_idx: Option<usize> = None;
        let mut link = BTreeMap::new();
        for x in term.free_vars() {
            match x.register_index() {
                Some(i) => {
                    max_idx = Some(max_idx.map_or(i, |m| m.max(i)));
                    link.insert(x, i);
                }
                None => return Err(format!("program has a free variable `{x}`")),
            }
        }
        let quantum = match max_idx {
            None => QuantumState::empty(),
            Some(m) => QuantumState::basis(&vec![false; m + 1]),
        };
        Ok(ProgramState { quantum, link, term })
    }

    /// Canonical form: free variables are renamed to their register names
    /// `p_i`, the link is pruned to the free variables, and the global phase
    /// is fixed. Alpha-equivalent states with equal stores agree on it.
    pub fn canonical(&self) -> ProgramState {
        let fv = self.term.free_vars();
        let mut subs = Vec::new();
        let mut link = BTreeMap::new();
        for x in &fv {
            if let Some(&i) = self.link.get(x) {
                let reg = VarName::register(i);
                if *x != reg {
                    subs.push((x.clone(), Term::Var(reg.clone())));
                }
                link.insert(reg, i);
            }
        }
        let term = if subs.is_empty() { self.term.clone() } else { self.term.substitute_many(&subs) };
        ProgramState { quantum: self.quantum.fix_global_phase(), link, term }
    }

    /// The term with registers written `p_i`, for traces and reports.
    pub fn display_term(&self) -> Term {
        self.canonical().term
    }
}

/// Equality of canonical states, amplitudes compared within `eps`.
pub fn same_state(a: &ProgramState, b: &ProgramState, eps: f64) -> bool {
    a.term == b.term && a.link == b.link && a.quantum.approx_eq(&b.quantum, eps)
}

/// Why a non-value state has no applicable rule.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StuckReason {
    NotAFunction(String),
    GateOperand { gate: String },
    DuplicateRegister { gate: String, index: usize },
    NewOperand,
    MeasOperand,
    IfScrutinee,
    LetScrutinee,
    UnlinkedVariable(VarName),
    Backend(String),
}

impl fmt::Display for StuckReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            StuckReason::NotAFunction(v) => write!(f, "`{v}` is applied but is not a function"),
            StuckReason::GateOperand { gate } => write!(
                f,
                "gate `{gate}` applied to something other than a tuple of distinct registers"
            ),
            StuckReason::DuplicateRegister { gate, index } => {
                write!(f, "gate `{gate}` applied twice to qubit {index}")
            }
            StuckReason::NewOperand => write!(f, "`new` applied to a non-bit"),
            StuckReason::MeasOperand => write!(f, "`meas` applied to a non-register"),
            StuckReason::IfScrutinee => write!(f, "`if` scrutinee is not a bit"),
            StuckReason::LetScrutinee => write!(f, "`let` scrutinee is not a pair"),
            StuckReason::UnlinkedVariable(x) => write!(f, "variable `{x}` is not linked to a qubit"),
            StuckReason::Backend(msg) => write!(f, "quantum backend: {msg}"),
        }
    }
}

/// The classification of a state under one reduction step.
#[derive(Debug, Clone)]
pub enum StepResult {
    /// The term is a value.
    Value,
    /// The unique redex produced these successors; probabilities sum to the
    /// squared norm of the store (1 for well-formed states).
    Reducible(Vec<(f64, ProgramState)>),
    /// No rule applies: an error state.
    Error(StuckReason),
}

impl StepResult {
    pub fn is_value(&self) -> bool {
        matches!(self, StepResult::Value)
    }

    pub fn is_error(&self) -> bool {
        matches!(self, StepResult::Error(_))
    }
}

enum Reduced {
    Value,
    Stuck(StuckReason),
    Branches(Vec<(f64, QuantumState, BTreeMap<VarName, usize>, Term)>),
}

fn wrap(r: Reduced, ctx: impl Fn(Term) -> Term) -> Reduced {
    match r {
        Reduced::Branches(bs) => Reduced::Branches(
            bs.into_iter().map(|(p, q, l, t)| (p, q, l, ctx(t))).collect(),
        ),
        other => other,
    }
}

/// Flattens a right-nested tuple of variables, the shape a `k`-ary gate
/// consumes.
fn tuple_of_registers(t: &Term, k: usize) -> Option<Vec<VarName>> {
    if k == 1 {
        match t {
            Term::Var(x) => Some(vec![x.clone()]),
            _ => None,
        }
    } else {
        match t {
            Term::Pair(a, b) => match &**a {
                Term::Var(x) => {
                    let mut rest = tuple_of_registers(b, k - 1)?;
                    rest.insert(0, x.clone());
                    Some(rest)
                }
                _ => None,
            },
            _ => None,
        }
    }
}

fn reduce(
    q: &QuantumState,
    link: &BTreeMap<VarName, usize>,
    t: &Term,
    gates: &GateTable,
) -> Reduced {
    if t.is_value() {
        return Reduced::Value;
    }
    let one = |term: Term| {
        Reduced::Branches(vec![(1.0, q.clone(), link.clone(), term)])
    };
    match t {
        Term::App(m, n) => {
            if !n.is_value() {
                let m = m.clone();
                wrap(reduce(q, link, n, gates), move |n2| Term::App(m.clone(), Box::new(n2)))
            } else if !m.is_value() {
                let n = n.clone();
                wrap(reduce(q, link, m, gates), move |m2| Term::App(Box::new(m2), n.clone()))
            } else {
                match &**m {
                    Term::Lambda(x, body) => one(body.substitute(x, n)),
                    Term::New => match &**n {
                        Term::Bit(b) => {
                            let (q2, idx) = q.new_qubit(*b);
                            let reg = VarName::register(idx);
                            if link.get(&reg).is_some_and(|&j| j != idx) {
                                return Reduced::Stuck(StuckReason::Backend(format!(
                                    "register name `{reg}` already linked elsewhere"
                                )));
                            }
                            let mut link2 = link.clone();
                            link2.insert(reg.clone(), idx);
                            Reduced::Branches(vec![(1.0, q2, link2, Term::Var(reg))])
                        }
                        _ => Reduced::Stuck(StuckReason::NewOperand),
                    },
                    Term::Meas => match &**n {
                        Term::Var(x) => match link.get(x) {
                            Some(&i) => match q.measure(i) {
                                Ok(branches) => Reduced::Branches(
                                    branches
                                        .into_iter()
                                        .map(|b| {
                                            (b.probability, b.state, link.clone(), Term::Bit(b.outcome))
                                        })
                                        .collect(),
                                ),
                                Err(e) => Reduced::Stuck(StuckReason::Backend(e.to_string())),
                            },
                            None => Reduced::Stuck(StuckReason::UnlinkedVariable(x.clone())),
                        },
                        _ => Reduced::Stuck(StuckReason::MeasOperand),
                    },
                    Term::Gate(g) => {
                        let Some(vars) = tuple_of_registers(n, g.arity) else {
                            return Reduced::Stuck(StuckReason::GateOperand { gate: g.name.clone() });
                        };
                        let mut indices = Vec::with_capacity(vars.len());
                        for x in &vars {
                            match link.get(x) {
                                Some(&i) => {
                                    if indices.contains(&i) {
                                        return Reduced::Stuck(StuckReason::DuplicateRegister {
                                            gate: g.name.clone(),
                                            index: i,
                                        });
                                    }
                                    indices.push(i);
                                }
                                None => {
                                    return Reduced::Stuck(StuckReason::UnlinkedVariable(x.clone()))
                                }
                            }
                        }
                        let unitary = match gates.get(&g.name) {
                            Ok(u) => u,
                            Err(e) => return Reduced::Stuck(StuckReason::Backend(e.to_string())),
                        };
                        if unitary.arity() != g.arity {
                            return Reduced::Stuck(StuckReason::Backend(format!(
                                "gate `{}` arity changed under the term",
                                g.name
                            )));
                        }
                        match q.apply(unitary, &indices) {
                            Ok(q2) => Reduced::Branches(vec![(1.0, q2, link.clone(), (**n).clone())]),
                            Err(e) => Reduced::Stuck(StuckReason::Backend(e.to_string())),
                        }
                    }
                    other => Reduced::Stuck(StuckReason::NotAFunction(other.pretty())),
                }
            }
        }
        Term::Pair(a, b) => {
            if !a.is_value() {
                let b = b.clone();
                wrap(reduce(q, link, a, gates), move |a2| Term::Pair(Box::new(a2), b.clone()))
            } else {
                let a = a.clone();
                wrap(reduce(q, link, b, gates), move |b2| Term::Pair(a.clone(), Box::new(b2)))
            }
        }
        Term::If(p, m, n) => {
            if !p.is_value() {
                let (m, n) = (m.clone(), n.clone());
                wrap(reduce(q, link, p, gates), move |p2| {
                    Term::If(Box::new(p2), m.clone(), n.clone())
                })
            } else {
                match &**p {
                    Term::Bit(true) => one((**m).clone()),
                    Term::Bit(false) => one((**n).clone()),
                    _ => Reduced::Stuck(StuckReason::IfScrutinee),
                }
            }
        }
        Term::LetPair(x, y, m, n) => {
            if !m.is_value() {
                let (x, y, n) = (x.clone(), y.clone(), n.clone());
                wrap(reduce(q, link, m, gates), move |m2| {
                    Term::LetPair(x.clone(), y.clone(), Box::new(m2), n.clone())
                })
            } else {
                match &**m {
                    Term::Pair(v1, v2) => one(n.substitute_many(&[
                        (x.clone(), (**v1).clone()),
                        (y.clone(), (**v2).clone()),
                    ])),
                    _ => Reduced::Stuck(StuckReason::LetScrutinee),
                }
            }
        }
        // Values were handled above.
        _ => Reduced::Value,
    }
}

/// One reduction step following the deterministic redex selection.
pub fn step(state: &ProgramState, gates: &GateTable) -> StepResult {
    match reduce(&state.quantum, &state.link, &state.term, gates) {
        Reduced::Value => StepResult::Value,
        Reduced::Stuck(r) => StepResult::Error(r),
        Reduced::Branches(bs) => {
            let succs = bs
                .into_iter()
                .map(|(p, quantum, mut link, term)| {
                    let fv = term.free_vars();
                    link.retain(|k, _| fv.contains(k));
                    (p, ProgramState { quantum, link, term })
                })
                .collect();
            StepResult::Reducible(succs)
        }
    }
}

/// Whether step expansion runs on the rayon pool or inline. Parallel
/// expansion collects in frontier order before accumulating, so results and
/// emitted output are identical in both modes. Batches narrower than
/// [`PAR_MIN_BATCH`] are expanded inline even in parallel mode; dispatch
/// overhead dominates below that width.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalMode {
    Sequential,
    #[cfg(feature = "parallel")]
    Parallel,
}

/// Minimum batch width worth sending to the pool.
pub const PAR_MIN_BATCH: usize = 64;

impl Default for EvalMode {
    #[cfg(feature = "parallel")]
    fn default() -> Self {
        EvalMode::Parallel
    }
    #[cfg(not(feature = "parallel"))]
    fn default() -> Self {
        EvalMode::Sequential
    }
}

fn expand(frontier: &[(ProgramState, f64)], gates: &GateTable, mode: EvalMode) -> Vec<StepResult> {
    match mode {
        EvalMode::Sequential => frontier.iter().map(|(s, _)| step(s, gates)).collect(),
        #[cfg(feature = "parallel")]
        EvalMode::Parallel if frontier.len() >= PAR_MIN_BATCH => {
            frontier.par_iter().map(|(s, _)| step(s, gates)).collect()
        }
        #[cfg(feature = "parallel")]
        EvalMode::Parallel => frontier.iter().map(|(s, _)| step(s, gates)).collect(),
    }
}

// --- Sampling runs ----------------------------------------------------------

#[derive(Debug, Clone)]
pub enum RunOutcome {
    Value(ProgramState),
    Error(ProgramState, StuckReason),
    OutOfFuel(ProgramState),
}

#[derive(Debug, Clone)]
pub struct TraceStep {
    /// Probability of the branch that was taken into this state.
    pub probability: f64,
    pub state: ProgramState,
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub outcome: RunOutcome,
    pub trace: Vec<TraceStep>,
}

impl RunResult {
    /// Product of the probabilities along the sampled path.
    pub fn path_probability(&self) -> f64 {
        self.trace.iter().map(|t| t.probability).product()
    }
}

/// Reduces to a value, an error or step exhaustion, sampling measurement
/// branches with a generator seeded from `seed`. Zero-probability branches
/// are never selected.
pub fn run(start: &ProgramState, seed: u64, max_steps: usize, gates: &GateTable) -> RunResult {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut current = start.clone();
    let mut trace = Vec::new();
    for _ in 0..max_steps {
        match step(&current, gates) {
            StepResult::Value => {
                return RunResult { outcome: RunOutcome::Value(current), trace }
            }
            StepResult::Error(r) => {
                return RunResult { outcome: RunOutcome::Error(current, r), trace }
            }
            StepResult::Reducible(succs) => {
                let live: Vec<&(f64, ProgramState)> =
                    succs.iter().filter(|(p, _)| *p > 0.0).collect();
                let total: f64 = live.iter().map(|(p, _)| p).sum();
                let mut pick = rng.gen::<f64>() * total;
                let mut chosen = live.last().expect("reducible state with no live branch");
                for cand in &live {
                    if pick < cand.0 {
                        chosen = cand;
                        break;
                    }
                    pick -= cand.0;
                }
                trace.push(TraceStep { probability: chosen.0, state: chosen.1.clone() });
                current = chosen.1.clone();
            }
        }
    }
    match step(&current, gates) {
        StepResult::Value => RunResult { outcome: RunOutcome::Value(current), trace },
        StepResult::Error(r) => RunResult { outcome: RunOutcome::Error(current, r), trace },
        StepResult::Reducible(_) => RunResult { outcome: RunOutcome::OutOfFuel(current), trace },
    }
}

/// Independent seeded runs of the same start state.
pub fn run_many(
    start: &ProgramState,
    seeds: &[u64],
    max_steps: usize,
    gates: &GateTable,
    mode: EvalMode,
) -> Vec<RunResult> {
    match mode {
        EvalMode::Sequential => seeds.iter().map(|&s| run(start, s, max_steps, gates)).collect(),
        #[cfg(feature = "parallel")]
        EvalMode::Parallel if seeds.len() >= PAR_MIN_BATCH => {
            seeds.par_iter().map(|&s| run(start, s, max_steps, gates)).collect()
        }
        #[cfg(feature = "parallel")]
        EvalMode::Parallel => seeds.iter().map(|&s| run(start, s, max_steps, gates)).collect(),
    }
}

// --- Exhaustive exploration ---------------------------------------------------

/// The mass a bounded exhaustive expansion assigns to each canonical
/// terminal state, plus the mass still unresolved at the horizon and the
/// mass lost to error states. Terminal + pending + error ≈ 1.
#[derive(Debug, Clone, Default)]
pub struct Distribution {
    outcomes: Vec<(ProgramState, f64)>,
    pending: f64,
    error: f64,
    tiny_branches: usize,
}

impl Distribution {
    /// Canonical terminal states with their masses.
    pub fn outcomes(&self) -> &[(ProgramState, f64)] {
        &self.outcomes
    }

    /// Mass not yet resolved at the depth horizon; an upper bound on the
    /// divergence mass.
    pub fn pending_mass(&self) -> f64 {
        self.pending
    }

    pub fn error_mass(&self) -> f64 {
        self.error
    }

    pub fn terminal_mass(&self) -> f64 {
        self.outcomes.iter().map(|(_, m)| m).sum()
    }

    pub fn total_mass(&self) -> f64 {
        self.terminal_mass() + self.pending + self.error
    }

    /// Number of branches expanded with probability below [`EPS_PRUNE`];
    /// they are retained, this only flags them.
    pub fn tiny_branch_count(&self) -> usize {
        self.tiny_branches
    }

    /// Masses aggregated per canonical terminal term (quantum stores
    /// forgotten), sorted by rendered term for stable output.
    pub fn by_term(&self) -> Vec<(Term, f64)> {
        let mut acc: Vec<(Term, f64)> = Vec::new();
        for (s, m) in &self.outcomes {
            let key = s.term.canonical();
            match acc.iter_mut().find(|(t, _)| *t == key) {
                Some((_, m0)) => *m0 += m,
                None => acc.push((key, *m)),
            }
        }
        acc.sort_by_key(|a| a.0.pretty());
        acc
    }

    /// Total mass of terminal states whose term is alpha-equivalent to `t`.
    pub fn mass_for_term(&self, t: &Term) -> f64 {
        self.outcomes
            .iter()
            .filter(|(s, _)| s.term == *t)
            .map(|(_, m)| m)
            .sum()
    }

    fn insert(&mut self, state: ProgramState, mass: f64) {
        match self
            .outcomes
            .iter_mut()
            .find(|(s, _)| same_state(s, &state, EPS_NORM))
        {
            Some((_, m)) => *m += mass,
            None => self.outcomes.push((state, mass)),
        }
    }

    /// Associative merge, used when branches are accumulated from
    /// independent sub-explorations.
    pub fn merge(&mut self, other: Distribution) {
        for (s, m) in other.outcomes {
            self.insert(s, m);
        }
        self.pending += other.pending;
        self.error += other.error;
        self.tiny_branches += other.tiny_branches;
    }
}

fn coalesce(items: Vec<(ProgramState, f64)>) -> Vec<(ProgramState, f64)> {
    let mut out: Vec<(ProgramState, f64)> = Vec::new();
    for (s, m) in items {
        match out.iter_mut().find(|(t, _)| same_state(t, &s, EPS_NORM)) {
            Some((_, m0)) => *m0 += m,
            None => out.push((s, m)),
        }
    }
    out
}

/// Breadth-bounded exhaustive expansion of the reduction tree to `depth`
/// steps, in the default [`EvalMode`].
pub fn explore(start: &ProgramState, depth: usize, gates: &GateTable) -> Distribution {
    explore_with(start, depth, gates, EvalMode::default())
}

/// [`explore`] with an explicit evaluation mode.
pub fn explore_with(
    start: &ProgramState,
    depth: usize,
    gates: &GateTable,
    mode: EvalMode,
) -> Distribution {
    let mut dist = Distribution::default();
    let mut frontier = vec![(start.canonical(), 1.0f64)];
    for level in 0..=depth {
        if frontier.is_empty() {
            break;
        }
        let stepped = expand(&frontier, gates, mode);
        let mut next = Vec::new();
        for ((state, mass), result) in frontier.into_iter().zip(stepped) {
            match result {
                StepResult::Value => dist.insert(state, mass),
                StepResult::Error(_) => dist.error += mass,
                StepResult::Reducible(succs) => {
                    if level == depth {
                        dist.pending += mass;
                    } else {
                        for (p, s) in succs {
                            if p < EPS_PRUNE {
                                dist.tiny_branches += 1;
                            }
                            next.push((s.canonical(), mass * p));
                        }
                    }
                }
            }
        }
        frontier = coalesce(next);
    }
    dist
}

// --- Reachability -------------------------------------------------------------

/// Consistency verdict: a state is consistent when no error state is weakly
/// reachable from it.
#[derive(Debug, Clone)]
pub enum Consistency {
    Consistent,
    ErrorReachable {
        /// The successor states taken from the start (excluded) to the
        /// error state (included); empty when the start itself errs.
        path: Vec<ProgramState>,
        reason: StuckReason,
    },
}

impl Consistency {
    pub fn is_consistent(&self) -> bool {
        matches!(self, Consistency::Consistent)
    }
}

/// Explores weak reachability — rule successors including zero-probability
/// measurement branches — to `depth` and reports the first error state
/// found, with the path that reaches it.
pub fn check_consistency(start: &ProgramState, depth: usize, gates: &GateTable) -> Consistency {
    // Visited states remember the budget they were explored with so a later
    // visit with more budget is not skipped.
    let mut visited: Vec<(ProgramState, usize)> = Vec::new();
    let mut path: Vec<ProgramState> = Vec::new();

    fn dfs(
        state: &ProgramState,
        budget: usize,
        gates: &GateTable,
        visited: &mut Vec<(ProgramState, usize)>,
        path: &mut Vec<ProgramState>,
    ) -> Option<StuckReason> {
        match step(state, gates) {
            StepResult::Value => None,
            StepResult::Error(r) => Some(r),
            StepResult::Reducible(succs) => {
                if budget == 0 {
                    return None;
                }
                for (_p, s) in succs {
                    let key = s.canonical();
                    match visited
                        .iter_mut()
                        .find(|(v, _)| same_state(v, &key, EPS_NORM))
                    {
                        Some((_, b)) if *b >= budget - 1 => continue,
                        Some((_, b)) => *b = budget - 1,
                        None => visited.push((key.clone(), budget - 1)),
                    }
                    path.push(s.clone());
                    if let Some(r) = dfs(&s, budget - 1, gates, visited, path) {
                        return Some(r);
                    }
                    path.pop();
                }
                None
            }
        }
    }

    match dfs(start, depth, gates, &mut visited, &mut path) {
        Some(reason) => Consistency::ErrorReachable { path, reason },
        None => Consistency::Consistent,
    }
}

/// Every state weakly reachable within `depth` steps (deduplicated up to
/// canonical equality), paired with its classification. Includes the start.
pub fn reachable(
    start: &ProgramState,
    depth: usize,
    gates: &GateTable,
    include_zero_prob: bool,
) -> Vec<(ProgramState, StepResult)> {
    let mut out: Vec<(ProgramState, StepResult)> = Vec::new();
    let mut emitted: Vec<ProgramState> = Vec::new();
    let mut seen: Vec<(ProgramState, usize)> = vec![(start.canonical(), depth)];
    let mut frontier = vec![(start.clone(), depth)];
    while let Some((state, budget)) = frontier.pop() {
        let result = step(&state, gates);
        if let StepResult::Reducible(succs) = &result {
            if budget > 0 {
                for (p, s) in succs {
                    if !include_zero_prob && *p <= 0.0 {
                        continue;
                    }
                    let key = s.canonical();
                    match seen.iter_mut().find(|(v, _)| same_state(v, &key, EPS_NORM)) {
                        Some((_, b)) if *b >= budget - 1 => continue,
                        Some((_, b)) => *b = budget - 1,
                        None => seen.push((key, budget - 1)),
                    }
                    frontier.push((s.clone(), budget - 1));
                }
            }
        }
        // A state re-expanded with a larger budget is reported once.
        let key = state.canonical();
        if !emitted.iter().any(|v| same_state(v, &key, EPS_NORM)) {
            emitted.push(key);
            out.push((state, result));
        }
    }
    out
}
