//! The linear type checker: decides judgments `Δ ▷ M : A`, producing full
//! derivation trees that an independent per-node rule validator can replay.
//!
//! Checking is syntax-directed. Target types propagate downward; at each
//! binary rule the non-duplicable bindings are routed to the unique subterm
//! using them (a non-`!` variable used on both sides is an immediate
//! linearity failure) while `!`-typed bindings are shared. Applications
//! synthesize the function side where possible (variables, constants, and
//! chains or pairs of those); when neither side of an application
//! synthesizes — which happens for `let`-style beta redexes binding
//! lambdas, since the calculus has no principal types — the checker falls
//! back to the decoration-constraint engine with the target pinned.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::syntax::{Term, VarName};
use crate::types::{constant_type, subtype, QHead, QType};
use crate::ProgramState;

/// A typing context: a finite map from variables to types. No variable is
/// bound twice.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TypingContext(std::collections::BTreeMap<VarName, QType>);

impl TypingContext {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn get(&self, x: &VarName) -> Option<&QType> {
        self.0.get(x)
    }

    pub fn contains(&self, x: &VarName) -> bool {
        self.0.contains_key(x)
    }

    pub fn insert(&mut self, x: VarName, ty: QType) {
        debug_assert!(!self.0.contains_key(&x), "variable `{x}` bound twice");
        self.0.insert(x, ty);
    }

    pub fn iter(&self) -> impl Iterator<Item = (&VarName, &QType)> {
        self.0.iter()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn domain(&self) -> BTreeSet<VarName> {
        self.0.keys().cloned().collect()
    }

    /// The program-state context: every free variable of the term at `qbit`.
    pub fn qbits_for(term: &Term) -> Self {
        TypingContext(term.free_vars().into_iter().map(|x| (x, QType::qbit())).collect())
    }
}

impl FromIterator<(VarName, QType)> for TypingContext {
    fn from_iter<I: IntoIterator<Item = (VarName, QType)>>(iter: I) -> Self {
        TypingContext(iter.into_iter().collect())
    }
}

impl fmt::Display for TypingContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (x, t) in &self.0 {
            if !first {
                write!(f, ", ")?;
            }
            write!(f, "{x}: {t}")?;
            first = false;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum TypeError {
    #[error("unbound variable `{0}`")]
    Unbound(VarName),
    #[error("linearity violation: non-duplicable variable `{0}` is used more than once")]
    Linearity(VarName),
    #[error("subtype mismatch: found `{found}`, required `{required}`")]
    Subtype { found: String, required: String },
    #[error("a duplicable lambda cannot capture the non-duplicable variable `{0}`")]
    Lambda2Capture(VarName),
    #[error("no valid bang decoration: {0}")]
    Decoration(String),
}

fn sub_err(found: &QType, required: &QType) -> TypeError {
    TypeError::Subtype { found: found.to_string(), required: required.to_string() }
}

/// Rules of the type system, one per node shape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    Ax1,
    Ax2,
    Top,
    Lambda1,
    Lambda2,
    App,
    If,
    TensorI,
    TensorE,
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Rule::Ax1 => "ax1",
            Rule::Ax2 => "ax2",
            Rule::Top => "top",
            Rule::Lambda1 => "lam1",
            Rule::Lambda2 => "lam2",
            Rule::App => "app",
            Rule::If => "if",
            Rule::TensorI => "tensor-I",
            Rule::TensorE => "tensor-E",
        };
        write!(f, "{s}")
    }
}

/// A derivation tree: every node is an instance of one typing rule.
#[derive(Debug, Clone)]
pub struct Derivation {
    pub rule: Rule,
    pub ctx: TypingContext,
    pub term: Term,
    pub ty: QType,
    pub children: Vec<Derivation>,
}

impl Derivation {
    fn node(rule: Rule, ctx: TypingContext, term: Term, ty: QType, children: Vec<Derivation>) -> Self {
        Derivation { rule, ctx, term, ty, children }
    }

    pub fn size(&self) -> usize {
        1 + self.children.iter().map(Derivation::size).sum::<usize>()
    }

    /// Renders the tree with one judgment per line, children indented.
    pub fn pretty_tree(&self) -> String {
        fn go(d: &Derivation, depth: usize, out: &mut String) {
            for _ in 0..depth {
                out.push_str("  ");
            }
            out.push_str(&format!("[{}] {} |- {} : {}\n", d.rule, d.ctx, d.term, d.ty));
            for c in &d.children {
                go(c, depth + 1, out);
            }
        }
        let mut out = String::new();
        go(self, 0, &mut out);
        out
    }

    /// Independently re-validates every node as a literal rule instance:
    /// axiom subtyping, exact premise types, context splits with duplicable
    /// sharing, and side conditions. This is the ground truth the checker
    /// and the decoration search are tested against.
    pub fn validate(&self) -> Result<(), String> {
        for c in &self.children {
            c.validate()?;
        }
        let fail = |msg: String| Err(format!("[{}] {} : {}: {msg}", self.rule, self.term, self.ty));
        match self.rule {
            Rule::Ax1 => {
                let Term::Var(x) = &self.term else { return fail("not a variable".into()) };
                if !self.children.is_empty() {
                    return fail("axioms have no premises".into());
                }
                let Some(a) = self.ctx.get(x) else { return fail(format!("`{x}` not in context")) };
                if !subtype(a, &self.ty) {
                    return fail(format!("{a} is not a subtype of {}", self.ty));
                }
                Ok(())
            }
            Rule::Ax2 => {
                let Some(ac) = constant_type(&self.term) else {
                    return fail("not a constant".into());
                };
                if !self.children.is_empty() {
                    return fail("axioms have no premises".into());
                }
                if !subtype(&ac, &self.ty) {
                    return fail(format!("{ac} is not a subtype of {}", self.ty));
                }
                Ok(())
            }
            Rule::Top => {
                if !matches!(self.term, Term::Star) || !matches!(self.ty.head(), QHead::Top) {
                    return fail("the unit rule types `*` at !ⁿT".into());
                }
                Ok(())
            }
            Rule::Lambda1 | Rule::Lambda2 => {
                let Term::Lambda(x, body) = &self.term else { return fail("not a lambda".into()) };
                let QHead::Arrow(a, b) = self.ty.head() else {
                    return fail("lambda type must be an arrow".into());
                };
                match self.rule {
                    Rule::Lambda1 if self.ty.bangs() != 0 => {
                        return fail("lam1 concludes a bare arrow".into())
                    }
                    Rule::Lambda2 if self.ty.bangs() == 0 => {
                        return fail("lam2 concludes a banged arrow".into())
                    }
                    _ => {}
                }
                if self.rule == Rule::Lambda2 {
                    for y in body.free_vars() {
                        if y == *x {
                            continue;
                        }
                        match self.ctx.get(&y) {
                            Some(t) if t.is_banged() => {}
                            Some(_) => return fail(format!("captured `{y}` is not duplicable")),
                            None => return fail(format!("`{y}` not in context")),
                        }
                    }
                }
                if self.ctx.contains(x) {
                    return fail(format!("binder `{x}` shadows the context"));
                }
                let [child] = self.children.as_slice() else {
                    return fail("lambda has one premise".into());
                };
                if child.term != **body || child.ty != **b {
                    return fail("premise term/type mismatch".into());
                }
                let mut expect = self.ctx.clone();
                expect.insert(x.clone(), (**a).clone());
                if child.ctx != expect {
                    return fail("premise context must extend the conclusion's by the binder".into());
                }
                Ok(())
            }
            Rule::App => {
                let Term::App(m, n) = &self.term else { return fail("not an application".into()) };
                let [dm, dn] = self.children.as_slice() else {
                    return fail("application has two premises".into());
                };
                if dm.term != **m || dn.term != **n {
                    return fail("premise terms mismatch".into());
                }
                if dm.ty.bangs() != 0 {
                    return fail("the function premise is a bare arrow".into());
                }
                let QHead::Arrow(a, b) = dm.ty.head() else {
                    return fail("the function premise must be an arrow".into());
                };
                if **b != self.ty {
                    return fail("conclusion type must equal the arrow's result".into());
                }
                if dn.ty != **a {
                    return fail("argument premise must equal the arrow's argument".into());
                }
                check_split(&self.ctx, &dm.ctx, &dn.ctx)
                    .map_err(|m| format!("[app] {}: {m}", self.term))
            }
            Rule::If => {
                let Term::If(p, m, n) = &self.term else { return fail("not a conditional".into()) };
                let [dp, dm, dn] = self.children.as_slice() else {
                    return fail("conditional has three premises".into());
                };
                if dp.term != **p || dm.term != **m || dn.term != **n {
                    return fail("premise terms mismatch".into());
                }
                if dp.ty != QType::bit() {
                    return fail("the scrutinee premise types at bit".into());
                }
                if dm.ty != self.ty || dn.ty != self.ty {
                    return fail("branch premises must equal the conclusion type".into());
                }
                if dm.ctx != dn.ctx {
                    return fail("branches share one context".into());
                }
                check_split(&self.ctx, &dp.ctx, &dm.ctx)
                    .map_err(|msg| format!("[if] {}: {msg}", self.term))
            }
            Rule::TensorI => {
                let Term::Pair(m1, m2) = &self.term else { return fail("not a pair".into()) };
                let [d1, d2] = self.children.as_slice() else {
                    return fail("pair has two premises".into());
                };
                if d1.term != **m1 || d2.term != **m2 {
                    return fail("premise terms mismatch".into());
                }
                let n = self.ty.bangs();
                let QHead::Tensor(c1, c2) = self.ty.head() else {
                    return fail("pair type must be a tensor".into());
                };
                if !tensor_premise_fits(&d1.ty, c1, n) || !tensor_premise_fits(&d2.ty, c2, n) {
                    return fail("premise types do not fit the tensor introduction".into());
                }
                check_split(&self.ctx, &d1.ctx, &d2.ctx)
                    .map_err(|msg| format!("[pair] {}: {msg}", self.term))
            }
            Rule::TensorE => {
                let Term::LetPair(x, y, m, n) = &self.term else {
                    return fail("not a let-pair".into());
                };
                let [dm, dn] = self.children.as_slice() else {
                    return fail("let-pair has two premises".into());
                };
                if dm.term != **m || dn.term != **n {
                    return fail("premise terms mismatch".into());
                }
                if dn.ty != self.ty {
                    return fail("body premise must equal the conclusion type".into());
                }
                let p = dm.ty.bangs();
                let QHead::Tensor(c1, c2) = dm.ty.head() else {
                    return fail("scrutinee premise must be a tensor".into());
                };
                if self.ctx.contains(x) || self.ctx.contains(y) {
                    return fail("binders shadow the context".into());
                }
                let (Some(b1), Some(b2)) = (dn.ctx.get(x), dn.ctx.get(y)) else {
                    return fail("body context must bind both components".into());
                };
                if !tensor_premise_fits(b1, c1, p) || !tensor_premise_fits(b2, c2, p) {
                    return fail("component bindings do not fit the tensor elimination".into());
                }
                let body_rest: TypingContext = dn
                    .ctx
                    .iter()
                    .filter(|(v, _)| *v != x && *v != y)
                    .map(|(v, t)| (v.clone(), t.clone()))
                    .collect();
                check_split(&self.ctx, &dm.ctx, &body_rest)
                    .map_err(|msg| format!("[let] {}: {msg}", self.term))
            }
        }
    }
}

/// Accepts both the plain tensor rules (premise `!ⁿCᵢ` for conclusion
/// component `Cᵢ` under `n` outer bangs) and their single-bang derived
/// variants (premise `!Aᵢ` with component `!^τAᵢ`, `τ ∈ {0,1}`, under at
/// least one outer bang).
fn tensor_premise_fits(premise: &QType, component: &QType, outer: u32) -> bool {
    let plain = *premise == component.clone().banged(outer);
    let prime = outer >= 1
        && premise.bangs() >= 1
        && premise.head() == component.head()
        && (component.bangs() + 1 == premise.bangs() || component.bangs() == premise.bangs());
    plain || prime
}

/// Validates a binary context split: both parts restrict the parent with
/// identical types, they cover it, and anything shared is duplicable.
fn check_split(
    parent: &TypingContext,
    left: &TypingContext,
    right: &TypingContext,
) -> Result<(), String> {
    for (x, t) in left.iter().chain(right.iter()) {
        match parent.get(x) {
            Some(pt) if pt == t => {}
            Some(_) => return Err(format!("`{x}` changes type across the split")),
            None => return Err(format!("`{x}` appears from nowhere")),
        }
    }
    for (x, t) in left.iter() {
        if right.contains(x) && !t.is_banged() {
            return Err(format!("non-duplicable `{x}` is shared across the split"));
        }
    }
    for (x, _) in parent.iter() {
        if !left.contains(x) && !right.contains(x) {
            return Err(format!("`{x}` is dropped by the split"));
        }
    }
    Ok(())
}

/// Routes a context across a binary rule: duplicable bindings go to both
/// sides, each non-duplicable binding to the side using it (unused ones to
/// the left). A non-duplicable variable used on both sides is a linearity
/// error.
pub(crate) fn split_context(
    ctx: &TypingContext,
    left_fv: &BTreeSet<VarName>,
    right_fv: &BTreeSet<VarName>,
) -> Result<(TypingContext, TypingContext), TypeError> {
    let mut left = TypingContext::empty();
    let mut right = TypingContext::empty();
    for (x, t) in ctx.iter() {
        if t.is_banged() {
            left.insert(x.clone(), t.clone());
            right.insert(x.clone(), t.clone());
        } else {
            match (left_fv.contains(x), right_fv.contains(x)) {
                (true, true) => return Err(TypeError::Linearity(x.clone())),
                (false, true) => right.insert(x.clone(), t.clone()),
                _ => left.insert(x.clone(), t.clone()),
            }
        }
    }
    Ok((left, right))
}

/// Checks `ctx ▷ term : ty`, returning a full derivation on success.
pub fn check(ctx: &TypingContext, term: &Term, ty: &QType) -> Result<Derivation, TypeError> {
    let mut avoid = term.free_vars();
    avoid.extend(ctx.domain());
    let term = term.barendregt_with(&avoid);
    let d = check_against(ctx, &term, ty)?;
    debug_assert_eq!(d.validate(), Ok(()), "checker produced an invalid derivation");
    Ok(d)
}

fn check_against(ctx: &TypingContext, term: &Term, ty: &QType) -> Result<Derivation, TypeError> {
    match term {
        Term::Var(x) => {
            let a = ctx.get(x).ok_or_else(|| TypeError::Unbound(x.clone()))?;
            if !subtype(a, ty) {
                return Err(sub_err(a, ty));
            }
            Ok(Derivation::node(Rule::Ax1, ctx.clone(), term.clone(), ty.clone(), vec![]))
        }
        Term::Bit(_) | Term::Meas | Term::New | Term::Gate(_) => {
            let ac = constant_type(term).expect("constants have fixed types");
            if !subtype(&ac, ty) {
                return Err(sub_err(&ac, ty));
            }
            Ok(Derivation::node(Rule::Ax2, ctx.clone(), term.clone(), ty.clone(), vec![]))
        }
        Term::Star => {
            if !matches!(ty.head(), QHead::Top) {
                return Err(TypeError::Subtype {
                    found: "!T".into(),
                    required: ty.to_string(),
                });
            }
            Ok(Derivation::node(Rule::Top, ctx.clone(), term.clone(), ty.clone(), vec![]))
        }
        Term::Lambda(x, body) => {
            let QHead::Arrow(a, b) = ty.head() else {
                return Err(TypeError::Subtype {
                    found: "<function>".into(),
                    required: ty.to_string(),
                });
            };
            let rule = if ty.bangs() == 0 { Rule::Lambda1 } else { Rule::Lambda2 };
            if rule == Rule::Lambda2 {
                for y in body.free_vars() {
                    if y == *x {
                        continue;
                    }
                    match ctx.get(&y) {
                        Some(t) if t.is_banged() => {}
                        Some(_) => return Err(TypeError::Lambda2Capture(y)),
                        None => return Err(TypeError::Unbound(y)),
                    }
                }
            }
            let mut inner = ctx.clone();
            inner.insert(x.clone(), (**a).clone());
            let child = check_against(&inner, body, b)?;
            Ok(Derivation::node(rule, ctx.clone(), term.clone(), ty.clone(), vec![child]))
        }
        Term::Pair(m1, m2) => {
            let n = ty.bangs();
            let QHead::Tensor(a1, a2) = ty.head() else {
                return Err(TypeError::Subtype {
                    found: "<pair>".into(),
                    required: ty.to_string(),
                });
            };
            let (c1, c2) = split_context(ctx, &m1.free_vars(), &m2.free_vars())?;
            let d1 = check_against(&c1, m1, &(**a1).clone().banged(n))?;
            let d2 = check_against(&c2, m2, &(**a2).clone().banged(n))?;
            Ok(Derivation::node(Rule::TensorI, ctx.clone(), term.clone(), ty.clone(), vec![d1, d2]))
        }
        Term::If(p, m, n) => {
            let mut branch_fv = m.free_vars();
            branch_fv.extend(n.free_vars());
            let (cp, cb) = split_context(ctx, &p.free_vars(), &branch_fv)?;
            let dp = check_against(&cp, p, &QType::bit())?;
            let dm = check_against(&cb, m, ty)?;
            let dn = check_against(&cb, n, ty)?;
            Ok(Derivation::node(Rule::If, ctx.clone(), term.clone(), ty.clone(), vec![dp, dm, dn]))
        }
        Term::App(m, n) => {
            let (cm, cn) = split_context(ctx, &m.free_vars(), &n.free_vars())?;
            let arg_ty = match synth(&cm, m)? {
                Some(tf) => {
                    let QHead::Arrow(a0, _) = tf.head() else {
                        return Err(TypeError::Subtype {
                            found: tf.to_string(),
                            required: "_ -o _".into(),
                        });
                    };
                    (**a0).clone()
                }
                None => match synth(&cn, n)? {
                    Some(ta) => ta,
                    None => return crate::infer::check_constrained(ctx, term, ty),
                },
            };
            let dm = check_against(&cm, m, &QType::arrow(arg_ty.clone(), ty.clone()))?;
            let dn = check_against(&cn, n, &arg_ty)?;
            Ok(Derivation::node(Rule::App, ctx.clone(), term.clone(), ty.clone(), vec![dm, dn]))
        }
        Term::LetPair(x, y, m, n) => {
            let mut body_fv = n.free_vars();
            body_fv.remove(x);
            body_fv.remove(y);
            let (cm, cn) = split_context(ctx, &m.free_vars(), &body_fv)?;
            let Some(tm) = synth(&cm, m)? else {
                return crate::infer::check_constrained(ctx, term, ty);
            };
            let QHead::Tensor(a1, a2) = tm.head() else {
                return Err(TypeError::Subtype {
                    found: tm.to_string(),
                    required: "_ (*) _".into(),
                });
            };
            let dm = check_against(&cm, m, &tm)?;
            let mut cbody = cn.clone();
            cbody.insert(x.clone(), (**a1).clone().banged(tm.bangs()));
            cbody.insert(y.clone(), (**a2).clone().banged(tm.bangs()));
            let dn = check_against(&cbody, n, ty)?;
            Ok(Derivation::node(Rule::TensorE, ctx.clone(), term.clone(), ty.clone(), vec![dm, dn]))
        }
    }
}

/// Computes the least derivable type of a term when the term's head makes
/// one evident: variables and constants read it off, application chains
/// propagate it, pairs combine component results. `Ok(None)` means the term
/// has no least type to read off (lambdas, conditionals, let) and the
/// caller must fall back to constraint checking.
fn synth(ctx: &TypingContext, term: &Term) -> Result<Option<QType>, TypeError> {
    match term {
        Term::Var(x) => match ctx.get(x) {
            Some(t) => Ok(Some(t.clone())),
            None => Err(TypeError::Unbound(x.clone())),
        },
        Term::Bit(_) | Term::Meas | Term::New | Term::Gate(_) => {
            Ok(Some(constant_type(term).expect("constant")))
        }
        // Freely !ⁿT for any n; !T is the least of them.
        Term::Star => Ok(Some(QType::top().bang())),
        Term::Pair(m1, m2) => {
            let (c1, c2) = split_context(ctx, &m1.free_vars(), &m2.free_vars())?;
            let (Some(t1), Some(t2)) = (synth(&c1, m1)?, synth(&c2, m2)?) else {
                return Ok(None);
            };
            if t1.is_banged() && t2.is_banged() {
                Ok(Some(QType::tensor(t1, t2).bang()))
            } else {
                Ok(Some(QType::tensor(t1, t2)))
            }
        }
        Term::App(m, n) => {
            let (cm, cn) = split_context(ctx, &m.free_vars(), &n.free_vars())?;
            let Some(tf) = synth(&cm, m)? else { return Ok(None) };
            let QHead::Arrow(a0, b0) = tf.head() else {
                return Err(TypeError::Subtype { found: tf.to_string(), required: "_ -o _".into() });
            };
            // The argument must be derivable at the arrow's argument type;
            // the result type is then the arrow's.
            check_against(&cn, n, a0)?;
            Ok(Some((**b0).clone()))
        }
        _ => Ok(None),
    }
}

/// Whether the program state `[Q, L, M]` is well-typed of type `b`: checks
/// `M` against `b` in the context typing every free variable at `qbit`.
pub fn well_typed_program(state: &ProgramState, b: &QType) -> bool {
    let ctx = TypingContext::qbits_for(&state.term);
    check(&ctx, &state.term, b).is_ok()
}

/// The substitution property as a runnable check: under
/// `Γ₁, !Δ, x:A ▷ m : B` and `Γ₂, !Δ ▷ v : A` (established by the caller),
/// decides `Γ₁, Γ₂, !Δ ▷ m[v/x] : B`. Sound type systems answer true.
#[allow(clippy::too_many_arguments)]
pub fn substitution_check(
    ctx1: &TypingContext,
    bang_delta: &TypingContext,
    x: &VarName,
    a: &QType,
    m: &Term,
    b: &QType,
    ctx2: &TypingContext,
    v: &Term,
) -> bool {
    debug_assert!(v.is_value());
    debug_assert!(bang_delta.iter().all(|(_, t)| t.is_banged()));
    let mut pre1: TypingContext =
        ctx1.iter().chain(bang_delta.iter()).map(|(k, t)| (k.clone(), t.clone())).collect();
    pre1.insert(x.clone(), a.clone());
    let pre2: TypingContext =
        ctx2.iter().chain(bang_delta.iter()).map(|(k, t)| (k.clone(), t.clone())).collect();
    debug_assert!(check(&pre1, m, b).is_ok(), "precondition: m is typed");
    debug_assert!(check(&pre2, v, a).is_ok(), "precondition: v is typed");

    let merged: TypingContext = ctx1
        .iter()
        .chain(ctx2.iter())
        .chain(bang_delta.iter())
        .map(|(k, t)| (k.clone(), t.clone()))
        .collect();
    check(&merged, &m.substitute(x, v), b).is_ok()
}
