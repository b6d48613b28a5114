//! Two-phase type inference: unification-based simply-typed inference, then
//! a search for a bang decoration of the intuitionistic derivation that is a
//! valid linear derivation.
//!
//! A term that is not simply typable is not typable here either. If it is,
//! every candidate linear derivation is a decoration of the simply-typed
//! one, and (by the elimination of repeated exponentials) it suffices to
//! search decorations with at most one bang per type position — one boolean
//! flag each. Rule shapes induce constraints between flags: subtyping
//! conditions at axioms, the capture condition on duplicable lambdas,
//! sharing at context splits and the single-bang pair rules. The constraints
//! are clauses over the flags, solved by unit propagation with chronological
//! backtracking, preferring flags set (duplicable) first.

use std::collections::{BTreeMap, HashMap};
use std::fmt;

use crate::syntax::{Term, VarName};
use crate::typecheck::{Derivation, Rule, TypeError, TypingContext};
use crate::types::{constant_type, lift, skeleton, IType, QHead, QType, TypeConst};

// ---------------------------------------------------------------------------
// Phase 1: simply-typed inference
// ---------------------------------------------------------------------------

/// Why a term has no simple type (and therefore no linear type).
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SimpleTypeError {
    Unbound(VarName),
    Mismatch { found: String, required: String },
    Occurs,
}

impl fmt::Display for SimpleTypeError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimpleTypeError::Unbound(x) => write!(f, "unbound variable `{x}`"),
            SimpleTypeError::Mismatch { found, required } => {
                write!(f, "type mismatch: found `{found}`, required `{required}`")
            }
            SimpleTypeError::Occurs => write!(f, "occurs check failed (self-application?)"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum SType {
    Meta(u32),
    Const(TypeConst),
    Rigid(String),
    Arrow(Box<SType>, Box<SType>),
    Prod(Box<SType>, Box<SType>),
    Top,
}

impl fmt::Display for SType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SType::Meta(_) => write!(f, "_"),
            SType::Const(c) => write!(f, "{c}"),
            SType::Rigid(x) => write!(f, "{x}"),
            SType::Arrow(a, b) => write!(f, "({a} -> {b})"),
            SType::Prod(a, b) => write!(f, "({a} (*) {b})"),
            SType::Top => write!(f, "T"),
        }
    }
}

fn stype_of_itype(u: &IType) -> SType {
    match u {
        IType::Const(c) => SType::Const(c.clone()),
        IType::Var(x) => SType::Rigid(x.clone()),
        IType::Arrow(a, b) => SType::Arrow(Box::new(stype_of_itype(a)), Box::new(stype_of_itype(b))),
        IType::Product(a, b) => SType::Prod(Box::new(stype_of_itype(a)), Box::new(stype_of_itype(b))),
        IType::Top => SType::Top,
    }
}

#[derive(Default)]
struct Unifier {
    subst: Vec<Option<SType>>,
}

impl Unifier {
    fn fresh(&mut self) -> SType {
        self.subst.push(None);
        SType::Meta(self.subst.len() as u32 - 1)
    }

    fn resolve(&self, t: &SType) -> SType {
        let mut t = t.clone();
        while let SType::Meta(i) = t {
            match &self.subst[i as usize] {
                Some(next) => t = next.clone(),
                None => break,
            }
        }
        t
    }

    fn occurs(&self, v: u32, t: &SType) -> bool {
        match self.resolve(t) {
            SType::Meta(i) => i == v,
            SType::Arrow(a, b) | SType::Prod(a, b) => self.occurs(v, &a) || self.occurs(v, &b),
            _ => false,
        }
    }

    fn unify(&mut self, a: &SType, b: &SType) -> Result<(), SimpleTypeError> {
        let (a, b) = (self.resolve(a), self.resolve(b));
        match (&a, &b) {
            (SType::Meta(i), SType::Meta(j)) if i == j => Ok(()),
            (SType::Meta(i), t) | (t, SType::Meta(i)) => {
                if self.occurs(*i, t) {
                    return Err(SimpleTypeError::Occurs);
                }
                self.subst[*i as usize] = Some(t.clone());
                Ok(())
            }
            (SType::Const(c), SType::Const(d)) if c == d => Ok(()),
            (SType::Rigid(x), SType::Rigid(y)) if x == y => Ok(()),
            (SType::Top, SType::Top) => Ok(()),
            (SType::Arrow(a1, b1), SType::Arrow(a2, b2))
            | (SType::Prod(a1, b1), SType::Prod(a2, b2)) => {
                self.unify(a1, a2)?;
                self.unify(b1, b2)
            }
            _ => Err(SimpleTypeError::Mismatch {
                found: self.render(&a),
                required: self.render(&b),
            }),
        }
    }

    fn render(&self, t: &SType) -> String {
        self.zonk(t).to_string()
    }

    fn zonk(&self, t: &SType) -> SType {
        match self.resolve(t) {
            SType::Arrow(a, b) => SType::Arrow(Box::new(self.zonk(&a)), Box::new(self.zonk(&b))),
            SType::Prod(a, b) => SType::Prod(Box::new(self.zonk(&a)), Box::new(self.zonk(&b))),
            other => other,
        }
    }
}

/// Maps residual unification variables to fresh rigid type variables, in
/// order of first appearance.
struct MetaNamer {
    taken: Vec<String>,
    assigned: HashMap<u32, String>,
}

impl MetaNamer {
    fn new(taken: Vec<String>) -> Self {
        MetaNamer { taken, assigned: HashMap::new() }
    }

    fn name_of(&mut self, meta: u32) -> String {
        if let Some(n) = self.assigned.get(&meta) {
            return n.clone();
        }
        let mut k = 0usize;
        let name = loop {
            let base = ["X", "Y", "Z", "W"][k % 4];
            let cand = if k < 4 { base.to_string() } else { format!("{base}{}", k / 4) };
            if !self.taken.contains(&cand) {
                break cand;
            }
            k += 1;
        };
        self.taken.push(name.clone());
        self.assigned.insert(meta, name.clone());
        name
    }
}

struct ProtoNode {
    term: Term,
    sty: SType,
    children: Vec<ProtoNode>,
    binders: Vec<(VarName, SType)>,
}

fn infer_proto(
    env: &BTreeMap<VarName, SType>,
    t: &Term,
    uni: &mut Unifier,
) -> Result<ProtoNode, SimpleTypeError> {
    let node = |sty, children, binders| ProtoNode { term: t.clone(), sty, children, binders };
    match t {
        Term::Var(x) => match env.get(x) {
            Some(sty) => Ok(node(sty.clone(), vec![], vec![])),
            None => Err(SimpleTypeError::Unbound(x.clone())),
        },
        Term::Bit(_) | Term::Meas | Term::New | Term::Gate(_) => {
            let skel = skeleton(&constant_type(t).expect("constant"));
            Ok(node(stype_of_itype(&skel), vec![], vec![]))
        }
        Term::Star => Ok(node(SType::Top, vec![], vec![])),
        Term::Lambda(x, body) => {
            let alpha = uni.fresh();
            let mut env2 = env.clone();
            env2.insert(x.clone(), alpha.clone());
            let b = infer_proto(&env2, body, uni)?;
            let sty = SType::Arrow(Box::new(alpha.clone()), Box::new(b.sty.clone()));
            Ok(node(sty, vec![b], vec![(x.clone(), alpha)]))
        }
        Term::App(m, n) => {
            let dm = infer_proto(env, m, uni)?;
            let dn = infer_proto(env, n, uni)?;
            let beta = uni.fresh();
            uni.unify(&dm.sty, &SType::Arrow(Box::new(dn.sty.clone()), Box::new(beta.clone())))?;
            Ok(node(beta, vec![dm, dn], vec![]))
        }
        Term::If(p, m, n) => {
            let dp = infer_proto(env, p, uni)?;
            uni.unify(&dp.sty, &SType::Const(TypeConst::Bit))?;
            let dm = infer_proto(env, m, uni)?;
            let dn = infer_proto(env, n, uni)?;
            uni.unify(&dm.sty, &dn.sty)?;
            let sty = dm.sty.clone();
            Ok(node(sty, vec![dp, dm, dn], vec![]))
        }
        Term::Pair(a, b) => {
            let da = infer_proto(env, a, uni)?;
            let db = infer_proto(env, b, uni)?;
            let sty = SType::Prod(Box::new(da.sty.clone()), Box::new(db.sty.clone()));
            Ok(node(sty, vec![da, db], vec![]))
        }
        Term::LetPair(x, y, m, n) => {
            let dm = infer_proto(env, m, uni)?;
            let alpha = uni.fresh();
            let beta = uni.fresh();
            uni.unify(
                &dm.sty,
                &SType::Prod(Box::new(alpha.clone()), Box::new(beta.clone())),
            )?;
            let mut env2 = env.clone();
            env2.insert(x.clone(), alpha.clone());
            env2.insert(y.clone(), beta.clone());
            let dn = infer_proto(&env2, n, uni)?;
            let sty = dn.sty.clone();
            Ok(node(sty, vec![dm, dn], vec![(x.clone(), alpha), (y.clone(), beta)]))
        }
    }
}

/// A simply-typed derivation: one node per subterm, every node a valid
/// rule instance of the simply-typed lambda calculus over the constants at
/// their skeleton types.
#[derive(Debug, Clone)]
pub struct IDerivation {
    pub ctx: BTreeMap<VarName, IType>,
    pub term: Term,
    pub ty: IType,
    pub children: Vec<IDerivation>,
    /// Types assigned to variables bound at this node (lambda, let-pair).
    pub binders: Vec<(VarName, IType)>,
}

fn finalize(
    proto: &ProtoNode,
    env: &BTreeMap<VarName, IType>,
    uni: &Unifier,
    namer: &mut MetaNamer,
) -> IDerivation {
    fn to_itype(t: &SType, uni: &Unifier, namer: &mut MetaNamer) -> IType {
        match uni.resolve(t) {
            SType::Meta(i) => IType::Var(namer.name_of(i)),
            SType::Const(c) => IType::Const(c),
            SType::Rigid(x) => IType::Var(x),
            SType::Arrow(a, b) => {
                IType::arrow(to_itype(&a, uni, namer), to_itype(&b, uni, namer))
            }
            SType::Prod(a, b) => {
                IType::product(to_itype(&a, uni, namer), to_itype(&b, uni, namer))
            }
            SType::Top => IType::Top,
        }
    }
    let ty = to_itype(&proto.sty, uni, namer);
    let binders: Vec<(VarName, IType)> = proto
        .binders
        .iter()
        .map(|(x, s)| (x.clone(), to_itype(s, uni, namer)))
        .collect();
    let mut inner = env.clone();
    for (x, u) in &binders {
        inner.insert(x.clone(), u.clone());
    }
    let children = proto
        .children
        .iter()
        .enumerate()
        .map(|(i, c)| {
            // Only premises under the binders see them: a lambda's single
            // premise, a let-pair's second premise.
            let child_env = match (&proto.term, i) {
                (Term::Lambda(..), 0) | (Term::LetPair(..), 1) => &inner,
                _ => env,
            };
            finalize(c, child_env, uni, namer)
        })
        .collect();
    IDerivation { ctx: env.clone(), term: proto.term.clone(), ty, children, binders }
}

/// Simple-type inference for a closed term.
pub fn infer_simple(term: &Term) -> Result<(IDerivation, IType), SimpleTypeError> {
    infer_simple_in(&BTreeMap::new(), term)
}

/// Simple-type inference under a context of intuitionistic types (rigid
/// variables stay rigid); `pin` additionally unifies the root type.
pub fn infer_simple_in(
    ctx: &BTreeMap<VarName, IType>,
    term: &Term,
) -> Result<(IDerivation, IType), SimpleTypeError> {
    infer_simple_pinned(ctx, term, None)
}

fn infer_simple_pinned(
    ctx: &BTreeMap<VarName, IType>,
    term: &Term,
    pin: Option<&IType>,
) -> Result<(IDerivation, IType), SimpleTypeError> {
    let mut avoid = term.free_vars();
    avoid.extend(ctx.keys().cloned());
    let term = term.barendregt_with(&avoid);
    let mut uni = Unifier::default();
    let env: BTreeMap<VarName, SType> =
        ctx.iter().map(|(x, u)| (x.clone(), stype_of_itype(u))).collect();
    let proto = infer_proto(&env, &term, &mut uni)?;
    if let Some(target) = pin {
        uni.unify(&proto.sty, &stype_of_itype(target)).map_err(|e| match e {
            SimpleTypeError::Occurs => SimpleTypeError::Occurs,
            other => other,
        })?;
    }
    let mut taken: Vec<String> = Vec::new();
    fn rigids(u: &IType, out: &mut Vec<String>) {
        match u {
            IType::Var(x) => out.push(x.clone()),
            IType::Arrow(a, b) | IType::Product(a, b) => {
                rigids(a, out);
                rigids(b, out);
            }
            _ => {}
        }
    }
    for u in ctx.values() {
        rigids(u, &mut taken);
    }
    if let Some(t) = pin {
        rigids(t, &mut taken);
    }
    let mut namer = MetaNamer::new(taken);
    let ienv: BTreeMap<VarName, IType> = ctx.clone();
    let root = finalize(&proto, &ienv, &uni, &mut namer);
    let ty = root.ty.clone();
    Ok((root, ty))
}

// ---------------------------------------------------------------------------
// Phase 2: decoration search
// ---------------------------------------------------------------------------

/// A decorated type shape: one boolean flag per position of an IType.
#[derive(Debug, Clone)]
struct DType {
    flag: u32,
    head: DHead,
}

#[derive(Debug, Clone)]
enum DHead {
    Const(TypeConst),
    Var(String),
    Arrow(Box<DType>, Box<DType>),
    Prod(Box<DType>, Box<DType>),
    Top,
}

#[derive(Debug, Clone)]
struct DNode {
    dtype: DType,
    binders: Vec<(VarName, DType)>,
    children: Vec<DNode>,
}

#[derive(Default)]
struct Builder {
    nflags: u32,
    clauses: Vec<Vec<i32>>,
    pins: HashMap<u32, bool>,
    eager: Option<TypeError>,
}

impl Builder {
    fn flag(&mut self) -> u32 {
        self.nflags += 1;
        self.nflags - 1
    }

    fn lit(v: u32, sign: bool) -> i32 {
        if sign {
            v as i32 + 1
        } else {
            -(v as i32 + 1)
        }
    }

    fn clause(&mut self, lits: Vec<i32>) {
        self.clauses.push(lits);
    }

    fn pin(&mut self, f: u32, v: bool, about: Option<&VarName>) {
        if let Some(&prev) = self.pins.get(&f) {
            if prev != v && self.eager.is_none() {
                self.eager = Some(match about {
                    Some(x) => TypeError::Linearity(x.clone()),
                    None => TypeError::Decoration("conflicting exponential constraints".into()),
                });
            }
        }
        self.pins.insert(f, v);
        self.clause(vec![Self::lit(f, v)]);
    }

    /// a = 1 implies b = 1.
    fn imp(&mut self, a: u32, b: u32) {
        self.clause(vec![Self::lit(a, false), Self::lit(b, true)]);
    }

    /// r = f ∨ tau.
    fn or_eq(&mut self, r: u32, f: u32, tau: u32) {
        self.imp(f, r);
        self.imp(tau, r);
        self.clause(vec![Self::lit(r, false), Self::lit(f, true), Self::lit(tau, true)]);
    }

    fn fresh_over(&mut self, u: &IType) -> DType {
        let flag = self.flag();
        let head = match u {
            IType::Const(c) => DHead::Const(c.clone()),
            IType::Var(x) => DHead::Var(x.clone()),
            IType::Top => DHead::Top,
            IType::Arrow(a, b) => {
                DHead::Arrow(Box::new(self.fresh_over(a)), Box::new(self.fresh_over(b)))
            }
            IType::Product(a, b) => {
                DHead::Prod(Box::new(self.fresh_over(a)), Box::new(self.fresh_over(b)))
            }
        };
        DType { flag, head }
    }

    /// Flags pinned to the (single-bang collapsed) profile of `q`.
    fn pinned_over(&mut self, q: &QType, about: Option<&VarName>) -> DType {
        let flag = self.flag();
        self.pin(flag, q.bangs() >= 1, about);
        let head = match q.head() {
            QHead::Const(c) => DHead::Const(c.clone()),
            QHead::Var(x) => DHead::Var(x.clone()),
            QHead::Top => DHead::Top,
            QHead::Arrow(a, b) => DHead::Arrow(
                Box::new(self.pinned_over(a, about)),
                Box::new(self.pinned_over(b, about)),
            ),
            QHead::Tensor(a, b) => DHead::Prod(
                Box::new(self.pinned_over(a, about)),
                Box::new(self.pinned_over(b, about)),
            ),
        };
        DType { flag, head }
    }

    /// Position-wise flag equality (same skeleton assumed).
    fn eq_types(&mut self, a: &DType, b: &DType) {
        self.imp(a.flag, b.flag);
        self.imp(b.flag, a.flag);
        match (&a.head, &b.head) {
            (DHead::Arrow(a1, b1), DHead::Arrow(a2, b2))
            | (DHead::Prod(a1, b1), DHead::Prod(a2, b2)) => {
                self.eq_types(a1, a2);
                self.eq_types(b1, b2);
            }
            _ => {}
        }
    }

    /// Subtype constraints for `a <: b`: at every aligned node the bang
    /// condition `flag(b) ⇒ flag(a)`, arrows contravariant on the left.
    fn sub_types(&mut self, a: &DType, b: &DType) {
        self.imp(b.flag, a.flag);
        match (&a.head, &b.head) {
            (DHead::Arrow(a1, b1), DHead::Arrow(a2, b2)) => {
                self.sub_types(a2, a1);
                self.sub_types(b1, b2);
            }
            (DHead::Prod(a1, b1), DHead::Prod(a2, b2)) => {
                self.sub_types(a1, a2);
                self.sub_types(b1, b2);
            }
            _ => {}
        }
    }
}

fn walk(
    node: &IDerivation,
    env: &HashMap<VarName, DType>,
    b: &mut Builder,
) -> DNode {
    match &node.term {
        Term::Var(x) => {
            let d = b.fresh_over(&node.ty);
            let binding = env.get(x).expect("scoped variable").clone();
            b.sub_types(&binding, &d);
            DNode { dtype: d, binders: vec![], children: vec![] }
        }
        Term::Bit(_) | Term::Meas | Term::New | Term::Gate(_) => {
            let ac = constant_type(&node.term).expect("constant");
            let pinned = b.pinned_over(&ac, None);
            let d = b.fresh_over(&node.ty);
            b.sub_types(&pinned, &d);
            DNode { dtype: d, binders: vec![], children: vec![] }
        }
        Term::Star => {
            let d = b.fresh_over(&IType::Top);
            DNode { dtype: d, binders: vec![], children: vec![] }
        }
        Term::Lambda(x, body) => {
            let (_, binder_ity) = (&node.binders[0].0, &node.binders[0].1);
            let da = b.fresh_over(binder_ity);
            let mut env2 = env.clone();
            env2.insert(x.clone(), da.clone());
            let child = walk(&node.children[0], &env2, b);
            let f = b.flag();
            for y in body.free_vars() {
                if y == *x {
                    continue;
                }
                if let Some(dy) = env.get(&y) {
                    b.imp(f, dy.flag);
                }
            }
            let dtype = DType {
                flag: f,
                head: DHead::Arrow(Box::new(da.clone()), Box::new(child.dtype.clone())),
            };
            DNode { dtype, binders: vec![(x.clone(), da)], children: vec![child] }
        }
        Term::App(m, n) => {
            pin_shared(&m.free_vars(), &n.free_vars(), env, b);
            let wm = walk(&node.children[0], env, b);
            let wn = walk(&node.children[1], env, b);
            b.pin(wm.dtype.flag, false, None);
            let DHead::Arrow(arg, res) = &wm.dtype.head else {
                unreachable!("unification forces an arrow in function position")
            };
            b.eq_types(arg, &wn.dtype);
            let dtype = (**res).clone();
            DNode { dtype, binders: vec![], children: vec![wm, wn] }
        }
        Term::If(p, m, n) => {
            let mut branch_fv = m.free_vars();
            branch_fv.extend(n.free_vars());
            pin_shared(&p.free_vars(), &branch_fv, env, b);
            let wp = walk(&node.children[0], env, b);
            b.pin(wp.dtype.flag, false, None);
            let wm = walk(&node.children[1], env, b);
            let wn = walk(&node.children[2], env, b);
            b.eq_types(&wm.dtype, &wn.dtype);
            let dtype = wm.dtype.clone();
            DNode { dtype, binders: vec![], children: vec![wp, wm, wn] }
        }
        Term::Pair(m, n) => {
            pin_shared(&m.free_vars(), &n.free_vars(), env, b);
            let w1 = walk(&node.children[0], env, b);
            let w2 = walk(&node.children[1], env, b);
            let f = b.flag();
            let tau1 = b.flag();
            let tau2 = b.flag();
            b.or_eq(w1.dtype.flag, f, tau1);
            b.or_eq(w2.dtype.flag, f, tau2);
            let dtype = DType {
                flag: f,
                head: DHead::Prod(
                    Box::new(DType { flag: tau1, head: w1.dtype.head.clone() }),
                    Box::new(DType { flag: tau2, head: w2.dtype.head.clone() }),
                ),
            };
            DNode { dtype, binders: vec![], children: vec![w1, w2] }
        }
        Term::LetPair(x, y, m, n) => {
            let mut body_fv = n.free_vars();
            body_fv.remove(x);
            body_fv.remove(y);
            pin_shared(&m.free_vars(), &body_fv, env, b);
            let wm = walk(&node.children[0], env, b);
            let DHead::Prod(c1, c2) = &wm.dtype.head else {
                unreachable!("unification forces a product in let-pair scrutinee")
            };
            let g = wm.dtype.flag;
            let r1 = b.flag();
            let r2 = b.flag();
            b.or_eq(r1, g, c1.flag);
            b.or_eq(r2, g, c2.flag);
            let b1 = DType { flag: r1, head: c1.head.clone() };
            let b2 = DType { flag: r2, head: c2.head.clone() };
            let mut env2 = env.clone();
            env2.insert(x.clone(), b1.clone());
            env2.insert(y.clone(), b2.clone());
            let wn = walk(&node.children[1], &env2, b);
            let dtype = wn.dtype.clone();
            DNode {
                dtype,
                binders: vec![(x.clone(), b1), (y.clone(), b2)],
                children: vec![wm, wn],
            }
        }
    }
}

/// Variables used by both sides of a split must be duplicable.
fn pin_shared(
    left: &std::collections::BTreeSet<VarName>,
    right: &std::collections::BTreeSet<VarName>,
    env: &HashMap<VarName, DType>,
    b: &mut Builder,
) {
    for x in left.intersection(right) {
        if let Some(d) = env.get(x) {
            let flag = d.flag;
            b.pin(flag, true, Some(x));
        }
    }
}

// --- SAT solving -------------------------------------------------------------

struct Sat {
    nvars: usize,
    clauses: Vec<Vec<i32>>,
}

impl Sat {
    /// Unit propagation; `None` on conflict, `Some(changed)` otherwise.
    fn propagate(&self, assign: &mut [Option<bool>]) -> Option<()> {
        loop {
            let mut changed = false;
            'clauses: for clause in &self.clauses {
                let mut unassigned: Option<i32> = None;
                let mut n_unassigned = 0;
                for &lit in clause {
                    let var = lit.unsigned_abs() as usize - 1;
                    match assign[var] {
                        Some(v) if v == (lit > 0) => continue 'clauses, // satisfied
                        Some(_) => {}
                        None => {
                            n_unassigned += 1;
                            unassigned = Some(lit);
                        }
                    }
                }
                match n_unassigned {
                    0 => return None,
                    1 => {
                        let lit = unassigned.unwrap();
                        assign[lit.unsigned_abs() as usize - 1] = Some(lit > 0);
                        changed = true;
                    }
                    _ => {}
                }
            }
            if !changed {
                return Some(());
            }
        }
    }

    /// First satisfying assignment, branching on the lowest unassigned
    /// variable and trying `true` first.
    fn solve(&self) -> Option<Vec<bool>> {
        fn rec(sat: &Sat, mut assign: Vec<Option<bool>>) -> Option<Vec<bool>> {
            sat.propagate(&mut assign)?;
            match assign.iter().position(Option::is_none) {
                None => Some(assign.into_iter().map(Option::unwrap).collect()),
                Some(v) => {
                    for val in [true, false] {
                        let mut next = assign.clone();
                        next[v] = Some(val);
                        if let Some(sol) = rec(sat, next) {
                            return Some(sol);
                        }
                    }
                    None
                }
            }
        }
        rec(self, vec![None; self.nvars])
    }

    /// All satisfying assignments, up to `cap`.
    fn enumerate(&self, cap: usize) -> Vec<Vec<bool>> {
        fn rec(sat: &Sat, mut assign: Vec<Option<bool>>, out: &mut Vec<Vec<bool>>, cap: usize) {
            if out.len() >= cap || sat.propagate(&mut assign).is_none() {
                return;
            }
            match assign.iter().position(Option::is_none) {
                None => out.push(assign.into_iter().map(Option::unwrap).collect()),
                Some(v) => {
                    for val in [true, false] {
                        let mut next = assign.clone();
                        next[v] = Some(val);
                        rec(sat, next, out, cap);
                    }
                }
            }
        }
        let mut out = Vec::new();
        rec(self, vec![None; self.nvars], &mut out, cap);
        out
    }
}

// --- The decoration problem ----------------------------------------------------

/// The constraint system for decorating one simply-typed derivation, kept
/// around so callers can solve it, enumerate its solutions, or realize an
/// arbitrary flag assignment into a derivation for oracle comparison.
pub struct DecorationProblem {
    pi: IDerivation,
    dtree: DNode,
    env0: HashMap<VarName, DType>,
    sat: Sat,
    pins: HashMap<u32, bool>,
    eager: Option<TypeError>,
}

impl DecorationProblem {
    /// Builds the constraints for `pi` under a pinned context: every context
    /// binding's bang profile is fixed (a program context pins every
    /// variable to plain `qbit`). Context variables missing from `ctx` are
    /// pinned bang-free at their intuitionistic type.
    pub fn new(pi: &IDerivation, ctx: &TypingContext) -> Self {
        Self::build(pi, ctx, None)
    }

    /// As [`DecorationProblem::new`], additionally pinning the root type.
    pub fn with_target(pi: &IDerivation, ctx: &TypingContext, target: &QType) -> Self {
        Self::build(pi, ctx, Some(target))
    }

    fn build(pi: &IDerivation, ctx: &TypingContext, target: Option<&QType>) -> Self {
        let mut b = Builder::default();
        let mut env0 = HashMap::new();
        for (x, u) in &pi.ctx {
            let pinned = match ctx.get(x) {
                Some(q) => b.pinned_over(&q.single_banged(), Some(x)),
                None => b.pinned_over(&lift(u), Some(x)),
            };
            env0.insert(x.clone(), pinned);
        }
        let dtree = walk(pi, &env0, &mut b);
        if let Some(t) = target {
            let pinned = b.pinned_over(&t.single_banged(), None);
            b.eq_types(&dtree.dtype, &pinned);
        }
        let sat = Sat { nvars: b.nflags as usize, clauses: b.clauses };
        DecorationProblem { pi: pi.clone(), dtree, env0, sat, pins: b.pins, eager: b.eager }
    }

    /// The flags an assignment is free to choose: everything not pinned by
    /// an external contract (constant types, the given context, the target)
    /// or forced outright by a rule shape.
    pub fn free_flags(&self) -> Vec<u32> {
        (0..self.sat.nvars as u32).filter(|f| !self.pins.contains_key(f)).collect()
    }

    /// Number of free decoration flags in this instance.
    pub fn flag_count(&self) -> usize {
        self.free_flags().len()
    }

    /// A constraint conflict already identified while building (e.g. a
    /// non-duplicable context variable used twice).
    pub fn eager_error(&self) -> Option<&TypeError> {
        self.eager.as_ref()
    }

    /// First solution, preferring duplicable (flag = 1) assignments.
    pub fn solve(&self) -> Option<Vec<bool>> {
        if self.eager.is_some() {
            return None;
        }
        self.sat.solve()
    }

    /// All satisfying assignments (diagnostic use; capped).
    pub fn solutions(&self, cap: usize) -> Vec<Vec<bool>> {
        if self.eager.is_some() {
            return Vec::new();
        }
        self.sat.enumerate(cap)
    }

    /// Materializes an arbitrary flag assignment into a derivation and root
    /// type. The result is only a valid derivation when the assignment
    /// satisfies the constraints — running [`Derivation::validate`] on
    /// realizations of all `2^k` assignments is the brute-force oracle the
    /// solver is tested against.
    pub fn realize(&self, assign: &[bool]) -> (Derivation, QType) {
        assert_eq!(assign.len(), self.sat.nvars);
        let root_ctx: TypingContext = self
            .env0
            .iter()
            .map(|(x, d)| (x.clone(), realize_type(d, assign)))
            .collect();
        let d = rebuild(&self.pi, &self.dtree, &root_ctx, assign);
        let ty = realize_type(&self.dtree.dtype, assign);
        (d, ty)
    }

    /// Realizes an assignment of the free flags, with every pinned flag at
    /// its contracted value. `None` when the pins already conflict (no
    /// assignment respects the external contract).
    pub fn realize_with_free(&self, free_bits: &[bool]) -> Option<(Derivation, QType)> {
        if self.eager.is_some() {
            return None;
        }
        let free = self.free_flags();
        assert_eq!(free_bits.len(), free.len());
        let mut assign = vec![false; self.sat.nvars];
        for (&f, &v) in &self.pins {
            assign[f as usize] = v;
        }
        for (&f, &bit) in free.iter().zip(free_bits) {
            assign[f as usize] = bit;
        }
        Some(self.realize(&assign))
    }

    /// Solves and realizes.
    pub fn solve_realized(&self) -> Option<(Derivation, QType)> {
        let assign = self.solve()?;
        Some(self.realize(&assign))
    }
}

fn realize_type(d: &DType, assign: &[bool]) -> QType {
    let inner = match &d.head {
        DHead::Const(c) => QType::constant(c.clone()),
        DHead::Var(x) => QType::var(x.clone()),
        DHead::Top => QType::top(),
        DHead::Arrow(a, b) => QType::arrow(realize_type(a, assign), realize_type(b, assign)),
        DHead::Prod(a, b) => QType::tensor(realize_type(a, assign), realize_type(b, assign)),
    };
    if assign[d.flag as usize] {
        inner.bang()
    } else {
        inner
    }
}

/// Routes a context for rebuilding: duplicable bindings to both sides,
/// others by occurrence. Never fails — an over-shared non-duplicable
/// binding lands on both sides and the validator rejects the instance.
fn route(
    ctx: &TypingContext,
    left_fv: &std::collections::BTreeSet<VarName>,
    right_fv: &std::collections::BTreeSet<VarName>,
) -> (TypingContext, TypingContext) {
    let mut left = TypingContext::empty();
    let mut right = TypingContext::empty();
    for (x, t) in ctx.iter() {
        if t.is_banged() {
            left.insert(x.clone(), t.clone());
            right.insert(x.clone(), t.clone());
        } else {
            match (left_fv.contains(x), right_fv.contains(x)) {
                (true, true) => {
                    left.insert(x.clone(), t.clone());
                    right.insert(x.clone(), t.clone());
                }
                (false, true) => right.insert(x.clone(), t.clone()),
                _ => left.insert(x.clone(), t.clone()),
            }
        }
    }
    (left, right)
}

fn rebuild(pi: &IDerivation, dn: &DNode, ctx: &TypingContext, assign: &[bool]) -> Derivation {
    let ty = realize_type(&dn.dtype, assign);
    let node = |rule, children| Derivation {
        rule,
        ctx: ctx.clone(),
        term: pi.term.clone(),
        ty: ty.clone(),
        children,
    };
    match &pi.term {
        Term::Var(_) => node(Rule::Ax1, vec![]),
        Term::Bit(_) | Term::Meas | Term::New | Term::Gate(_) => node(Rule::Ax2, vec![]),
        Term::Star => node(Rule::Top, vec![]),
        Term::Lambda(x, _) => {
            let rule = if ty.is_banged() { Rule::Lambda2 } else { Rule::Lambda1 };
            let mut inner = ctx.clone();
            inner.insert(x.clone(), realize_type(&dn.binders[0].1, assign));
            let child = rebuild(&pi.children[0], &dn.children[0], &inner, assign);
            node(rule, vec![child])
        }
        Term::App(m, n) => {
            let (cm, cn) = route(ctx, &m.free_vars(), &n.free_vars());
            let dm = rebuild(&pi.children[0], &dn.children[0], &cm, assign);
            let dnn = rebuild(&pi.children[1], &dn.children[1], &cn, assign);
            node(Rule::App, vec![dm, dnn])
        }
        Term::If(p, m, n) => {
            let mut branch_fv = m.free_vars();
            branch_fv.extend(n.free_vars());
            let (cp, cb) = route(ctx, &p.free_vars(), &branch_fv);
            let dp = rebuild(&pi.children[0], &dn.children[0], &cp, assign);
            let dm = rebuild(&pi.children[1], &dn.children[1], &cb, assign);
            let dnn = rebuild(&pi.children[2], &dn.children[2], &cb, assign);
            node(Rule::If, vec![dp, dm, dnn])
        }
        Term::Pair(m, n) => {
            let (c1, c2) = route(ctx, &m.free_vars(), &n.free_vars());
            let d1 = rebuild(&pi.children[0], &dn.children[0], &c1, assign);
            let d2 = rebuild(&pi.children[1], &dn.children[1], &c2, assign);
            node(Rule::TensorI, vec![d1, d2])
        }
        Term::LetPair(x, y, m, n) => {
            let mut body_fv = n.free_vars();
            body_fv.remove(x);
            body_fv.remove(y);
            let (cm, cn) = route(ctx, &m.free_vars(), &body_fv);
            let dm = rebuild(&pi.children[0], &dn.children[0], &cm, assign);
            let mut cbody = cn.clone();
            cbody.insert(x.clone(), realize_type(&dn.binders[0].1, assign));
            cbody.insert(y.clone(), realize_type(&dn.binders[1].1, assign));
            let dnn = rebuild(&pi.children[1], &dn.children[1], &cbody, assign);
            node(Rule::TensorE, vec![dm, dnn])
        }
    }
}

// ---------------------------------------------------------------------------
// Public entry points
// ---------------------------------------------------------------------------

/// Searches for a bang decoration of `pi` that is a valid linear
/// derivation, with every context variable pinned bang-free at its
/// intuitionistic type (the program-context convention).
pub fn decorate_search(pi: &IDerivation) -> Option<(Derivation, QType)> {
    let ctx: TypingContext = pi.ctx.iter().map(|(x, u)| (x.clone(), lift(u))).collect();
    let problem = DecorationProblem::new(pi, &ctx);
    let out = problem.solve_realized();
    if let Some((d, _)) = &out {
        debug_assert_eq!(d.validate(), Ok(()), "decoration produced an invalid derivation");
    }
    out
}

/// The result of full inference.
#[derive(Debug, Clone)]
pub enum InferOutcome {
    /// A possible type (not a description of all of them), with its
    /// derivation.
    Typed { ty: QType, derivation: Derivation },
    /// Phase 1 failed: no simple type, hence no linear type.
    NotSimplyTyped(SimpleTypeError),
    /// Phase 1 succeeded but no decoration is a valid linear derivation.
    NoDecoration(TypeError),
}

impl InferOutcome {
    pub fn ty(&self) -> Option<&QType> {
        match self {
            InferOutcome::Typed { ty, .. } => Some(ty),
            _ => None,
        }
    }
}

/// Infers a type for a closed term.
pub fn infer(term: &Term) -> InferOutcome {
    infer_in(&TypingContext::empty(), term)
}

/// Infers a type for a program-state term: free variables are typed `qbit`.
pub fn infer_program(term: &Term) -> InferOutcome {
    infer_in(&TypingContext::qbits_for(term), term)
}

/// Inference under an explicit context (pinned exactly).
pub fn infer_in(ctx: &TypingContext, term: &Term) -> InferOutcome {
    let ictx: BTreeMap<VarName, IType> =
        ctx.iter().map(|(x, q)| (x.clone(), skeleton(q))).collect();
    let (pi, _) = match infer_simple_in(&ictx, term) {
        Ok(ok) => ok,
        Err(e) => return InferOutcome::NotSimplyTyped(e),
    };
    let problem = DecorationProblem::new(&pi, ctx);
    if let Some(e) = problem.eager_error() {
        return InferOutcome::NoDecoration(e.clone());
    }
    match problem.solve_realized() {
        Some((derivation, ty)) => {
            debug_assert_eq!(derivation.validate(), Ok(()));
            InferOutcome::Typed { ty, derivation }
        }
        None => InferOutcome::NoDecoration(TypeError::Decoration(format!(
            "no exponential decoration types `{term}`"
        ))),
    }
}

/// All types the decoration search can assign to a closed term (diagnostic
/// `--all` mode): realizes every satisfying assignment and deduplicates the
/// root types.
pub fn infer_all(ctx: &TypingContext, term: &Term, cap: usize) -> Result<Vec<QType>, SimpleTypeError> {
    let ictx: BTreeMap<VarName, IType> =
        ctx.iter().map(|(x, q)| (x.clone(), skeleton(q))).collect();
    let (pi, _) = infer_simple_in(&ictx, term)?;
    let problem = DecorationProblem::new(&pi, ctx);
    let mut tys = Vec::new();
    for assign in problem.solutions(cap) {
        let (_, ty) = problem.realize(&assign);
        if !tys.contains(&ty) {
            tys.push(ty);
        }
    }
    Ok(tys)
}

/// Constraint-based checking: derives `ctx ▷ term : target` by pinning the
/// target's skeleton in phase 1 and its bang profile in phase 2. Used by
/// the checker for applications where neither side synthesizes. The
/// produced derivation concludes the single-bang collapse of `target`
/// (equivalent under mutual subtyping).
pub(crate) fn check_constrained(
    ctx: &TypingContext,
    term: &Term,
    target: &QType,
) -> Result<Derivation, TypeError> {
    let ictx: BTreeMap<VarName, IType> =
        ctx.iter().map(|(x, q)| (x.clone(), skeleton(q))).collect();
    let starget = skeleton(target);
    let (pi, _) = infer_simple_pinned(&ictx, term, Some(&starget)).map_err(|e| match e {
        SimpleTypeError::Unbound(x) => TypeError::Unbound(x),
        SimpleTypeError::Mismatch { found, required } => TypeError::Subtype { found, required },
        SimpleTypeError::Occurs => TypeError::Subtype {
            found: "<self-applied term>".into(),
            required: target.to_string(),
        },
    })?;
    let problem = DecorationProblem::with_target(&pi, ctx, target);
    if let Some(e) = problem.eager_error() {
        return Err(e.clone());
    }
    match problem.solve_realized() {
        Some((derivation, _)) => {
            debug_assert_eq!(derivation.validate(), Ok(()));
            Ok(derivation)
        }
        None => Err(TypeError::Decoration(format!(
            "`{term}` does not check against `{target}`"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantum::GateTable;
    use crate::syntax::parse;
    use crate::typecheck::check;
    use crate::types::{parse_qtype, subtype};

    fn t(src: &str) -> Term {
        parse(src, &GateTable::builtin()).unwrap()
    }

    #[test]
    fn simple_inference_examples() {
        let (_, ty) = infer_simple(&t("\\x.\\y.x y")).unwrap();
        assert_eq!(ty.to_string(), "(X -> Y) -> X -> Y");

        assert!(matches!(infer_simple(&t("\\x.x x")), Err(SimpleTypeError::Occurs)));

        let (_, ty) = infer_simple(&t("new 0")).unwrap();
        assert_eq!(ty, IType::qbit());

        // H applied to a lambda clashes in phase 1.
        assert!(matches!(
            infer_simple(&t("H (\\x.x)")),
            Err(SimpleTypeError::Mismatch { .. })
        ));
    }

    #[test]
    fn inference_validates_against_the_checker() {
        for src in [
            "\\x.\\y.x y",
            "new 0",
            "\\x.<x, x>",
            "\\f.\\x.f x",
            "\\x.if x then 0 else 1",
            "let <a, b> = <0, new 1> in <a, b>",
            "(\\d.d (meas (new 0))) (\\x.<x, x>)",
        ] {
            let term = t(src);
            match infer(&term) {
                InferOutcome::Typed { ty, derivation } => {
                    derivation.validate().unwrap_or_else(|e| panic!("{src}: {e}"));
                    let d = check(&TypingContext::empty(), &term, &ty)
                        .unwrap_or_else(|e| panic!("{src} : {ty}: {e}"));
                    d.validate().unwrap();
                }
                other => panic!("{src}: expected a type, got {other:?}"),
            }
        }
    }

    #[test]
    fn inferred_skeleton_matches_phase_one() {
        for src in ["\\x.\\y.x y", "\\x.<x, x>", "\\f.\\x.f x"] {
            let term = t(src);
            let (_, simple) = infer_simple(&term).unwrap();
            if let InferOutcome::Typed { ty, .. } = infer(&term) {
                assert_eq!(skeleton(&ty), simple, "{src}");
            } else {
                panic!("{src} must type");
            }
        }
    }

    #[test]
    fn duplication_forces_a_bang() {
        let term = t("\\x.<x, x>");
        let InferOutcome::Typed { ty, .. } = infer(&term) else { panic!() };
        let QHead::Arrow(a, _) = ty.head() else { panic!() };
        assert!(a.is_banged(), "duplicated binder must be duplicable, got {ty}");
    }

    #[test]
    fn program_contexts_pin_qbits() {
        // U <p0, p0> with p0 : qbit fails decoration with a linearity report.
        let term = t("CNOT <p0, p0>");
        match infer_program(&term) {
            InferOutcome::NoDecoration(TypeError::Linearity(x)) => {
                assert_eq!(x, VarName::new("p0"))
            }
            other => panic!("{other:?}"),
        }
        // A single use is fine.
        let term = t("meas p0");
        match infer_program(&term) {
            InferOutcome::Typed { ty, .. } => assert_eq!(ty, parse_qtype("!bit").unwrap()),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn untypable_stays_untypable() {
        assert!(matches!(infer(&t("\\x.x x")), InferOutcome::NotSimplyTyped(_)));
        // 0 applied as a function.
        assert!(matches!(infer(&t("0 1")), InferOutcome::NotSimplyTyped(_)));
    }

    #[test]
    fn check_constrained_agrees_with_targets() {
        let term = t("let g = \\z.CNOT <H (new 0), z> in g (new 0)");
        let target = parse_qtype("qbit (*) qbit").unwrap();
        let d = check_constrained(&TypingContext::empty(), &term, &target).unwrap();
        d.validate().unwrap();
        assert_eq!(d.ty, target);
        let bad = parse_qtype("bit (*) qbit").unwrap();
        assert!(check_constrained(&TypingContext::empty(), &term, &bad).is_err());
    }

    #[test]
    fn solver_prefers_duplicable() {
        let term = t("\\x.x");
        let InferOutcome::Typed { ty, .. } = infer(&term) else { panic!() };
        // The identity can be banged and the search prefers it.
        assert!(ty.is_banged(), "{ty}");
    }

    #[test]
    fn enumeration_contains_solved_type() {
        let term = t("\\x.\\y.x y");
        let all = infer_all(&TypingContext::empty(), &term, 4096).unwrap();
        let InferOutcome::Typed { ty, .. } = infer(&term) else { panic!() };
        assert!(all.contains(&ty));
        // Both classic incomparable variants appear: the fully linear type
        // and the one duplicating the function argument.
        let linear = parse_qtype("(X -o Y) -o X -o Y").unwrap();
        assert!(all.contains(&linear), "{all:?}");
        let duplicating = parse_qtype("!(X -o Y) -o !(X -o Y)").unwrap();
        assert!(all.contains(&duplicating), "{all:?}");
        assert!(!subtype(&linear, &duplicating) && !subtype(&duplicating, &linear));
    }
}
