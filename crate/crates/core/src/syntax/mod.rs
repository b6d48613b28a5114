//! Terms of the calculus: abstract syntax, alpha-equivalence, free
//! variables, capture-avoiding substitution, value recognition and the
//! pretty printer.
//!
//! Terms are immutable values identified up to alpha-equivalence: `==` on
//! [`Term`] compares modulo renaming of bound variables, and the `Hash`
//! implementation agrees with it.

mod parse;

pub use parse::{parse, ParseError, ParseErrorKind};

use std::collections::BTreeSet;
use std::fmt;
use std::hash::{Hash, Hasher};

/// A term variable. The family `p0, p1, p2, …` is reserved for quantum
/// register references: the reducer introduces them and user programs may
/// not bind them.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct VarName(String);

impl VarName {
    pub fn new(name: impl Into<String>) -> Self {
        VarName(name.into())
    }

    /// The canonical name of the register holding qubit `i`.
    pub fn register(i: usize) -> Self {
        VarName(format!("p{i}"))
    }

    /// `Some(i)` when the name belongs to the reserved register family.
    pub fn register_index(&self) -> Option<usize> {
        let rest = self.0.strip_prefix('p')?;
        if rest.is_empty() || !rest.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        rest.parse().ok()
    }

    pub fn is_reserved(&self) -> bool {
        self.register_index().is_some()
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for VarName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<&str> for VarName {
    fn from(s: &str) -> Self {
        VarName(s.to_string())
    }
}

/// A reference to a built-in unitary gate; the arity is carried in the term
/// so typing does not need the gate table.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GateRef {
    pub name: String,
    pub arity: usize,
}

impl fmt::Display for GateRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.name)
    }
}

/// Abstract syntax: one alternative per production of the grammar.
#[derive(Debug, Clone)]
pub enum Term {
    Var(VarName),
    App(Box<Term>, Box<Term>),
    Lambda(VarName, Box<Term>),
    If(Box<Term>, Box<Term>, Box<Term>),
    Bit(bool),
    Meas,
    New,
    Gate(GateRef),
    Star,
    Pair(Box<Term>, Box<Term>),
    LetPair(VarName, VarName, Box<Term>, Box<Term>),
}

impl Term {
    pub fn var(name: impl Into<String>) -> Self {
        Term::Var(VarName::new(name))
    }

    pub fn app(f: Term, a: Term) -> Self {
        Term::App(Box::new(f), Box::new(a))
    }

    pub fn lam(x: impl Into<String>, body: Term) -> Self {
        Term::Lambda(VarName::new(x), Box::new(body))
    }

    pub fn ite(p: Term, t: Term, e: Term) -> Self {
        Term::If(Box::new(p), Box::new(t), Box::new(e))
    }

    pub fn pair(a: Term, b: Term) -> Self {
        Term::Pair(Box::new(a), Box::new(b))
    }

    pub fn let_pair(x: impl Into<String>, y: impl Into<String>, m: Term, n: Term) -> Self {
        Term::LetPair(VarName::new(x), VarName::new(y), Box::new(m), Box::new(n))
    }

    /// True exactly for the value grammar
    /// `x | λx.M | 0 | 1 | meas | new | U | * | ⟨V,W⟩`.
    pub fn is_value(&self) -> bool {
        match self {
            Term::Var(_)
            | Term::Lambda(..)
            | Term::Bit(_)
            | Term::Meas
            | Term::New
            | Term::Gate(_)
            | Term::Star => true,
            Term::Pair(a, b) => a.is_value() && b.is_value(),
            Term::App(..) | Term::If(..) | Term::LetPair(..) => false,
        }
    }

    /// The set of free variables.
    pub fn free_vars(&self) -> BTreeSet<VarName> {
        fn go(t: &Term, bound: &mut Vec<VarName>, out: &mut BTreeSet<VarName>) {
            match t {
                Term::Var(x) => {
                    if !bound.contains(x) {
                        out.insert(x.clone());
                    }
                }
                Term::App(a, b) | Term::Pair(a, b) => {
                    go(a, bound, out);
                    go(b, bound, out);
                }
                Term::Lambda(x, body) => {
                    bound.push(x.clone());
                    go(body, bound, out);
                    bound.pop();
                }
                Term::If(p, m, n) => {
                    go(p, bound, out);
                    go(m, bound, out);
                    go(n, bound, out);
                }
                Term::LetPair(x, y, m, n) => {
                    go(m, bound, out);
                    bound.push(x.clone());
                    bound.push(y.clone());
                    go(n, bound, out);
                    bound.pop();
                    bound.pop();
                }
                _ => {}
            }
        }
        let mut out = BTreeSet::new();
        go(self, &mut Vec::new(), &mut out);
        out
    }

    /// Capture-avoiding substitution of a single variable.
    pub fn substitute(&self, x: &VarName, v: &Term) -> Term {
        self.substitute_many(&[(x.clone(), v.clone())])
    }

    /// Simultaneous capture-avoiding substitution.
    pub fn substitute_many(&self, subs: &[(VarName, Term)]) -> Term {
        fn go(t: &Term, subs: &[(VarName, Term)]) -> Term {
            match t {
                Term::Var(x) => match subs.iter().find(|(y, _)| y == x) {
                    Some((_, v)) => v.clone(),
                    None => t.clone(),
                },
                Term::App(a, b) => Term::app(go(a, subs), go(b, subs)),
                Term::Pair(a, b) => Term::pair(go(a, subs), go(b, subs)),
                Term::If(p, m, n) => Term::ite(go(p, subs), go(m, subs), go(n, subs)),
                Term::Lambda(y, body) => {
                    let (binders, body) = rebind(std::slice::from_ref(y), body, subs);
                    Term::Lambda(binders[0].clone(), Box::new(body))
                }
                Term::LetPair(x1, x2, m, n) => {
                    let m = go(m, subs);
                    let (binders, n) = rebind(&[x1.clone(), x2.clone()], n, subs);
                    Term::LetPair(binders[0].clone(), binders[1].clone(), Box::new(m), Box::new(n))
                }
                _ => t.clone(),
            }
        }

        // Restricts `subs` to variables actually free under the binders,
        // renaming binders that would capture a free variable of a
        // substituted value.
        fn rebind(binders: &[VarName], body: &Term, subs: &[(VarName, Term)]) -> (Vec<VarName>, Term) {
            let body_fv = body.free_vars();
            let active: Vec<(VarName, Term)> = subs
                .iter()
                .filter(|(x, _)| !binders.contains(x) && body_fv.contains(x))
                .cloned()
                .collect();
            if active.is_empty() {
                return (binders.to_vec(), body.clone());
            }
            let mut avoid: BTreeSet<VarName> = body_fv;
            for (x, v) in &active {
                avoid.insert(x.clone());
                avoid.extend(v.free_vars());
            }
            let mut new_binders = Vec::new();
            let mut renames: Vec<(VarName, Term)> = Vec::new();
            for b in binders {
                let clash = active.iter().any(|(_, v)| v.free_vars().contains(b));
                let fresh = if clash || new_binders.contains(b) {
                    let f = fresh_var(b.as_str(), &avoid);
                    renames.push((b.clone(), Term::Var(f.clone())));
                    f
                } else {
                    b.clone()
                };
                avoid.insert(fresh.clone());
                new_binders.push(fresh);
            }
            let body = if renames.is_empty() { body.clone() } else { go(body, &renames) };
            (new_binders, go(&body, &active))
        }

        go(self, subs)
    }

    /// Renames binders so that every binder is distinct from every other
    /// binder and from every free variable.
    pub fn barendregt(&self) -> Term {
        self.barendregt_with(&BTreeSet::new())
    }

    /// [`barendregt`](Term::barendregt), additionally avoiding `extra`
    /// (typically the domain of a typing context).
    pub fn barendregt_with(&self, extra: &BTreeSet<VarName>) -> Term {
        fn go(t: &Term, used: &mut BTreeSet<VarName>) -> Term {
            match t {
                Term::Lambda(x, body) => {
                    let (x, body) = freshen(x, body, used);
                    Term::Lambda(x, Box::new(go(&body, used)))
                }
                Term::LetPair(x, y, m, n) => {
                    let m = go(m, used);
                    let (x, n) = freshen(x, n, used);
                    let (y, n) = freshen(y, &n, used);
                    Term::LetPair(x, y, Box::new(m), Box::new(go(&n, used)))
                }
                Term::App(a, b) => Term::app(go(a, used), go(b, used)),
                Term::Pair(a, b) => Term::pair(go(a, used), go(b, used)),
                Term::If(p, m, n) => Term::ite(go(p, used), go(m, used), go(n, used)),
                _ => t.clone(),
            }
        }
        fn freshen(x: &VarName, body: &Term, used: &mut BTreeSet<VarName>) -> (VarName, Term) {
            if used.contains(x) {
                let f = fresh_var(x.as_str(), used);
                used.insert(f.clone());
                (f.clone(), body.substitute(x, &Term::Var(f)))
            } else {
                used.insert(x.clone());
                (x.clone(), body.clone())
            }
        }
        let mut used = self.free_vars();
        used.extend(extra.iter().cloned());
        go(self, &mut used)
    }

    /// Deterministically renames all binders (preorder, `v0`, `v1`, …) so
    /// that alpha-equivalent terms print identically. Used for stable
    /// output ordering and distribution keys.
    pub fn canonical(&self) -> Term {
        fn go(t: &Term, avoid: &BTreeSet<VarName>, next: &mut usize) -> Term {
            match t {
                Term::Lambda(x, body) => {
                    let f = next_name(avoid, next);
                    let body = body.substitute(x, &Term::Var(f.clone()));
                    Term::Lambda(f, Box::new(go(&body, avoid, next)))
                }
                Term::LetPair(x, y, m, n) => {
                    let m = go(m, avoid, next);
                    let fx = next_name(avoid, next);
                    let fy = next_name(avoid, next);
                    let n = n.substitute_many(&[
                        (x.clone(), Term::Var(fx.clone())),
                        (y.clone(), Term::Var(fy.clone())),
                    ]);
                    Term::LetPair(fx, fy, Box::new(m), Box::new(go(&n, avoid, next)))
                }
                Term::App(a, b) => Term::app(go(a, avoid, next), go(b, avoid, next)),
                Term::Pair(a, b) => Term::pair(go(a, avoid, next), go(b, avoid, next)),
                Term::If(p, m, n) => {
                    Term::ite(go(p, avoid, next), go(m, avoid, next), go(n, avoid, next))
                }
                _ => t.clone(),
            }
        }
        fn next_name(avoid: &BTreeSet<VarName>, next: &mut usize) -> VarName {
            loop {
                let cand = VarName::new(format!("v{}", *next));
                *next += 1;
                if !avoid.contains(&cand) {
                    return cand;
                }
            }
        }
        let avoid = self.free_vars();
        go(self, &avoid, &mut 0)
    }

    /// Renders the term with minimal parenthesization; inverse of
    /// [`parse`](crate::syntax::parse) up to alpha-equivalence.
    pub fn pretty(&self) -> String {
        self.to_string()
    }
}

/// A variable distinct from everything in `avoid`, never in the reserved
/// register family.
pub fn fresh_var(base: &str, avoid: &BTreeSet<VarName>) -> VarName {
    let stem: String = base.chars().take_while(|c| !c.is_ascii_digit()).collect();
    let stem = if stem.is_empty() || stem == "p" || !stem.starts_with(|c: char| c.is_ascii_alphabetic() || c == '_')
    {
        "v".to_string()
    } else {
        stem
    };
    for i in 1.. {
        let cand = VarName::new(format!("{stem}{i}"));
        if !cand.is_reserved() && !avoid.contains(&cand) {
            return cand;
        }
    }
    unreachable!()
}

// --- Alpha-equivalence, and a `Hash` that agrees with it -------------------

fn alpha_eq<'a>(a: &'a Term, b: &'a Term, sa: &mut Vec<&'a str>, sb: &mut Vec<&'a str>) -> bool {
    match (a, b) {
        (Term::Var(x), Term::Var(y)) => {
            let ia = sa.iter().rposition(|n| *n == x.as_str());
            let ib = sb.iter().rposition(|n| *n == y.as_str());
            match (ia, ib) {
                (Some(i), Some(j)) => i == j,
                (None, None) => x == y,
                _ => false,
            }
        }
        (Term::App(f1, a1), Term::App(f2, a2)) => {
            alpha_eq(f1, f2, sa, sb) && alpha_eq(a1, a2, sa, sb)
        }
        (Term::Pair(f1, a1), Term::Pair(f2, a2)) => {
            alpha_eq(f1, f2, sa, sb) && alpha_eq(a1, a2, sa, sb)
        }
        (Term::Lambda(x, m), Term::Lambda(y, n)) => {
            sa.push(x.as_str());
            sb.push(y.as_str());
            let r = alpha_eq(m, n, sa, sb);
            sa.pop();
            sb.pop();
            r
        }
        (Term::If(p1, m1, n1), Term::If(p2, m2, n2)) => {
            alpha_eq(p1, p2, sa, sb) && alpha_eq(m1, m2, sa, sb) && alpha_eq(n1, n2, sa, sb)
        }
        (Term::LetPair(x1, y1, m1, n1), Term::LetPair(x2, y2, m2, n2)) => {
            if !alpha_eq(m1, m2, sa, sb) {
                return false;
            }
            sa.push(x1.as_str());
            sa.push(y1.as_str());
            sb.push(x2.as_str());
            sb.push(y2.as_str());
            let r = alpha_eq(n1, n2, sa, sb);
            sa.truncate(sa.len() - 2);
            sb.truncate(sb.len() - 2);
            r
        }
        (Term::Bit(x), Term::Bit(y)) => x == y,
        (Term::Meas, Term::Meas) | (Term::New, Term::New) | (Term::Star, Term::Star) => true,
        (Term::Gate(g), Term::Gate(h)) => g == h,
        _ => false,
    }
}

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        alpha_eq(self, other, &mut Vec::new(), &mut Vec::new())
    }
}

impl Eq for Term {}

impl Hash for Term {
    fn hash<H: Hasher>(&self, state: &mut H) {
        fn go<'a, H: Hasher>(t: &'a Term, scope: &mut Vec<&'a str>, state: &mut H) {
            match t {
                Term::Var(x) => match scope.iter().rposition(|n| *n == x.as_str()) {
                    Some(i) => {
                        state.write_u8(0);
                        state.write_usize(i);
                    }
                    None => {
                        state.write_u8(1);
                        x.as_str().hash(state);
                    }
                },
                Term::App(a, b) => {
                    state.write_u8(2);
                    go(a, scope, state);
                    go(b, scope, state);
                }
                Term::Lambda(x, m) => {
                    state.write_u8(3);
                    scope.push(x.as_str());
                    go(m, scope, state);
                    scope.pop();
                }
                Term::If(p, m, n) => {
                    state.write_u8(4);
                    go(p, scope, state);
                    go(m, scope, state);
                    go(n, scope, state);
                }
                Term::Bit(b) => {
                    state.write_u8(if *b { 6 } else { 5 });
                }
                Term::Meas => state.write_u8(7),
                Term::New => state.write_u8(8),
                Term::Gate(g) => {
                    state.write_u8(9);
                    g.hash(state);
                }
                Term::Star => state.write_u8(10),
                Term::Pair(a, b) => {
                    state.write_u8(11);
                    go(a, scope, state);
                    go(b, scope, state);
                }
                Term::LetPair(x, y, m, n) => {
                    state.write_u8(12);
                    go(m, scope, state);
                    scope.push(x.as_str());
                    scope.push(y.as_str());
                    go(n, scope, state);
                    scope.pop();
                    scope.pop();
                }
            }
        }
        go(self, &mut Vec::new(), state)
    }
}

// --- Printing ---------------------------------------------------------------

// Levels: 0 = any term, 1 = function position, 2 = argument/atom position.
fn fmt_term(t: &Term, f: &mut fmt::Formatter<'_>, level: u8) -> fmt::Result {
    let own = match t {
        Term::Lambda(..) | Term::If(..) | Term::LetPair(..) => 0,
        Term::App(..) => 1,
        _ => 2,
    };
    if own < level {
        write!(f, "(")?;
    }
    match t {
        Term::Var(x) => write!(f, "{x}")?,
        Term::Bit(b) => write!(f, "{}", if *b { 1 } else { 0 })?,
        Term::Meas => write!(f, "meas")?,
        Term::New => write!(f, "new")?,
        Term::Gate(g) => write!(f, "{g}")?,
        Term::Star => write!(f, "*")?,
        Term::App(a, b) => {
            fmt_term(a, f, 1)?;
            write!(f, " ")?;
            fmt_term(b, f, 2)?;
        }
        Term::Lambda(x, m) => {
            write!(f, "\\{x}.")?;
            fmt_term(m, f, 0)?;
        }
        Term::If(p, m, n) => {
            write!(f, "if ")?;
            fmt_term(p, f, 0)?;
            write!(f, " then ")?;
            fmt_term(m, f, 0)?;
            write!(f, " else ")?;
            fmt_term(n, f, 0)?;
        }
        Term::Pair(a, b) => {
            write!(f, "<")?;
            fmt_term(a, f, 0)?;
            write!(f, ", ")?;
            fmt_term(b, f, 0)?;
            write!(f, ">")?;
        }
        Term::LetPair(x, y, m, n) => {
            write!(f, "let <{x}, {y}> = ")?;
            fmt_term(m, f, 0)?;
            write!(f, " in ")?;
            fmt_term(n, f, 0)?;
        }
    }
    if own < level {
        write!(f, ")")?;
    }
    Ok(())
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_term(self, f, 0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(s: &str) -> Term {
        Term::var(s)
    }

    #[test]
    fn alpha_equality_basics() {
        assert_eq!(Term::lam("x", v("x")), Term::lam("y", v("y")));
        assert_ne!(Term::lam("x", v("y")), Term::lam("y", v("y")));
        assert_eq!(
            Term::let_pair("a", "b", Term::Star, Term::pair(v("a"), v("b"))),
            Term::let_pair("c", "d", Term::Star, Term::pair(v("c"), v("d"))),
        );
        // Free variables are compared by name.
        assert_ne!(v("x"), v("y"));
    }

    #[test]
    fn free_vars_examples() {
        assert!(Term::lam("x", v("x")).free_vars().is_empty());
        let fv = Term::lam("y", v("x")).free_vars();
        assert_eq!(fv.into_iter().collect::<Vec<_>>(), vec![VarName::new("x")]);

        // Teleportation-shaped body with EPR/BellMeasure/U free.
        let body = Term::let_pair(
            "x",
            "y",
            Term::app(v("EPR"), Term::Star),
            Term::pair(
                Term::app(v("BellMeasure"), v("x")),
                Term::app(v("U"), v("y")),
            ),
        );
        let fv: Vec<String> = body.free_vars().into_iter().map(|x| x.to_string()).collect();
        assert_eq!(fv, vec!["BellMeasure", "EPR", "U"]);
    }

    #[test]
    fn substitution_examples() {
        let x = VarName::new("x");
        assert_eq!(v("x").substitute(&x, &Term::Bit(false)), Term::Bit(false));
        assert_eq!(
            Term::pair(v("x"), v("z")).substitute(&x, &Term::Meas),
            Term::pair(Term::Meas, v("z"))
        );
        // Capture avoidance: λy.x [y/x] must rename the binder.
        let t = Term::lam("y", v("x")).substitute(&x, &v("y"));
        match &t {
            Term::Lambda(b, body) => {
                assert_ne!(b.as_str(), "y");
                assert_eq!(**body, v("y"));
            }
            _ => panic!("expected lambda"),
        }
        assert_eq!(t, Term::lam("z", v("y")));
    }

    #[test]
    fn substitution_composition() {
        // m[v/x][w/y] == m[w/y][v[w/y]/x] when x ∉ FV(w), x ≠ y.
        let m = Term::app(v("x"), Term::lam("z", Term::pair(v("y"), v("x"))));
        let x = VarName::new("x");
        let y = VarName::new("y");
        let val = Term::lam("a", Term::app(v("a"), v("y")));
        let w = Term::Bit(true);
        let lhs = m.substitute(&x, &val).substitute(&y, &w);
        let rhs = m.substitute(&y, &w).substitute(&x, &val.substitute(&y, &w));
        assert_eq!(lhs, rhs);
    }

    #[test]
    fn value_recognition() {
        assert!(Term::pair(Term::Bit(false), Term::lam("x", v("x"))).is_value());
        assert!(!Term::app(Term::New, Term::Bit(false)).is_value());
        assert!(!Term::let_pair("x", "y", Term::pair(Term::Bit(false), Term::Bit(true)), v("x"))
            .is_value());
        assert!(v("p0").is_value());
    }

    #[test]
    fn register_names() {
        assert_eq!(VarName::register(3).as_str(), "p3");
        assert_eq!(VarName::new("p12").register_index(), Some(12));
        assert_eq!(VarName::new("px").register_index(), None);
        assert_eq!(VarName::new("plus").register_index(), None);
        assert!(!fresh_var("p", &BTreeSet::new()).is_reserved());
    }

    #[test]
    fn pretty_examples() {
        assert_eq!(Term::lam("x", v("x")).pretty(), "\\x.x");
        assert_eq!(
            Term::app(Term::app(v("f"), v("a")), v("b")).pretty(),
            "f a b"
        );
        assert_eq!(
            Term::app(v("f"), Term::app(v("a"), v("b"))).pretty(),
            "f (a b)"
        );
        assert_eq!(
            Term::ite(Term::Bit(true), Term::Bit(false), Term::Bit(true)).pretty(),
            "if 1 then 0 else 1"
        );
        assert_eq!(
            Term::app(Term::lam("x", v("x")), Term::Bit(false)).pretty(),
            "(\\x.x) 0"
        );
    }

    #[test]
    fn canonical_renames_binders_deterministically() {
        let a = Term::lam("x", Term::lam("y", Term::app(v("x"), v("y"))));
        let b = Term::lam("q", Term::lam("r", Term::app(v("q"), v("r"))));
        assert_eq!(a.canonical().pretty(), b.canonical().pretty());
        assert_eq!(a.canonical().pretty(), "\\v0.\\v1.v0 v1");
    }
}
