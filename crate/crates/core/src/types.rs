//! The linear type language and its pure algebra: subtyping, equivalence,
//! skeletons, lifting and decoration.
//!
//! Types are stored bang-normalized: a [`QType`] is an explicit count of
//! outer `!` marks applied to a head that is itself never an exponential, so
//! `!!A` and `!(!A)` are the same value. Structural equality is equality of
//! normalized forms; the coarser relation induced by mutual subtyping is
//! [`type_equiv`].

use std::fmt;

use crate::syntax::Term;

/// Base type constants. `bit` and `qbit` are built in; the constant
/// alphabet stays open for extension.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TypeConst {
    Bit,
    Qbit,
    Named(String),
}

impl fmt::Display for TypeConst {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeConst::Bit => write!(f, "bit"),
            TypeConst::Qbit => write!(f, "qbit"),
            TypeConst::Named(n) => write!(f, "{n}"),
        }
    }
}

/// A linear type `!ⁿ(head)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QType {
    bangs: u32,
    head: QHead,
}

/// Type heads; never an exponential (those live in [`QType::bangs`]).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum QHead {
    Const(TypeConst),
    Var(String),
    Arrow(Box<QType>, Box<QType>),
    Tensor(Box<QType>, Box<QType>),
    Top,
}

impl QType {
    pub fn constant(c: TypeConst) -> Self {
        QType { bangs: 0, head: QHead::Const(c) }
    }

    pub fn bit() -> Self {
        Self::constant(TypeConst::Bit)
    }

    pub fn qbit() -> Self {
        Self::constant(TypeConst::Qbit)
    }

    pub fn var(name: impl Into<String>) -> Self {
        QType { bangs: 0, head: QHead::Var(name.into()) }
    }

    pub fn arrow(from: QType, to: QType) -> Self {
        QType { bangs: 0, head: QHead::Arrow(Box::new(from), Box::new(to)) }
    }

    pub fn tensor(left: QType, right: QType) -> Self {
        QType { bangs: 0, head: QHead::Tensor(Box::new(left), Box::new(right)) }
    }

    pub fn top() -> Self {
        QType { bangs: 0, head: QHead::Top }
    }

    /// `!self`. Normalized: only the count grows.
    pub fn bang(self) -> Self {
        QType { bangs: self.bangs + 1, head: self.head }
    }

    /// `!ⁿ self`.
    pub fn banged(self, n: u32) -> Self {
        QType { bangs: self.bangs + n, head: self.head }
    }

    /// Removes one outer `!`, if any.
    pub fn unbang(&self) -> Option<QType> {
        if self.bangs == 0 {
            None
        } else {
            Some(QType { bangs: self.bangs - 1, head: self.head.clone() })
        }
    }

    pub fn bangs(&self) -> u32 {
        self.bangs
    }

    pub fn head(&self) -> &QHead {
        &self.head
    }

    pub fn is_banged(&self) -> bool {
        self.bangs > 0
    }

    /// The same head with no outer exponentials.
    pub fn bare(&self) -> QType {
        QType { bangs: 0, head: self.head.clone() }
    }

    /// Collapses every bang count in the type to at most one, the form used
    /// by decoration search.
    pub fn single_banged(&self) -> QType {
        let head = match &self.head {
            QHead::Arrow(a, b) => {
                QHead::Arrow(Box::new(a.single_banged()), Box::new(b.single_banged()))
            }
            QHead::Tensor(a, b) => {
                QHead::Tensor(Box::new(a.single_banged()), Box::new(b.single_banged()))
            }
            h => h.clone(),
        };
        QType { bangs: self.bangs.min(1), head }
    }

    /// Right-nested `qbit ⊗ … ⊗ qbit` with `k` factors (`k ≥ 1`).
    pub fn qbit_power(k: usize) -> QType {
        assert!(k >= 1, "gate arity must be at least 1");
        let mut ty = QType::qbit();
        for _ in 1..k {
            ty = QType::tensor(QType::qbit(), ty);
        }
        ty
    }
}

/// The subtyping relation `<:`, decided on the reversible normalized rule
/// set: heads must match structurally, arrows are contravariant on the left
/// and covariant on the right, tensors are componentwise, and at every node
/// the bang counts `!ⁿ… <: !ᵐ…` must satisfy `(m = 0) ∨ (n ≥ 1)`.
pub fn subtype(a: &QType, b: &QType) -> bool {
    if b.bangs >= 1 && a.bangs == 0 {
        return false;
    }
    match (&a.head, &b.head) {
        (QHead::Const(c), QHead::Const(d)) => c == d,
        (QHead::Var(x), QHead::Var(y)) => x == y,
        (QHead::Top, QHead::Top) => true,
        (QHead::Arrow(a1, b1), QHead::Arrow(a2, b2)) => subtype(a2, a1) && subtype(b1, b2),
        (QHead::Tensor(a1, b1), QHead::Tensor(a2, b2)) => subtype(a1, a2) && subtype(b1, b2),
        _ => false,
    }
}

/// Mutual subtyping. Coarser than structural equality: all positive bang
/// counts collapse (`!!bit ≐ !bit`), while `!bit ≠ bit`.
pub fn type_equiv(a: &QType, b: &QType) -> bool {
    subtype(a, b) && subtype(b, a)
}

/// An intuitionistic type: the exponential-free image of the type language.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum IType {
    Const(TypeConst),
    Var(String),
    Arrow(Box<IType>, Box<IType>),
    Product(Box<IType>, Box<IType>),
    Top,
}

impl IType {
    pub fn bit() -> Self {
        IType::Const(TypeConst::Bit)
    }

    pub fn qbit() -> Self {
        IType::Const(TypeConst::Qbit)
    }

    pub fn arrow(from: IType, to: IType) -> Self {
        IType::Arrow(Box::new(from), Box::new(to))
    }

    pub fn product(left: IType, right: IType) -> Self {
        IType::Product(Box::new(left), Box::new(right))
    }
}

/// The type skeleton: erases every exponential, homomorphically.
pub fn skeleton(a: &QType) -> IType {
    match &a.head {
        QHead::Const(c) => IType::Const(c.clone()),
        QHead::Var(x) => IType::Var(x.clone()),
        QHead::Arrow(l, r) => IType::arrow(skeleton(l), skeleton(r)),
        QHead::Tensor(l, r) => IType::product(skeleton(l), skeleton(r)),
        QHead::Top => IType::Top,
    }
}

/// Lifts an intuitionistic type to the bang-free linear type with the same
/// shape, so `skeleton(lift(u)) = u`.
pub fn lift(u: &IType) -> QType {
    match u {
        IType::Const(c) => QType::constant(c.clone()),
        IType::Var(x) => QType::var(x.clone()),
        IType::Arrow(l, r) => QType::arrow(lift(l), lift(r)),
        IType::Product(l, r) => QType::tensor(lift(l), lift(r)),
        IType::Top => QType::top(),
    }
}

/// The decoration of `u` along `a`: copies the outer bangs of `a`, recurses
/// through matching arrow and product heads, and falls back to [`lift`] on
/// any head mismatch.
pub fn decorate(u: &IType, a: &QType) -> QType {
    let inner = match (u, &a.head) {
        (IType::Arrow(u1, u2), QHead::Arrow(a1, a2)) => {
            QType::arrow(decorate(u1, a1), decorate(u2, a2))
        }
        (IType::Product(u1, u2), QHead::Tensor(a1, a2)) => {
            QType::tensor(decorate(u1, a1), decorate(u2, a2))
        }
        _ => lift(u),
    };
    inner.banged(a.bangs)
}

/// The fixed type `A_c` of a constant term, or `None` for non-constants.
/// Unary gates take a plain `qbit`; an `n`-ary gate takes the right-nested
/// `n`-fold tensor of `qbit`.
pub fn constant_type(term: &Term) -> Option<QType> {
    match term {
        Term::Bit(_) => Some(QType::bit().bang()),
        Term::New => Some(QType::arrow(QType::bit(), QType::qbit()).bang()),
        Term::Meas => Some(QType::arrow(QType::qbit(), QType::bit().bang()).bang()),
        Term::Gate(g) => {
            let reg = QType::qbit_power(g.arity);
            Some(QType::arrow(reg.clone(), reg).bang())
        }
        _ => None,
    }
}

// ---------------------------------------------------------------------------
// Concrete syntax
// ---------------------------------------------------------------------------

// Precedence levels for printing: arrow (lowest, right-assoc), tensor
// (right-assoc), bang, atom.
fn fmt_qtype(t: &QType, f: &mut fmt::Formatter<'_>, level: u8) -> fmt::Result {
    let own = if t.bangs > 0 {
        2
    } else {
        match &t.head {
            QHead::Arrow(..) => 0,
            QHead::Tensor(..) => 1,
            _ => 3,
        }
    };
    if own < level {
        write!(f, "(")?;
    }
    for _ in 0..t.bangs {
        write!(f, "!")?;
    }
    match &t.head {
        QHead::Const(c) => write!(f, "{c}")?,
        QHead::Var(x) => write!(f, "{x}")?,
        QHead::Top => write!(f, "T")?,
        QHead::Arrow(a, b) => {
            if t.bangs > 0 {
                write!(f, "(")?;
            }
            fmt_qtype(a, f, 1)?;
            write!(f, " -o ")?;
            fmt_qtype(b, f, 0)?;
            if t.bangs > 0 {
                write!(f, ")")?;
            }
        }
        QHead::Tensor(a, b) => {
            if t.bangs > 0 {
                write!(f, "(")?;
            }
            fmt_qtype(a, f, 2)?;
            write!(f, " (*) ")?;
            fmt_qtype(b, f, 1)?;
            if t.bangs > 0 {
                write!(f, ")")?;
            }
        }
    }
    if own < level {
        write!(f, ")")?;
    }
    Ok(())
}

impl fmt::Display for QType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt_qtype(self, f, 0)
    }
}

impl fmt::Display for IType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn go(t: &IType, f: &mut fmt::Formatter<'_>, level: u8) -> fmt::Result {
            let own = match t {
                IType::Arrow(..) => 0,
                IType::Product(..) => 1,
                _ => 2,
            };
            if own < level {
                write!(f, "(")?;
            }
            match t {
                IType::Const(c) => write!(f, "{c}")?,
                IType::Var(x) => write!(f, "{x}")?,
                IType::Top => write!(f, "T")?,
                IType::Arrow(a, b) => {
                    go(a, f, 1)?;
                    write!(f, " -> ")?;
                    go(b, f, 0)?;
                }
                IType::Product(a, b) => {
                    go(a, f, 2)?;
                    write!(f, " (*) ")?;
                    go(b, f, 1)?;
                }
            }
            if own < level {
                write!(f, ")")?;
            }
            Ok(())
        }
        go(self, f, 0)
    }
}

/// Parses the type concrete syntax: `bit`, `qbit`, `T`, `!A`, `A -o B`
/// (right-associative), `A (*) B` (right-associative, binds tighter than
/// `-o`), parentheses. Uppercase-initial identifiers other than `T` are type
/// variables; lowercase-initial identifiers are type constants.
pub fn parse_qtype(src: &str) -> Result<QType, String> {
    let tokens = lex_type(src)?;
    let mut p = TypeParser { tokens, pos: 0 };
    let ty = p.arrow_ty()?;
    if p.pos != p.tokens.len() {
        return Err(format!("unexpected trailing `{}` in type", p.tokens[p.pos]));
    }
    Ok(ty)
}

#[derive(Debug, Clone, PartialEq)]
enum TypeTok {
    Ident(String),
    Bang,
    ArrowOp,
    TensorOp,
    LParen,
    RParen,
}

impl fmt::Display for TypeTok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TypeTok::Ident(s) => write!(f, "{s}"),
            TypeTok::Bang => write!(f, "!"),
            TypeTok::ArrowOp => write!(f, "-o"),
            TypeTok::TensorOp => write!(f, "(*)"),
            TypeTok::LParen => write!(f, "("),
            TypeTok::RParen => write!(f, ")"),
        }
    }
}

fn lex_type(src: &str) -> Result<Vec<TypeTok>, String> {
    let bytes: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        match c {
            ' ' | '\t' | '\n' | '\r' => i += 1,
            '!' => {
                out.push(TypeTok::Bang);
                i += 1;
            }
            '(' => {
                if bytes.get(i + 1) == Some(&'*') && bytes.get(i + 2) == Some(&')') {
                    out.push(TypeTok::TensorOp);
                    i += 3;
                } else {
                    out.push(TypeTok::LParen);
                    i += 1;
                }
            }
            ')' => {
                out.push(TypeTok::RParen);
                i += 1;
            }
            '-' => {
                if bytes.get(i + 1) == Some(&'o') {
                    out.push(TypeTok::ArrowOp);
                    i += 2;
                } else {
                    return Err("expected `-o`".to_string());
                }
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let start = i;
                while i < bytes.len() && (bytes[i].is_ascii_alphanumeric() || bytes[i] == '_') {
                    i += 1;
                }
                out.push(TypeTok::Ident(bytes[start..i].iter().collect()));
            }
            other => return Err(format!("unexpected character `{other}` in type")),
        }
    }
    Ok(out)
}

struct TypeParser {
    tokens: Vec<TypeTok>,
    pos: usize,
}

impl TypeParser {
    fn peek(&self) -> Option<&TypeTok> {
        self.tokens.get(self.pos)
    }

    fn arrow_ty(&mut self) -> Result<QType, String> {
        let left = self.tensor_ty()?;
        if self.peek() == Some(&TypeTok::ArrowOp) {
            self.pos += 1;
            let right = self.arrow_ty()?;
            Ok(QType::arrow(left, right))
        } else {
            Ok(left)
        }
    }

    fn tensor_ty(&mut self) -> Result<QType, String> {
        let left = self.bang_ty()?;
        if self.peek() == Some(&TypeTok::TensorOp) {
            self.pos += 1;
            let right = self.tensor_ty()?;
            Ok(QType::tensor(left, right))
        } else {
            Ok(left)
        }
    }

    fn bang_ty(&mut self) -> Result<QType, String> {
        let mut bangs = 0;
        while self.peek() == Some(&TypeTok::Bang) {
            self.pos += 1;
            bangs += 1;
        }
        let atom = self.atom_ty()?;
        Ok(atom.banged(bangs))
    }

    fn atom_ty(&mut self) -> Result<QType, String> {
        match self.tokens.get(self.pos).cloned() {
            Some(TypeTok::Ident(name)) => {
                self.pos += 1;
                Ok(match name.as_str() {
                    "bit" => QType::bit(),
                    "qbit" => QType::qbit(),
                    "T" => QType::top(),
                    _ if name.starts_with(|c: char| c.is_ascii_uppercase()) => QType::var(name),
                    _ => QType::constant(TypeConst::Named(name)),
                })
            }
            Some(TypeTok::LParen) => {
                self.pos += 1;
                let ty = self.arrow_ty()?;
                if self.peek() != Some(&TypeTok::RParen) {
                    return Err("missing `)` in type".to_string());
                }
                self.pos += 1;
                Ok(ty)
            }
            Some(tok) => Err(format!("unexpected `{tok}` in type")),
            None => Err("unexpected end of type".to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bq() -> QType {
        QType::arrow(QType::bit(), QType::qbit())
    }

    #[test]
    fn bang_normalization() {
        assert_eq!(QType::bit().bang().bang(), QType::bit().banged(2));
        assert_ne!(QType::bit().bang(), QType::bit());
    }

    #[test]
    fn subtype_dereliction_and_bit() {
        // !A <: A, never A <: !A for bang-free A.
        for a in [QType::bit(), bq(), QType::tensor(QType::qbit(), QType::top())] {
            assert!(subtype(&a.clone().bang(), &a));
            assert!(!subtype(&a, &a.clone().bang()));
        }
    }

    #[test]
    fn subtype_contravariant_argument() {
        // !(bit -o qbit) <: !(!bit -o qbit): the second is less general.
        let general = bq().bang();
        let special = QType::arrow(QType::bit().bang(), QType::qbit()).bang();
        assert!(subtype(&general, &special));
        assert!(!subtype(&special, &general));
    }

    #[test]
    fn equiv_collapses_positive_bang_counts() {
        assert!(type_equiv(&QType::bit().banged(2), &QType::bit().bang()));
        assert!(!type_equiv(&QType::bit().bang(), &QType::bit()));
        assert!(type_equiv(&bq(), &bq()));
    }

    #[test]
    fn skeleton_erases_exponentials() {
        assert_eq!(skeleton(&bq().bang()), IType::arrow(IType::bit(), IType::qbit()));
        assert_eq!(skeleton(&QType::var("X").banged(2)), IType::Var("X".into()));
        let t = QType::tensor(QType::bit().bang(), QType::qbit());
        assert_eq!(
            skeleton(&t),
            IType::product(IType::bit(), IType::qbit())
        );
    }

    #[test]
    fn lift_is_right_inverse_of_skeleton() {
        let u = IType::arrow(
            IType::product(IType::Var("X".into()), IType::Var("Y".into())),
            IType::Var("X".into()),
        );
        assert_eq!(lift(&u), {
            QType::arrow(
                QType::tensor(QType::var("X"), QType::var("Y")),
                QType::var("X"),
            )
        });
        assert_eq!(skeleton(&lift(&u)), u);
        assert_eq!(lift(&IType::Top), QType::top());
    }

    #[test]
    fn decorate_clauses() {
        // Identical structure: copied verbatim.
        let u = IType::arrow(IType::bit(), IType::qbit());
        assert_eq!(decorate(&u, &bq().bang()), bq().bang());
        // Bangs copied, then head mismatch falls back to lift.
        let x = IType::Var("X".into());
        let a = QType::arrow(QType::var("A"), QType::var("B")).bang();
        assert_eq!(decorate(&x, &a), QType::var("X").bang());
        // Skeleton-matching decoration restores the original type.
        let a = QType::arrow(QType::bit().bang(), QType::tensor(QType::qbit(), QType::top()))
            .banged(1);
        assert_eq!(decorate(&skeleton(&a), &a), a);
    }

    #[test]
    fn display_and_parse_round_trip() {
        let cases = [
            "bit",
            "!bit",
            "!!qbit",
            "qbit -o bit (*) bit",
            "(qbit -o bit (*) bit) (*) (bit (*) bit -o qbit)",
            "!(bit -o qbit)",
            "!(!bit -o qbit) -o T",
            "X -o Y -o X (*) Y",
            "qbit (*) qbit (*) qbit",
        ];
        for src in cases {
            let ty = parse_qtype(src).unwrap();
            let printed = ty.to_string();
            let again = parse_qtype(&printed).unwrap();
            assert_eq!(ty, again, "round trip failed for `{src}` -> `{printed}`");
        }
        // Fixed associativity/precedence facts.
        let t = parse_qtype("qbit -o bit (*) bit").unwrap();
        assert_eq!(
            t,
            QType::arrow(QType::qbit(), QType::tensor(QType::bit(), QType::bit()))
        );
        let t = parse_qtype("bit (*) bit -o qbit").unwrap();
        assert_eq!(
            t,
            QType::arrow(QType::tensor(QType::bit(), QType::bit()), QType::qbit())
        );
        assert_eq!(parse_qtype("A -o B -o C").unwrap(), {
            QType::arrow(QType::var("A"), QType::arrow(QType::var("B"), QType::var("C")))
        });
    }

    #[test]
    fn qbit_power_is_right_nested() {
        assert_eq!(QType::qbit_power(1), QType::qbit());
        assert_eq!(
            QType::qbit_power(3),
            QType::tensor(QType::qbit(), QType::tensor(QType::qbit(), QType::qbit()))
        );
    }
}
