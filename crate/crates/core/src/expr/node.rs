use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;
use std::hash::{BuildHasherDefault, Hash, Hasher};
use std::sync::{Arc, LazyLock, Mutex};

use super::number::Number;

/// Elementary functions available as `Call` nodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FnKind {
    Sin,
    Cos,
    Tan,
    Sqrt,
    Abs,
    Sign,
    Min,
    Max,
    Atan2,
}

impl FnKind {
    pub const ALL: [FnKind; 9] = [
        FnKind::Sin,
        FnKind::Cos,
        FnKind::Tan,
        FnKind::Sqrt,
        FnKind::Abs,
        FnKind::Sign,
        FnKind::Min,
        FnKind::Max,
        FnKind::Atan2,
    ];

    pub fn arity(self) -> usize {
        match self {
            FnKind::Min | FnKind::Max | FnKind::Atan2 => 2,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FnKind::Sin => "sin",
            FnKind::Cos => "cos",
            FnKind::Tan => "tan",
            FnKind::Sqrt => "sqrt",
            FnKind::Abs => "abs",
            FnKind::Sign => "sign",
            FnKind::Min => "min",
            FnKind::Max => "max",
            FnKind::Atan2 => "atan2",
        }
    }
}

/// Node payload. Children of `Add`/`Mul` are flattened and sorted, with a
/// leading `Number` coefficient when it is not the identity.
#[derive(Debug)]
pub enum Kind {
    Symbol(Arc<str>),
    Number(Number),
    Add(Box<[Expr]>),
    Mul(Box<[Expr]>),
    Pow(Expr, Expr),
    Call(FnKind, Box<[Expr]>),
}

impl Kind {
    fn rank(&self) -> u8 {
        match self {
            Kind::Number(_) => 0,
            Kind::Symbol(_) => 1,
            Kind::Call(..) => 2,
            Kind::Pow(..) => 3,
            Kind::Mul(_) => 4,
            Kind::Add(_) => 5,
        }
    }

    /// Children of n-ary nodes (`Add`, `Mul`, `Call`); empty otherwise.
    pub fn args(&self) -> &[Expr] {
        match self {
            Kind::Add(c) | Kind::Mul(c) | Kind::Call(_, c) => c,
            _ => &[],
        }
    }

    /// Shallow equality: children compared by identity.
    fn shallow_eq(&self, other: &Kind) -> bool {
        match (self, other) {
            (Kind::Symbol(a), Kind::Symbol(b)) => a == b,
            (Kind::Number(a), Kind::Number(b)) => a == b,
            (Kind::Add(a), Kind::Add(b)) | (Kind::Mul(a), Kind::Mul(b)) => a[..] == b[..],
            (Kind::Pow(a, b), Kind::Pow(c, d)) => a == c && b == d,
            (Kind::Call(f, a), Kind::Call(g, b)) => f == g && a[..] == b[..],
            _ => false,
        }
    }

    fn structural_hash(&self) -> u64 {
        let mut h = Mix::new(u64::from(self.rank()));
        match self {
            Kind::Symbol(name) => {
                for b in name.bytes() {
                    h.push(u64::from(b));
                }
            }
            Kind::Number(n) => {
                let (tag, a, b) = n.key();
                h.push(u64::from(tag));
                h.push(a as u64);
                h.push(b as u64);
            }
            Kind::Add(c) | Kind::Mul(c) => c.iter().for_each(|e| h.push(e.structural_hash())),
            Kind::Pow(b, e) => {
                h.push(b.structural_hash());
                h.push(e.structural_hash());
            }
            Kind::Call(f, c) => {
                h.push(*f as u64);
                c.iter().for_each(|e| h.push(e.structural_hash()));
            }
        }
        h.finish()
    }
}

struct Mix(u64);

impl Mix {
    fn new(seed: u64) -> Self {
        Mix(seed ^ 0x9e37_79b9_7f4a_7c15)
    }

    fn push(&mut self, v: u64) {
        self.0 = (self.0.rotate_left(5) ^ v).wrapping_mul(0x517c_c1b7_2722_0a95);
    }

    fn finish(&self) -> u64 {
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
}

#[derive(Debug)]
pub struct Node {
    kind: Kind,
    hash: u64,
}

/// Handle to an interned, immutable expression node.
///
/// Structurally equal expressions share one allocation, so `==` is a pointer
/// comparison. Interned nodes live for the rest of the process.
#[derive(Clone)]
pub struct Expr(Arc<Node>);

#[derive(Default)]
struct PassThrough(u64);

impl Hasher for PassThrough {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, _: &[u8]) {
        unreachable!("interner keys hash through write_u64")
    }

    fn write_u64(&mut self, v: u64) {
        self.0 = v;
    }
}

struct InternKey(Expr);

impl Hash for InternKey {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0 .0.hash);
    }
}

impl PartialEq for InternKey {
    fn eq(&self, other: &Self) -> bool {
        self.0 .0.hash == other.0 .0.hash && self.0 .0.kind.shallow_eq(&other.0 .0.kind)
    }
}

impl Eq for InternKey {}

type InternTable = HashSet<InternKey, BuildHasherDefault<PassThrough>>;

static INTERNER: LazyLock<Mutex<InternTable>> = LazyLock::new(|| Mutex::new(HashSet::default()));

impl Expr {
    /// Interns a node without canonicalization. Callers are the canonical
    /// constructors in `build`, which guarantee the payload is already in
    /// normal form.
    pub(crate) fn intern(kind: Kind) -> Expr {
        let hash = kind.structural_hash();
        let candidate = InternKey(Expr(Arc::new(Node { kind, hash })));
        let mut table = INTERNER.lock().unwrap_or_else(|e| e.into_inner());
        if let Some(existing) = table.get(&candidate) {
            return existing.0.clone();
        }
        let out = candidate.0.clone();
        table.insert(candidate);
        out
    }

    pub fn kind(&self) -> &Kind {
        &self.0.kind
    }

    /// Deterministic structural hash; stable across runs of one build.
    pub fn structural_hash(&self) -> u64 {
        self.0.hash
    }

    /// Operands in order: `Add`/`Mul`/`Call` children, or `[base, exp]`.
    pub fn operands(&self) -> Vec<Expr> {
        match self.kind() {
            Kind::Pow(b, e) => vec![b.clone(), e.clone()],
            k => k.args().to_vec(),
        }
    }

    pub fn as_number(&self) -> Option<Number> {
        match self.kind() {
            Kind::Number(n) => Some(*n),
            _ => None,
        }
    }

    pub fn as_symbol(&self) -> Option<&str> {
        match self.kind() {
            Kind::Symbol(s) => Some(s),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_number().is_some_and(Number::is_zero)
    }

    pub fn is_one(&self) -> bool {
        self.as_number().is_some_and(Number::is_one)
    }

    pub fn is_number(&self) -> bool {
        matches!(self.kind(), Kind::Number(_))
    }

    /// Splits a term into its numeric coefficient and the remaining factors.
    pub fn split_coefficient(&self) -> (Number, Option<Expr>) {
        match self.kind() {
            Kind::Number(n) => (*n, None),
            Kind::Mul(children) => match children[0].as_number() {
                Some(c) => {
                    let rest = if children.len() == 2 {
                        children[1].clone()
                    } else {
                        Expr::intern(Kind::Mul(children[1..].into()))
                    };
                    (c, Some(rest))
                }
                None => (Number::ONE, Some(self.clone())),
            },
            _ => (Number::ONE, Some(self.clone())),
        }
    }

    /// Canonical total order: numbers, then symbols by name, then compound
    /// nodes by (variant rank, structural hash).
    ///
    /// `Expr` deliberately does not implement `Ord`, which would shadow the
    /// symbolic `min`/`max` methods.
    pub fn canonical_cmp(&self, other: &Expr) -> Ordering {
        if self == other {
            return Ordering::Equal;
        }
        let (a, b) = (self.kind(), other.kind());
        a.rank()
            .cmp(&b.rank())
            .then_with(|| match (a, b) {
                (Kind::Symbol(x), Kind::Symbol(y)) => x.cmp(y),
                (Kind::Number(x), Kind::Number(y)) => x
                    .partial_cmp_value(*y)
                    .unwrap_or(Ordering::Equal)
                    .then_with(|| x.key().cmp(&y.key())),
                _ => self.structural_hash().cmp(&other.structural_hash()).then_with(|| {
                    let (xs, ys) = (self.operands(), other.operands());
                    let fn_order = match (a, b) {
                        (Kind::Call(f, _), Kind::Call(g, _)) => f.cmp(g),
                        _ => Ordering::Equal,
                    };
                    fn_order
                        .then_with(|| xs.len().cmp(&ys.len()))
                        .then_with(|| {
                            xs.iter()
                                .zip(&ys)
                                .map(|(x, y)| x.canonical_cmp(y))
                                .find(|o| o.is_ne())
                                .unwrap_or(Ordering::Equal)
                        })
                }),
            })
    }
}

impl PartialEq for Expr {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.0, &other.0)
    }
}

impl Eq for Expr {}

impl Hash for Expr {
    fn hash<H: Hasher>(&self, state: &mut H) {
        state.write_u64(self.0.hash);
    }
}

impl fmt::Debug for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Expr({self})")
    }
}
