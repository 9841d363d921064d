//! Lowering of canonical expressions into a hash-consed graph of machine-level
//! operations, and the op-count cost model defined on it.
//!
//! Canonical forms have no subtraction or division; lowering recovers them:
//! terms with a negative coefficient become subtractions and factors with a
//! negative exponent become divisors. `b^-2` lowers to `1 / b^2`, so it shares
//! the `b^2` node with any positive occurrence.

use std::collections::HashMap;

use super::node::{Expr, FnKind, Kind};
use super::number::Number;
use crate::error::Error;

pub type NodeId = u32;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Op {
    /// Read of an input slot.
    Input(u32),
    /// Literal, stored as `f64` bits.
    Const(u64),
    /// Sum; each term carries a subtract flag.
    Add(Box<[(NodeId, bool)]>),
    Neg(NodeId),
    /// `num[0] * num[1] * ... / (den[0] * den[1] * ...)`; empty `num` is 1.
    Mul { num: Box<[NodeId]>, den: Box<[NodeId]> },
    PowI(NodeId, i32),
    PowF(NodeId, NodeId),
    Call(FnKind, Box<[NodeId]>),
}

impl Op {
    /// Operation count of this node alone.
    pub fn cost(&self) -> usize {
        match self {
            Op::Input(_) | Op::Const(_) => 0,
            Op::Add(terms) => {
                let all_negative = terms.iter().all(|&(_, neg)| neg);
                terms.len() - 1 + usize::from(all_negative)
            }
            Op::Neg(_) | Op::PowI(..) | Op::PowF(..) | Op::Call(..) => 1,
            Op::Mul { num, den } if num.is_empty() => den.len(),
            Op::Mul { num, den } => num.len() - 1 + den.len(),
        }
    }

    pub fn children(&self) -> Vec<NodeId> {
        match self {
            Op::Input(_) | Op::Const(_) => vec![],
            Op::Add(terms) => terms.iter().map(|&(id, _)| id).collect(),
            Op::Neg(a) | Op::PowI(a, _) => vec![*a],
            Op::PowF(a, b) => vec![*a, *b],
            Op::Mul { num, den } => num.iter().chain(den.iter()).copied().collect(),
            Op::Call(_, args) => args.to_vec(),
        }
    }
}

/// Hash-consed operation DAG. Node ids are assigned in creation order, which
/// is a topological order.
#[derive(Default, Debug, Clone)]
pub struct OpGraph {
    nodes: Vec<Op>,
    index: HashMap<Op, NodeId>,
    memo: HashMap<Expr, NodeId>,
    signed: HashMap<Expr, (NodeId, bool)>,
}

impl OpGraph {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn nodes(&self) -> &[Op] {
        &self.nodes
    }

    pub fn op(&self, id: NodeId) -> &Op {
        &self.nodes[id as usize]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, op: Op) -> NodeId {
        if let Some(&id) = self.index.get(&op) {
            return id;
        }
        let id = self.nodes.len() as NodeId;
        self.nodes.push(op.clone());
        self.index.insert(op, id);
        id
    }

    pub(crate) fn constant(&mut self, v: f64) -> NodeId {
        self.push(Op::Const(v.to_bits()))
    }

    /// Lowers `e`. `resolve` maps each symbol to a leaf: an `Input` slot, or
    /// a `Const` for symbols bound at compile time.
    pub fn lower<F>(&mut self, e: &Expr, resolve: &mut F) -> Result<NodeId, Error>
    where
        F: FnMut(&str) -> Result<Op, Error>,
    {
        if let Some(&id) = self.memo.get(e) {
            return Ok(id);
        }
        let id = match e.kind() {
            Kind::Symbol(name) => {
                let leaf = resolve(name)?;
                debug_assert!(matches!(leaf, Op::Input(_) | Op::Const(_)));
                self.push(leaf)
            }
            Kind::Number(n) => self.constant(n.to_f64()),
            Kind::Add(_) => {
                let (id, negative) = self.lower_sum(e, resolve)?;
                if negative {
                    self.push(Op::Neg(id))
                } else {
                    id
                }
            }
            Kind::Mul(_) => {
                let (id, negative) = self.lower_mul_magnitude(e, resolve)?;
                if negative {
                    self.push(Op::Neg(id))
                } else {
                    id
                }
            }
            Kind::Pow(base, exp) => match exp.as_number() {
                Some(n) => {
                    let (id, negative) = if n.is_negative() {
                        let (d, negative) = self.lower_positive_power(base, n.neg(), resolve)?;
                        let id = self.push(Op::Mul {
                            num: Box::new([]),
                            den: Box::new([d]),
                        });
                        (id, negative)
                    } else {
                        self.lower_positive_power(base, n, resolve)?
                    };
                    if negative {
                        self.push(Op::Neg(id))
                    } else {
                        id
                    }
                }
                None => {
                    let b = self.lower(base, resolve)?;
                    let x = self.lower(exp, resolve)?;
                    self.push(Op::PowF(b, x))
                }
            },
            Kind::Call(f, args) => {
                let mut ids = Vec::with_capacity(args.len());
                for a in args.iter() {
                    ids.push(self.lower(a, resolve)?);
                }
                self.push(Op::Call(*f, ids.into()))
            }
        };
        self.memo.insert(e.clone(), id);
        Ok(id)
    }

    fn lower_signed<F>(&mut self, e: &Expr, resolve: &mut F) -> Result<(NodeId, bool), Error>
    where
        F: FnMut(&str) -> Result<Op, Error>,
    {
        match e.kind() {
            Kind::Number(n) if n.is_negative() => Ok((self.constant(n.abs().to_f64()), true)),
            Kind::Mul(_) => self.lower_mul_magnitude(e, resolve),
            Kind::Add(_) => self.lower_sum(e, resolve),
            _ => Ok((self.lower(e, resolve)?, false)),
        }
    }

    fn sum_terms<F>(&mut self, e: &Expr, resolve: &mut F) -> Result<Vec<(NodeId, bool)>, Error>
    where
        F: FnMut(&str) -> Result<Op, Error>,
    {
        let children = e.kind().args();
        let mut terms = Vec::with_capacity(children.len());
        for c in children.iter() {
            terms.push(self.lower_signed(c, resolve)?);
        }
        terms.sort_by_key(|&(id, _)| id);
        Ok(terms)
    }

    /// A sum up to sign. Terms are sorted by node id and the leading term is
    /// made positive, so `a - b` and `b - a` share one node.
    fn lower_sum<F>(&mut self, e: &Expr, resolve: &mut F) -> Result<(NodeId, bool), Error>
    where
        F: FnMut(&str) -> Result<Op, Error>,
    {
        if let Some(&r) = self.signed.get(e) {
            return Ok(r);
        }
        let mut terms = self.sum_terms(e, resolve)?;
        let negative = terms[0].1;
        if negative {
            for t in terms.iter_mut() {
                t.1 = !t.1;
            }
        }
        let r = (self.push(Op::Add(terms.into())), negative);
        self.signed.insert(e.clone(), r);
        Ok(r)
    }

    /// Rewrites `-(sum)` as the sum with flipped signs wherever the inner sum
    /// has no other use among the nodes reachable from `roots`, saving the
    /// negation.
    pub fn fold_negated_sums(&mut self, roots: &[NodeId]) {
        let reachable = self.reachable(roots);
        let mut refs = vec![0usize; self.nodes.len()];
        for id in (0..self.nodes.len()).filter(|&i| reachable[i]) {
            for c in self.nodes[id].children() {
                refs[c as usize] += 1;
            }
        }
        for &r in roots {
            refs[r as usize] += 1;
        }
        for id in (0..self.nodes.len()).filter(|&i| reachable[i]) {
            let Op::Neg(inner) = self.nodes[id] else { continue };
            let Op::Add(terms) = &self.nodes[inner as usize] else { continue };
            if refs[inner as usize] != 1 {
                continue;
            }
            let flipped = Op::Add(terms.iter().map(|&(t, neg)| (t, !neg)).collect());
            let old = std::mem::replace(&mut self.nodes[id], flipped.clone());
            self.index.remove(&old);
            self.index.entry(flipped).or_insert(id as NodeId);
        }
    }

    fn reachable(&self, roots: &[NodeId]) -> Vec<bool> {
        let mut seen = vec![false; self.nodes.len()];
        let mut stack: Vec<NodeId> = roots.to_vec();
        while let Some(id) = stack.pop() {
            if !std::mem::replace(&mut seen[id as usize], true) {
                stack.extend(self.op(id).children());
            }
        }
        seen
    }

    fn lower_mul_magnitude<F>(&mut self, e: &Expr, resolve: &mut F) -> Result<(NodeId, bool), Error>
    where
        F: FnMut(&str) -> Result<Op, Error>,
    {
        let children = e.kind().args();
        let (coeff, factors) = match children[0].as_number() {
            Some(c) => (c, &children[1..]),
            None => (Number::ONE, children),
        };
        let mut num = Vec::new();
        let mut den = Vec::new();
        let mut negative = coeff.is_negative();
        if !coeff.abs().is_one() {
            num.push(self.constant(coeff.abs().to_f64()));
        }
        for f in factors {
            let neg = match f.kind() {
                Kind::Pow(base, exp) if exp.as_number().is_some_and(Number::is_negative) => {
                    let n = exp.as_number().unwrap().neg();
                    let (id, neg) = self.lower_positive_power(base, n, resolve)?;
                    den.push(id);
                    neg
                }
                Kind::Pow(base, exp) if exp.as_number().is_some() => {
                    let (id, neg) = self.lower_positive_power(base, exp.as_number().unwrap(), resolve)?;
                    num.push(id);
                    neg
                }
                _ => {
                    let (id, neg) = self.lower_signed(f, resolve)?;
                    num.push(id);
                    neg
                }
            };
            negative ^= neg;
        }
        num.sort_unstable();
        den.sort_unstable();
        let id = if den.is_empty() && num.len() == 1 {
            num[0]
        } else {
            self.push(Op::Mul {
                num: num.into(),
                den: den.into(),
            })
        };
        Ok((id, negative))
    }

    /// `base^exp` for `exp > 0`, up to sign: an even power drops the sign of
    /// a sum base, an odd one passes it through.
    fn lower_positive_power<F>(&mut self, base: &Expr, exp: Number, resolve: &mut F) -> Result<(NodeId, bool), Error>
    where
        F: FnMut(&str) -> Result<Op, Error>,
    {
        let (b, neg) = match (base.kind(), exp.as_integer()) {
            (Kind::Add(_), Some(_)) => self.lower_sum(base, resolve)?,
            _ => (self.lower(base, resolve)?, false),
        };
        Ok(match exp.as_integer() {
            Some(1) => (b, neg),
            Some(k) => (self.push(Op::PowI(b, k as i32)), neg && k % 2 != 0),
            None => {
                let x = self.constant(exp.to_f64());
                (self.push(Op::PowF(b, x)), false)
            }
        })
    }

    /// Sum of node costs over the distinct nodes reachable from `roots`.
    pub fn dag_cost(&self, roots: &[NodeId]) -> usize {
        let reachable = self.reachable(roots);
        self.nodes
            .iter()
            .zip(reachable)
            .filter(|(_, r)| *r)
            .map(|(op, _)| op.cost())
            .sum()
    }

    /// Per-occurrence cost: shared nodes are counted once per reference.
    pub fn tree_cost(&self, roots: &[NodeId]) -> u64 {
        let mut cost = vec![0u64; self.nodes.len()];
        for (i, op) in self.nodes.iter().enumerate() {
            cost[i] = op
                .children()
                .iter()
                .fold(op.cost() as u64, |acc, &c| acc.saturating_add(cost[c as usize]));
        }
        roots.iter().fold(0u64, |acc, &r| acc.saturating_add(cost[r as usize]))
    }
}

/// How shared subexpressions are counted by [`count_ops`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CountMode {
    /// Once per occurrence in the expression tree.
    Tree,
    /// Once per distinct node, as in a CSE'd program.
    Dag,
}

/// Arithmetic and function operation count.
///
/// An n-term sum costs n-1 (a negated term is a subtraction), an n-factor
/// product costs n-1 (a divisor is a division, a coefficient of -1 is free
/// inside a sum), powers and function calls cost 1, leaves cost 0.
pub fn count_ops(e: &Expr, mode: CountMode) -> u64 {
    count_ops_many(std::slice::from_ref(e), mode)
}

pub fn count_ops_many(exprs: &[Expr], mode: CountMode) -> u64 {
    let mut graph = OpGraph::new();
    let mut slots: HashMap<String, u32> = HashMap::new();
    let mut resolve = |name: &str| -> Result<Op, Error> {
        let n = slots.len() as u32;
        Ok(Op::Input(*slots.entry(name.to_string()).or_insert(n)))
    };
    let roots: Vec<NodeId> = exprs
        .iter()
        .map(|e| graph.lower(e, &mut resolve).expect("symbol resolution is infallible"))
        .collect();
    graph.fold_negated_sums(&roots);
    match mode {
        CountMode::Tree => graph.tree_cost(&roots),
        CountMode::Dag => graph.dag_cost(&roots) as u64,
    }
}
