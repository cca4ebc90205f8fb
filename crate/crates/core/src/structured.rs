//! Scope analysis and the fast paths for decomposable circuits: completion to a
//! network polynomial by smoothing, and the Fourier transform by rewriting leaves.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::circuit::{Circuit, CircuitBuilder, CircuitError, Node, NodeId, ScopeSet, Semantics, VarRef};
use crate::rational::Rational;

/// A node breaking decomposability or smoothness, with one variable index to show it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Violation {
    pub node: NodeId,
    pub index: u32,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "node {}, variable x{}", self.node, self.index)
    }
}

/// Every product has children with pairwise disjoint scopes.
pub fn check_decomposable(c: &Circuit) -> Result<(), Violation> {
    for id in c.ids() {
        if let Node::Product(factors) = c.node(id) {
            let mut seen = ScopeSet::empty();
            for f in factors {
                if let Some(index) = seen.first_common(c.scope(*f)) {
                    return Err(Violation { node: id, index });
                }
                seen.union_with(c.scope(*f));
            }
        }
    }
    Ok(())
}

/// Every sum has children with the same scope.
pub fn check_smooth(c: &Circuit) -> Result<(), Violation> {
    smooth_violation(c, false)
}

/// Smoothness where a constant-valued child (empty scope) of a sum counts as scoped by
/// that sum.
pub fn check_smooth_scoped_constants(c: &Circuit) -> Result<(), Violation> {
    smooth_violation(c, true)
}

fn smooth_violation(c: &Circuit, exempt_constants: bool) -> Result<(), Violation> {
    for id in c.ids() {
        if let Node::Sum(terms) = c.node(id) {
            let scope = c.scope(id);
            for (_, child) in terms {
                let cs = c.scope(*child);
                if exempt_constants && cs.is_empty() {
                    continue;
                }
                if let Some(index) = scope.difference(cs).iter().next() {
                    return Err(Violation { node: id, index });
                }
            }
        }
    }
    Ok(())
}

pub fn is_decomposable(c: &Circuit) -> bool {
    check_decomposable(c).is_ok()
}

pub fn is_smooth(c: &Circuit) -> bool {
    check_smooth(c).is_ok()
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum StructuredError {
    #[error("not decomposable at {0}")]
    NotDecomposable(Violation),
    #[error("not smooth at {0}")]
    NotSmooth(Violation),
    #[error("variable x{missing} is missing from the root scope")]
    IncompleteScope { missing: u32 },
    #[error("{found} circuits are not accepted here")]
    SemanticsMismatch { found: Semantics },
    #[error("input contains division nodes")]
    HasDivisions,
    #[error(transparent)]
    Circuit(#[from] CircuitError),
}

/// The factor used to fill a missing variable `i` when completing a circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Completion {
    /// `x_i + ~x_i`, for likelihood and Fourier circuits.
    IndicatorPair,
    /// `~x_i`, for generating and +-1 likelihood circuits.
    BarOnly,
}

impl Completion {
    /// The completion that applies to `s`, and the tag it produces.
    pub fn for_semantics(s: Semantics) -> Option<(Completion, Semantics)> {
        match s {
            Semantics::Likelihood => Some((Completion::IndicatorPair, Semantics::Network)),
            Semantics::Fourier => Some((Completion::IndicatorPair, Semantics::FourierIndicator)),
            Semantics::Generating => Some((Completion::BarOnly, Semantics::Network)),
            Semantics::LikelihoodPm => Some((Completion::BarOnly, Semantics::FourierIndicator)),
            _ => None,
        }
    }
}

fn check_input(c: &Circuit) -> Result<(), StructuredError> {
    if c.has_divisions() {
        return Err(StructuredError::HasDivisions);
    }
    check_decomposable(c).map_err(StructuredError::NotDecomposable)
}

/// Multiplies `node` by `gadget(i)` for every `i` in `gap`; returns `node` itself when
/// the gap is empty.
fn fill_gap(
    b: &mut CircuitBuilder,
    node: NodeId,
    gap: &ScopeSet,
    gadget: &mut impl FnMut(&mut CircuitBuilder, u32) -> NodeId,
) -> NodeId {
    if gap.is_empty() {
        return node;
    }
    let mut factors = vec![node];
    for i in gap.iter() {
        factors.push(gadget(b, i));
    }
    b.product(factors)
}

/// Turns a decomposable circuit into a smooth one whose root scope is `{1..n}`, by
/// multiplying each sum child by the completion factor of every variable it misses.
///
/// Each node over scope `S` then computes the homogenized form of its polynomial
/// (`prod_{i in S} (x_i + ~x_i) q(x / (x + ~x))`, or `prod ~x_i q(x / ~x)`), which for a
/// likelihood or generating input is the network polynomial. Variable leaves are left
/// alone because their homogenized form is themselves.
pub fn smooth_complete(c: &Circuit, completion: Completion) -> Result<Circuit, StructuredError> {
    let target = match Completion::for_semantics(c.semantics()) {
        Some((expected, target)) if expected == completion => target,
        _ => return Err(StructuredError::SemanticsMismatch { found: c.semantics() }),
    };
    check_input(c)?;
    let mut b = CircuitBuilder::new(c.n());
    let mut gadget = |b: &mut CircuitBuilder, i: u32| {
        let bar = b.var(VarRef::bar(i));
        match completion {
            Completion::BarOnly => bar,
            Completion::IndicatorPair => {
                let plain = b.var(VarRef::plain(i));
                b.sum(vec![(Rational::one(), plain), (Rational::one(), bar)])
            }
        }
    };
    let mut map: Vec<NodeId> = Vec::with_capacity(c.node_count());
    for id in c.ids() {
        let node = match c.node(id) {
            Node::Sum(terms) => {
                let scope = c.scope(id);
                let terms = terms
                    .iter()
                    .map(|(w, child)| {
                        let gap = scope.difference(c.scope(*child));
                        (w.clone(), fill_gap(&mut b, map[child.index()], &gap, &mut gadget))
                    })
                    .collect();
                b.sum(terms)
            }
            other => b.push(other.map_children(|ch| map[ch.index()])),
        };
        map.push(node);
    }
    let gap = ScopeSet::full(c.n()).difference(c.scope(c.root()));
    let root = fill_gap(&mut b, map[c.root().index()], &gap, &mut gadget);
    Ok(b.finish(root, target)?)
}

/// Makes a likelihood circuit smooth in the scoped-constants sense, with root scope
/// `{1..n}`, by multiplying gap children by `U_i = x_i + (1 - x_i)`, a sum computing 1
/// whose children both have scope `{i}` once the constant is scoped.
pub fn smooth_for_fourier(c: &Circuit) -> Result<Circuit, StructuredError> {
    if c.semantics() != Semantics::Likelihood {
        return Err(StructuredError::SemanticsMismatch { found: c.semantics() });
    }
    check_input(c)?;
    let mut b = CircuitBuilder::new(c.n());
    let mut unit = |b: &mut CircuitBuilder, i: u32| {
        let x = b.var(VarRef::plain(i));
        let one = b.one();
        let flip = b.sum(vec![(Rational::one(), one), (-Rational::one(), x)]);
        b.sum(vec![(Rational::one(), x), (Rational::one(), flip)])
    };
    let mut map: Vec<NodeId> = Vec::with_capacity(c.node_count());
    for id in c.ids() {
        let node = match c.node(id) {
            Node::Sum(terms) => {
                let scope = c.scope(id);
                let terms = terms
                    .iter()
                    .map(|(w, child)| {
                        let cs = c.scope(*child);
                        let new = map[child.index()];
                        if cs.is_empty() {
                            return (w.clone(), new);
                        }
                        (w.clone(), fill_gap(&mut b, new, &scope.difference(cs), &mut unit))
                    })
                    .collect();
                b.sum(terms)
            }
            other => b.push(other.map_children(|ch| map[ch.index()])),
        };
        map.push(node);
    }
    let gap = ScopeSet::full(c.n()).difference(c.scope(c.root()));
    let root = fill_gap(&mut b, map[c.root().index()], &gap, &mut unit);
    Ok(b.finish(root, Semantics::Likelihood)?)
}

/// The Fourier circuit of a decomposable likelihood circuit, obtained by rewriting leaves.
///
/// Each node over scope `S` is mapped to `2^-|S| sum_v q(v) (-1)^<v, x>`, so disjoint
/// products multiply and equal-scope sums add. At the leaves: `x_i` becomes
/// `(1 - 2 x_i) / 2`, and a constant-valued child `k` of a sum over `S` becomes
/// `k prod_{i in S} (1 - x_i)`. When that child is a constant subcircuit rather than a
/// constant node, the factor is pushed down to its leaves (into every term of a sum, into
/// the first factor of a product) so no node changes arity. Constants are rewritten per
/// sum scope, since one constant node may sit under sums of different scopes; constants
/// under products stay as they are.
///
/// Requires decomposability, smoothness with scoped constants, and root scope `{1..n}`;
/// [`smooth_for_fourier`] establishes the last two.
pub fn fourier_leaves(c: &Circuit) -> Result<Circuit, StructuredError> {
    if c.semantics() != Semantics::Likelihood {
        return Err(StructuredError::SemanticsMismatch { found: c.semantics() });
    }
    check_input(c)?;
    check_smooth_scoped_constants(c).map_err(StructuredError::NotSmooth)?;
    let root_scope = c.scope(c.root());
    let constant_root = root_scope.is_empty();
    if !constant_root {
        if let Some(missing) = ScopeSet::full(c.n()).difference(root_scope).iter().next() {
            return Err(StructuredError::IncompleteScope { missing });
        }
    }
    let mut b = CircuitBuilder::new(c.n());
    let half = Rational::new(1, 2);
    let mut flip = |b: &mut CircuitBuilder, i: u32| {
        let x = b.var(VarRef::plain(i));
        b.affine(Rational::one(), -Rational::one(), x)
    };
    let mut map: Vec<NodeId> = Vec::with_capacity(c.node_count());
    let mut scaled = ScaledConstants::default();
    for id in c.ids() {
        let node = match c.node(id) {
            Node::Var(var) => {
                let x = b.var(*var);
                b.affine(half.clone(), -Rational::one(), x)
            }
            Node::Sum(terms) => {
                let scope = c.scope(id);
                let terms = terms
                    .iter()
                    .map(|(w, child)| {
                        if !c.scope(*child).is_empty() || scope.is_empty() {
                            return (w.clone(), map[child.index()]);
                        }
                        match c.node(*child) {
                            Node::Const(k) => (w * k, flip_product(&mut b, scope, &mut flip)),
                            _ => (w.clone(), scaled.get(c, &mut b, &map, *child, scope, &mut flip)),
                        }
                    })
                    .collect();
                b.sum(terms)
            }
            other => b.push(other.map_children(|ch| map[ch.index()])),
        };
        map.push(node);
    }
    let mut root = map[c.root().index()];
    if constant_root && c.n() > 0 {
        root = scaled.get(c, &mut b, &map, c.root(), &ScopeSet::full(c.n()), &mut flip);
    }
    Ok(b.finish(root, Semantics::Fourier)?)
}

fn flip_product(
    b: &mut CircuitBuilder,
    scope: &ScopeSet,
    flip: &mut impl FnMut(&mut CircuitBuilder, u32) -> NodeId,
) -> NodeId {
    let factors: Vec<NodeId> = scope.iter().map(|i| flip(b, i)).collect();
    if factors.len() == 1 {
        factors[0]
    } else {
        b.product(factors)
    }
}

/// Copies of constant subcircuits multiplied by `prod_{i in S} (1 - x_i)`, one per
/// (node, S).
#[derive(Default)]
struct ScaledConstants(hashbrown::HashMap<(NodeId, ScopeSet), NodeId>);

impl ScaledConstants {
    fn get(
        &mut self,
        c: &Circuit,
        b: &mut CircuitBuilder,
        map: &[NodeId],
        id: NodeId,
        scope: &ScopeSet,
        flip: &mut impl FnMut(&mut CircuitBuilder, u32) -> NodeId,
    ) -> NodeId {
        if let Some(done) = self.0.get(&(id, scope.clone())) {
            return *done;
        }
        let out = match c.node(id) {
            Node::Const(k) => {
                let f = flip_product(b, scope, flip);
                if k.is_one() {
                    f
                } else {
                    b.sum(vec![(k.clone(), f)])
                }
            }
            Node::Sum(terms) => {
                let terms = terms.iter().map(|(w, ch)| (w.clone(), self.get(c, b, map, *ch, scope, flip))).collect();
                b.sum(terms)
            }
            Node::Product(factors) => {
                let mut new: Vec<NodeId> = factors.iter().map(|ch| map[ch.index()]).collect();
                new[0] = self.get(c, b, map, factors[0], scope, flip);
                b.product(new)
            }
            Node::Var(_) | Node::Div(..) => {
                unreachable!("constant subcircuits are division-free and have no variables")
            }
        };
        self.0.insert((id, scope.clone()), out);
        out
    }
}

/// Whether `b` has the sum/product skeleton of `a`: a parallel walk from the roots that
/// matches node kinds, arities and (for sums) child order, letting every leaf of `a`
/// correspond to an arbitrary subcircuit of `b`. Nodes of `a` with a nonempty scope must
/// map to a single node of `b`; leaves and other constant subcircuits may map to a
/// different one on each path, since they can be rewritten per edge.
pub fn skeleton_matches(a: &Circuit, b: &Circuit) -> bool {
    let mut seen: hashbrown::HashMap<NodeId, NodeId> = hashbrown::HashMap::new();
    let mut pairs: hashbrown::HashSet<(NodeId, NodeId)> = hashbrown::HashSet::new();
    let mut stack = vec![(a.root(), b.root())];
    while let Some((x, y)) = stack.pop() {
        if a.node(x).is_leaf() {
            continue;
        }
        if a.scope(x).is_empty() {
            if !pairs.insert((x, y)) {
                continue;
            }
        } else if let Some(prev) = seen.insert(x, y) {
            if prev != y {
                return false;
            }
            continue;
        }
        match (a.node(x), b.node(y)) {
            (Node::Sum(s), Node::Sum(t)) if s.len() == t.len() => {
                stack.extend(s.iter().zip(t).map(|((_, p), (_, q))| (*p, *q)));
            }
            (Node::Product(s), Node::Product(t)) if s.len() == t.len() => {
                stack.extend(s.iter().copied().zip(t.iter().copied()));
            }
            (Node::Div(p, q), Node::Div(r, s)) => stack.extend([(*p, *r), (*q, *s)]),
            _ => return false,
        }
    }
    true
}
