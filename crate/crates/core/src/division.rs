//! Division elimination: the starred edges 1, 4, 7 and 10.
//!
//! The single-polarity input is rewritten with division gadgets at the leaves, which
//! yields the two-polarity polynomial as a rational function. All divisions are moved to
//! one division `A / B` at the top, the inputs are translated so that `B` has a nonzero
//! constant term, and the quotient is expanded as a truncated geometric series over
//! homogeneous parts. The result uses only sums and products.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuit::{Circuit, CircuitBuilder, Node, NodeId, Point, Semantics, VarRef};
use crate::rational::Rational;
use crate::transform::{Edge, TransformError};

/// How variable leaves are replaced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GadgetKind {
    /// `x_i := x_i / (x_i + ~x_i)`, root times `prod (x_i + ~x_i)`. Edges 4 and 10.
    EvidenceCompletion,
    /// `x_i := x_i / ~x_i`, root times `prod ~x_i`. Edges 1 and 7.
    CoefficientExtraction,
}

impl GadgetKind {
    /// The tags this kind of gadget applies to.
    pub fn sources(self) -> [Semantics; 2] {
        match self {
            GadgetKind::EvidenceCompletion => [Semantics::Likelihood, Semantics::Fourier],
            GadgetKind::CoefficientExtraction => [Semantics::Generating, Semantics::LikelihoodPm],
        }
    }

    fn for_edge(edge: Edge) -> Option<GadgetKind> {
        match edge.number() {
            4 | 10 => Some(GadgetKind::EvidenceCompletion),
            1 | 7 => Some(GadgetKind::CoefficientExtraction),
            _ => None,
        }
    }

    /// The per-index factor: `x_i + ~x_i` or `~x_i`.
    fn factor(self, b: &mut CircuitBuilder, index: u32) -> NodeId {
        let bar = b.var(VarRef::bar(index));
        match self {
            GadgetKind::EvidenceCompletion => {
                let x = b.var(VarRef::plain(index));
                b.sum(vec![(Rational::one(), x), (Rational::one(), bar)])
            }
            GadgetKind::CoefficientExtraction => bar,
        }
    }
}

/// Offsets added to the inputs, keyed by variable. Missing variables have offset zero.
pub type Shift = BTreeMap<VarRef, Rational>;

/// The shift used by the starred edges: `~x_i := ~x_i + 1`, plain variables unchanged.
/// Both gadget prefactors evaluate to 1 there.
pub fn builtin_shift(n: usize) -> Shift {
    (1..=n as u32).map(|i| (VarRef::bar(i), Rational::one())).collect()
}

fn shift_point(shift: &Shift, n: usize) -> Point {
    let mut point = Point::constant(n, &Rational::zero());
    for (v, offset) in shift {
        let slot = v.index as usize - 1;
        if v.is_bar() {
            point.bar[slot] = offset.clone();
        } else {
            point.plain[slot] = offset.clone();
        }
    }
    point
}

fn product_of(b: &mut CircuitBuilder, factors: Vec<NodeId>) -> NodeId {
    match factors.len() {
        0 => b.one(),
        1 => factors[0],
        _ => b.product(factors),
    }
}

/// Replaces each plain leaf by its division gadget and multiplies the root by the
/// gadget prefactor. The result is a raw circuit with divisions.
pub fn introduce_gadgets(c: &Circuit, kind: GadgetKind) -> Result<Circuit, TransformError> {
    let found = c.semantics();
    if !kind.sources().contains(&found) && found != Semantics::Raw {
        return Err(TransformError::SemanticsMismatch { expected: kind.sources()[0], found });
    }
    if c.has_divisions() {
        return Err(TransformError::HasDivisions);
    }
    if c.has_bar_leaves() {
        return Err(TransformError::HasBarLeaves);
    }
    let mut b = CircuitBuilder::new(c.n());
    let mut map: Vec<NodeId> = Vec::with_capacity(c.node_count());
    for node in c.nodes() {
        let id = match node {
            Node::Var(v) => {
                let x = b.var(*v);
                let den = kind.factor(&mut b, v.index);
                b.div(x, den)
            }
            other => b.push(other.map_children(|ch| map[ch.index()])),
        };
        map.push(id);
    }
    let mut factors = vec![map[c.root().index()]];
    for i in 1..=c.n() as u32 {
        factors.push(kind.factor(&mut b, i));
    }
    let root = product_of(&mut b, factors);
    Ok(b.finish(root, Semantics::Raw)?)
}

/// A rational function `A / B` with `A` and `B` division-free, sharing one node table.
#[derive(Debug, Clone)]
pub struct DivisionSplit {
    host: CircuitBuilder,
    num: NodeId,
    den: NodeId,
}

impl DivisionSplit {
    /// `A`, as a raw circuit.
    pub fn numerator(&self) -> Circuit {
        self.host.finish(self.num, Semantics::Raw).expect("split parts are division-free")
    }

    /// `B`, as a raw circuit.
    pub fn denominator(&self) -> Circuit {
        self.host.finish(self.den, Semantics::Raw).expect("split parts are division-free")
    }

    pub fn n(&self) -> usize {
        self.host.n()
    }

    /// Builds a split from two division-free circuits over the same variables.
    pub fn from_parts(num: &Circuit, den: &Circuit) -> DivisionSplit {
        let n = num.n().max(den.n());
        let mut host = CircuitBuilder::new(n);
        let a = host.import(num)[num.root().index()];
        let b = host.import(den)[den.root().index()];
        DivisionSplit { host, num: a, den: b }
    }
}

/// Denominator of a pulled-up node, as a multiset of factor nodes.
type Factors = BTreeMap<NodeId, u32>;

fn expand_factors(factors: &Factors) -> impl Iterator<Item = NodeId> + '_ {
    factors.iter().flat_map(|(id, m)| core::iter::repeat_n(*id, *m as usize))
}

/// Moves every division to a single one at the root.
///
/// Each node becomes a numerator over a product of denominator factors. Products
/// concatenate the factors; a sum brings its terms over the least common multiple of
/// their factor multisets, so terms that already share a denominator are not multiplied
/// through again.
pub fn pull_up(c: &Circuit) -> DivisionSplit {
    let mut b = CircuitBuilder::new(c.n());
    let mut parts: Vec<(NodeId, Factors)> = Vec::with_capacity(c.node_count());
    for node in c.nodes() {
        let part = match node {
            Node::Var(_) | Node::Const(_) => (b.push(node.clone()), Factors::new()),
            Node::Product(factors) => {
                let mut den = Factors::new();
                let mut nums = Vec::with_capacity(factors.len());
                for f in factors {
                    let (num, fden) = &parts[f.index()];
                    nums.push(*num);
                    for (atom, m) in fden {
                        *den.entry(*atom).or_insert(0) += m;
                    }
                }
                (b.product(nums), den)
            }
            Node::Sum(terms) => {
                let mut lcm = Factors::new();
                for (_, child) in terms {
                    for (atom, m) in &parts[child.index()].1 {
                        let e = lcm.entry(*atom).or_insert(0);
                        *e = (*e).max(*m);
                    }
                }
                let mut new_terms = Vec::with_capacity(terms.len());
                for (w, child) in terms {
                    let (num, cden) = &parts[child.index()];
                    let mut factors = vec![*num];
                    for (atom, m) in &lcm {
                        let have = cden.get(atom).copied().unwrap_or(0);
                        factors.extend(core::iter::repeat_n(*atom, (m - have) as usize));
                    }
                    let term = product_of(&mut b, factors);
                    new_terms.push((w.clone(), term));
                }
                (b.sum(new_terms), lcm)
            }
            Node::Div(top, bottom) => {
                let (tnum, tden) = &parts[top.index()];
                let (bnum, bden) = &parts[bottom.index()];
                let mut factors = vec![*tnum];
                factors.extend(expand_factors(bden));
                let num = product_of(&mut b, factors);
                let mut den = tden.clone();
                *den.entry(*bnum).or_insert(0) += 1;
                (num, den)
            }
        };
        parts.push(part);
    }
    let (num, den) = &parts[c.root().index()];
    let den_factors: Vec<NodeId> = expand_factors(den).collect();
    let den = product_of(&mut b, den_factors);
    DivisionSplit { host: b, num: *num, den }
}

/// Replaces each leaf `v` by `v + offset(v)`.
pub fn translate_inputs(c: &Circuit, offsets: &Shift) -> Circuit {
    let mut b = CircuitBuilder::new(c.n());
    let map = translate_into(&mut b, c, offsets);
    b.finish(map[c.root().index()], c.semantics()).expect("translation keeps the circuit valid")
}

fn translate_into(b: &mut CircuitBuilder, c: &Circuit, offsets: &Shift) -> Vec<NodeId> {
    let mut map: Vec<NodeId> = Vec::with_capacity(c.node_count());
    for node in c.nodes() {
        let id = match node {
            Node::Var(v) => {
                let x = b.var(*v);
                match offsets.get(v) {
                    Some(k) if !k.is_zero() => b.affine(k.clone(), Rational::one(), x),
                    _ => x,
                }
            }
            other => b.push(other.map_children(|ch| map[ch.index()])),
        };
        map.push(id);
    }
    map
}

/// Homogeneous parts `H_0, ..., H_d` of a circuit, sharing one node table.
/// `None` stands for the zero polynomial.
#[derive(Debug, Clone)]
pub struct HomStack {
    host: CircuitBuilder,
    parts: Vec<Option<NodeId>>,
}

impl HomStack {
    pub fn degree_bound(&self) -> usize {
        self.parts.len() - 1
    }

    /// `H_i` as a raw circuit (a zero constant when the part vanishes).
    pub fn part(&self, i: usize) -> Circuit {
        let mut host = self.host.clone();
        let root = match self.parts[i] {
            Some(id) => id,
            None => host.constant(Rational::zero()),
        };
        host.finish(root, Semantics::Raw).expect("parts are division-free")
    }

    /// Total size of the shared table reachable from the parts.
    pub fn size(&self) -> usize {
        let mut host = self.host.clone();
        let live: Vec<(Rational, NodeId)> = self.parts.iter().flatten().map(|p| (Rational::one(), *p)).collect();
        if live.is_empty() {
            return 0;
        }
        let top = host.sum(live.clone());
        host.finish(top, Semantics::Raw).expect("parts are division-free").size() - live.len()
    }
}

/// Splits a division-free circuit into its homogeneous parts of degree at most `d`.
/// Parts above `d` are dropped.
pub fn homogenize(c: &Circuit, d: usize) -> Result<HomStack, TransformError> {
    if c.has_divisions() {
        return Err(TransformError::HasDivisions);
    }
    let mut host = CircuitBuilder::new(c.n());
    let parts = homogenize_into(&mut host, c, d);
    Ok(HomStack { host, parts })
}

fn sum_or_single(b: &mut CircuitBuilder, terms: Vec<(Rational, NodeId)>) -> Option<NodeId> {
    match terms.len() {
        0 => None,
        1 if terms[0].0.is_one() => Some(terms[0].1),
        _ => Some(b.sum(terms)),
    }
}

fn homogenize_into(b: &mut CircuitBuilder, c: &Circuit, d: usize) -> Vec<Option<NodeId>> {
    let mut stacks: Vec<Vec<Option<NodeId>>> = Vec::with_capacity(c.node_count());
    for node in c.nodes() {
        let mut parts: Vec<Option<NodeId>> = vec![None; d + 1];
        match node {
            Node::Var(v) => {
                if d >= 1 {
                    parts[1] = Some(b.var(*v));
                }
            }
            Node::Const(k) => {
                if !k.is_zero() {
                    parts[0] = Some(b.constant(k.clone()));
                }
            }
            Node::Sum(terms) => {
                for (i, slot) in parts.iter_mut().enumerate() {
                    let live: Vec<(Rational, NodeId)> = terms
                        .iter()
                        .filter(|(w, _)| !w.is_zero())
                        .filter_map(|(w, ch)| stacks[ch.index()][i].map(|p| (w.clone(), p)))
                        .collect();
                    *slot = sum_or_single(b, live);
                }
            }
            Node::Product(factors) => {
                let mut acc = stacks[factors[0].index()].clone();
                for f in &factors[1..] {
                    let g = &stacks[f.index()];
                    let mut next = vec![None; d + 1];
                    for (i, slot) in next.iter_mut().enumerate() {
                        let mut terms = Vec::new();
                        for j in 0..=i {
                            if let (Some(x), Some(y)) = (acc[j], g[i - j]) {
                                terms.push((Rational::one(), b.product(vec![x, y])));
                            }
                        }
                        *slot = sum_or_single(b, terms);
                    }
                    acc = next;
                }
                parts = acc;
            }
            Node::Div(..) => unreachable!("callers reject divisions"),
        }
        stacks.push(parts);
    }
    stacks.swap_remove(c.root().index())
}

fn join_parts(b: &mut CircuitBuilder, parts: &[Option<NodeId>]) -> NodeId {
    let live: Vec<(Rational, NodeId)> = parts.iter().flatten().map(|p| (Rational::one(), *p)).collect();
    sum_or_single(b, live).unwrap_or_else(|| b.constant(Rational::zero()))
}

/// Homogeneous parts `Q_0..Q_d` of `A(y + s) / B(y + s)` computed from the series
/// `Q = A~ / beta + R Q`, `R = 1 - B~ / beta`, where `beta = B(s)` and `R` has no
/// constant term, so `Q_i` depends only on `Q_0..Q_{i-1}`.
fn quotient_parts(
    b: &mut CircuitBuilder,
    split: &DivisionSplit,
    d: usize,
    shift: &Shift,
) -> Result<Vec<Option<NodeId>>, TransformError> {
    let n = split.n();
    let num = split.numerator();
    let den = split.denominator();
    let beta = den.evaluate(&shift_point(shift, n)).expect("division-free circuits evaluate");
    let inv = beta.recip().ok_or(TransformError::SingularShift)?;
    let a_parts = homogenize_into(b, &translate_inputs(&num, shift), d);
    let b_parts = homogenize_into(b, &translate_inputs(&den, shift), d);
    let mut q: Vec<Option<NodeId>> = Vec::with_capacity(d + 1);
    for i in 0..=d {
        let mut terms = Vec::new();
        if let Some(a) = a_parts[i] {
            terms.push((inv.clone(), a));
        }
        for k in 1..=i {
            if let (Some(bk), Some(qk)) = (b_parts[k], q[i - k]) {
                let prod = b.product(vec![bk, qk]);
                terms.push((-&inv, prod));
            }
        }
        q.push(sum_or_single(b, terms));
    }
    Ok(q)
}

/// The division-free polynomial `A / B`, assuming it is a polynomial of degree at most
/// `target_degree` and `B` does not vanish at the shift point.
pub fn eliminate_division(
    split: &DivisionSplit,
    target_degree: usize,
    shift: &Shift,
) -> Result<Circuit, TransformError> {
    let mut b = CircuitBuilder::new(split.n());
    let q = quotient_parts(&mut b, split, target_degree, shift)?;
    let root = join_parts(&mut b, &q);
    let shifted = b.finish(root, Semantics::Raw)?;
    let back: Shift = shift.iter().map(|(v, k)| (*v, -k)).collect();
    Ok(translate_inputs(&shifted, &back))
}

/// The degree-`d` homogeneous part of `A / B` without any translation. Requires
/// `B(0) = 1` and gives `A / B` itself exactly when that quotient is homogeneous of
/// degree `d`.
pub fn eliminate_division_homogeneous(split: &DivisionSplit, d: usize) -> Result<Circuit, TransformError> {
    let zero = Shift::new();
    let beta = split.denominator().evaluate(&shift_point(&zero, split.n())).expect("division-free");
    if !beta.is_one() {
        return Err(TransformError::SingularShift);
    }
    let mut b = CircuitBuilder::new(split.n());
    let q = quotient_parts(&mut b, split, d, &zero)?;
    let root = q[d].unwrap_or_else(|| b.constant(Rational::zero()));
    Ok(b.finish(root, Semantics::Raw)?)
}

/// Number of random points [`find_shift`] tries after the all-ones point.
pub const SHIFT_ATTEMPTS: usize = 32;

/// A point where `B` does not vanish: the all-ones point, or else one of
/// [`SHIFT_ATTEMPTS`] pseudo-random small rational points.
pub fn find_shift(split: &DivisionSplit, seed: u64) -> Result<Shift, TransformError> {
    let n = split.n();
    let den = split.denominator();
    let vars = || (1..=n as u32).flat_map(|i| [VarRef::plain(i), VarRef::bar(i)]);
    let nonsingular = |s: &Shift| !den.evaluate(&shift_point(s, n)).expect("division-free").is_zero();
    let ones: Shift = vars().map(|v| (v, Rational::one())).collect();
    if nonsingular(&ones) {
        return Ok(ones);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..SHIFT_ATTEMPTS {
        let s: Shift =
            vars().map(|v| (v, Rational::new(rng.random_range(-64..=64), rng.random_range(1..=16)))).collect();
        if nonsingular(&s) {
            return Ok(s);
        }
    }
    Err(TransformError::SingularShift)
}

/// Every stage of a starred edge, for inspection.
#[derive(Debug, Clone)]
pub struct Elimination {
    /// The raw circuit with division gadgets.
    pub gadget: Circuit,
    pub numerator: Circuit,
    pub denominator: Circuit,
    pub output: Circuit,
}

/// Applies starred edge 1, 4, 7 or 10.
pub fn edge_transform(c: &Circuit, edge: Edge) -> Result<Circuit, TransformError> {
    Ok(edge_transform_traced(c, edge)?.output)
}

/// Like [`edge_transform`], keeping the intermediate circuits.
pub fn edge_transform_traced(c: &Circuit, edge: Edge) -> Result<Elimination, TransformError> {
    let kind = GadgetKind::for_edge(edge).expect("starred edge");
    if c.semantics() != edge.source() {
        return Err(TransformError::SemanticsMismatch { expected: edge.source(), found: c.semantics() });
    }
    let gadget = introduce_gadgets(c, kind)?;
    let split = pull_up(&gadget);
    let out = eliminate_division(&split, c.n(), &builtin_shift(c.n()))?;
    Ok(Elimination {
        numerator: split.numerator(),
        denominator: split.denominator(),
        output: out.with_semantics(edge.target())?,
        gadget,
    })
}
