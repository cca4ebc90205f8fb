//! The arithmetic-circuit IR.
//!
//! A [`Circuit`] is an immutable DAG stored as a node table in topological order: every
//! child id is strictly smaller than the id of its parent. Circuits are produced either
//! from an explicit node table ([`Circuit::build`]) or incrementally through a
//! [`CircuitBuilder`], which deduplicates structurally identical nodes.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use hashbrown::HashMap;

use crate::field;
use crate::rational::Rational;

/// Which of the two indeterminates of an index a leaf refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Polarity {
    Plain,
    Bar,
}

/// A variable leaf: `x_i` or `~x_i`, with `index` in `1..=n`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarRef {
    pub index: u32,
    pub polarity: Polarity,
}

impl VarRef {
    pub const fn plain(index: u32) -> Self {
        VarRef { index, polarity: Polarity::Plain }
    }

    pub const fn bar(index: u32) -> Self {
        VarRef { index, polarity: Polarity::Bar }
    }

    pub fn is_bar(&self) -> bool {
        self.polarity == Polarity::Bar
    }
}

impl fmt::Display for VarRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.polarity {
            Polarity::Plain => write!(f, "x{}", self.index),
            Polarity::Bar => write!(f, "~x{}", self.index),
        }
    }
}

/// The polynomial encoding a circuit claims to compute.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Semantics {
    /// `p(x)`, the mass function written as a multilinear polynomial.
    Likelihood,
    /// `p(x, ~x)`, the indicator-pair network polynomial.
    Network,
    /// `g(x)`, the probability generating polynomial.
    Generating,
    /// `p_{-1,1}(x)`, the likelihood polynomial moved to the `{-1,1}` domain.
    LikelihoodPm,
    /// `p^(x)`, the Fourier transform of the mass function.
    Fourier,
    /// `p^(x, ~x)`, the indicator-pair form of the Fourier spectrum.
    FourierIndicator,
    /// Generating polynomial of a `k`-valued distribution.
    CategoricalGenerating { k: u32 },
    /// Untagged intermediate.
    Raw,
}

impl Semantics {
    /// The six binary-distribution encodings, in a fixed order.
    pub const DISTRIBUTION_TAGS: [Semantics; 6] = [
        Semantics::Likelihood,
        Semantics::Network,
        Semantics::Generating,
        Semantics::LikelihoodPm,
        Semantics::Fourier,
        Semantics::FourierIndicator,
    ];

    /// Whether `~x_i` leaves may appear under this tag.
    pub fn admits_bar(&self) -> bool {
        matches!(self, Semantics::Network | Semantics::FourierIndicator | Semantics::Raw)
    }

    pub fn is_distribution(&self) -> bool {
        Self::DISTRIBUTION_TAGS.contains(self)
    }
}

impl fmt::Display for Semantics {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Semantics::Likelihood => f.write_str("likelihood"),
            Semantics::Network => f.write_str("network"),
            Semantics::Generating => f.write_str("generating"),
            Semantics::LikelihoodPm => f.write_str("likelihood_pm"),
            Semantics::Fourier => f.write_str("fourier"),
            Semantics::FourierIndicator => f.write_str("fourier_ind"),
            Semantics::CategoricalGenerating { k } => write!(f, "categorical_generating k={k}"),
            Semantics::Raw => f.write_str("raw"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown semantics `{0}`")]
pub struct ParseSemanticsError(pub alloc::string::String);

impl FromStr for Semantics {
    type Err = ParseSemanticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || ParseSemanticsError(s.into());
        let mut words = s.split_whitespace();
        let head = words.next().ok_or_else(err)?;
        let tag = match head {
            "likelihood" => Semantics::Likelihood,
            "network" => Semantics::Network,
            "generating" => Semantics::Generating,
            "likelihood_pm" => Semantics::LikelihoodPm,
            "fourier" => Semantics::Fourier,
            "fourier_ind" => Semantics::FourierIndicator,
            "raw" => Semantics::Raw,
            "categorical_generating" => {
                let k = words
                    .next()
                    .and_then(|w| w.strip_prefix("k="))
                    .and_then(|k| k.parse::<u32>().ok())
                    .filter(|k| *k >= 2)
                    .ok_or_else(err)?;
                Semantics::CategoricalGenerating { k }
            }
            _ => return Err(err()),
        };
        if words.next().is_some() {
            return Err(err());
        }
        Ok(tag)
    }
}

/// Index of a node in its circuit's (or builder's) node table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Node {
    /// Weighted sum; one `(weight, child)` pair per edge.
    Sum(Vec<(Rational, NodeId)>),
    Product(Vec<NodeId>),
    /// `num / den`.
    Div(NodeId, NodeId),
    Var(VarRef),
    Const(Rational),
}

impl Node {
    pub fn children(&self) -> Children<'_> {
        match self {
            Node::Sum(terms) => Children::Sum(terms.iter()),
            Node::Product(factors) => Children::Product(factors.iter()),
            Node::Div(num, den) => Children::Pair([*num, *den], 0),
            Node::Var(_) | Node::Const(_) => Children::Leaf,
        }
    }

    /// Number of outgoing edges; a circuit's size is the sum over its nodes.
    pub fn edge_count(&self) -> usize {
        match self {
            Node::Sum(terms) => terms.len(),
            Node::Product(factors) => factors.len(),
            Node::Div(..) => 2,
            Node::Var(_) | Node::Const(_) => 0,
        }
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Node::Var(_) | Node::Const(_))
    }

    /// The same node with every child id passed through `f`.
    pub fn map_children(&self, mut f: impl FnMut(NodeId) -> NodeId) -> Node {
        match self {
            Node::Sum(terms) => Node::Sum(terms.iter().map(|(w, c)| (w.clone(), f(*c))).collect()),
            Node::Product(factors) => Node::Product(factors.iter().map(|c| f(*c)).collect()),
            Node::Div(num, den) => Node::Div(f(*num), f(*den)),
            leaf => leaf.clone(),
        }
    }
}

pub enum Children<'a> {
    Sum(core::slice::Iter<'a, (Rational, NodeId)>),
    Product(core::slice::Iter<'a, NodeId>),
    Pair([NodeId; 2], usize),
    Leaf,
}

impl Iterator for Children<'_> {
    type Item = NodeId;

    fn next(&mut self) -> Option<NodeId> {
        match self {
            Children::Sum(it) => it.next().map(|(_, c)| *c),
            Children::Product(it) => it.next().copied(),
            Children::Pair(pair, pos) => {
                let out = pair.get(*pos).copied();
                *pos += 1;
                out
            }
            Children::Leaf => None,
        }
    }
}

/// Set of variable indices, stored as a bitset (bit `i - 1` for index `i`).
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ScopeSet {
    words: Vec<u64>,
}

impl ScopeSet {
    pub fn empty() -> Self {
        ScopeSet::default()
    }

    pub fn singleton(index: u32) -> Self {
        let mut s = ScopeSet::empty();
        s.insert(index);
        s
    }

    /// `{1, ..., n}`.
    pub fn full(n: usize) -> Self {
        let mut s = ScopeSet::empty();
        for i in 1..=n {
            s.insert(i as u32);
        }
        s
    }

    /// The set whose index `i` is present iff bit `i - 1` of `mask` is set.
    pub fn from_mask(mask: u64) -> Self {
        let mut s = ScopeSet { words: vec![mask] };
        s.trim();
        s
    }

    pub fn insert(&mut self, index: u32) {
        let bit = (index - 1) as usize;
        let word = bit / 64;
        if self.words.len() <= word {
            self.words.resize(word + 1, 0);
        }
        self.words[word] |= 1u64 << (bit % 64);
    }

    pub fn contains(&self, index: u32) -> bool {
        let bit = (index - 1) as usize;
        self.words.get(bit / 64).is_some_and(|w| w & (1u64 << (bit % 64)) != 0)
    }

    pub fn union_with(&mut self, other: &ScopeSet) {
        if self.words.len() < other.words.len() {
            self.words.resize(other.words.len(), 0);
        }
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a |= b;
        }
        self.trim();
    }

    /// Smallest index present in both sets, if any.
    pub fn first_common(&self, other: &ScopeSet) -> Option<u32> {
        self.words.iter().zip(&other.words).enumerate().find_map(|(w, (a, b))| {
            let both = a & b;
            (both != 0).then(|| (w * 64 + both.trailing_zeros() as usize + 1) as u32)
        })
    }

    pub fn is_disjoint(&self, other: &ScopeSet) -> bool {
        self.first_common(other).is_none()
    }

    /// Indices in `self` that are missing from `other`.
    pub fn difference(&self, other: &ScopeSet) -> ScopeSet {
        let mut words: Vec<u64> =
            self.words.iter().enumerate().map(|(i, a)| a & !other.words.get(i).copied().unwrap_or(0)).collect();
        while words.last() == Some(&0) {
            words.pop();
        }
        ScopeSet { words }
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|w| *w == 0)
    }

    pub fn len(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = u32> + '_ {
        self.words.iter().enumerate().flat_map(|(w, bits)| {
            (0..64).filter(move |b| bits & (1u64 << b) != 0).map(move |b| (w * 64 + b + 1) as u32)
        })
    }

    fn trim(&mut self) {
        while self.words.last() == Some(&0) {
            self.words.pop();
        }
    }
}

impl fmt::Display for ScopeSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (k, i) in self.iter().enumerate() {
            if k > 0 {
                f.write_str(",")?;
            }
            write!(f, "{i}")?;
        }
        f.write_str("}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CircuitError {
    #[error("node {node} refers to child {child}, which does not precede it")]
    Cycle { node: NodeId, child: NodeId },
    #[error("node {node} refers to missing child {child}")]
    DanglingChild { node: NodeId, child: NodeId },
    #[error("node {node}: leaf {var} is not admitted under semantics {semantics}")]
    Polarity { node: NodeId, var: VarRef, semantics: Semantics },
    #[error("node {node} has no children")]
    EmptyChildren { node: NodeId },
    #[error("node {node}: variable {var} is outside 1..={n}")]
    VarOutOfRange { node: NodeId, var: VarRef, n: usize },
    #[error("node {node} is a division but divisions are not allowed")]
    DivisionNotAllowed { node: NodeId },
    #[error("root {0} is not in the node table")]
    MissingRoot(NodeId),
    #[error("node {node} is unreachable from the root (a second root)")]
    MultipleRoots { node: NodeId },
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EvalError {
    #[error("division by zero at node {0}")]
    DivideByZero(NodeId),
    #[error("no value supplied for {0}")]
    MissingValue(VarRef),
    #[error("weight at node {0} has a denominator that is not invertible modulo the prime")]
    NonInvertibleWeight(NodeId),
    #[error("node {0} is a division, which this evaluation does not support")]
    DivisionUnsupported(NodeId),
}

/// Values for the plain and barred indeterminates; entry `i - 1` belongs to index `i`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Point<T = Rational> {
    pub plain: Vec<T>,
    pub bar: Vec<T>,
}

/// A point over the prime field used by [`Circuit::evaluate_mod`].
pub type ModPoint = Point<u64>;

impl<T> Point<T> {
    pub fn new(plain: Vec<T>, bar: Vec<T>) -> Self {
        Point { plain, bar }
    }

    /// A point with no barred coordinates.
    pub fn plain(plain: Vec<T>) -> Self {
        Point { plain, bar: Vec::new() }
    }

    pub fn get(&self, var: VarRef) -> Option<&T> {
        let slot = (var.index as usize).checked_sub(1)?;
        match var.polarity {
            Polarity::Plain => self.plain.get(slot),
            Polarity::Bar => self.bar.get(slot),
        }
    }
}

impl Point<Rational> {
    /// Every coordinate, plain and barred, set to `value`.
    pub fn constant(n: usize, value: &Rational) -> Self {
        Point { plain: vec![value.clone(); n], bar: vec![value.clone(); n] }
    }

    /// The indicator point of an assignment: `x_i = b_i`, `~x_i = 1 - b_i`.
    pub fn indicator(n: usize, mask: u64) -> Self {
        let bit = |i: usize| mask >> i & 1 == 1;
        Point {
            plain: (0..n).map(|i| Rational::from_integer(bit(i) as i64)).collect(),
            bar: (0..n).map(|i| Rational::from_integer(!bit(i) as i64)).collect(),
        }
    }
}

/// A bottom-up interpretation of circuit nodes.
pub(crate) trait Interpretation {
    type Value;
    type Error;

    fn var(&mut self, node: NodeId, var: VarRef) -> Result<Self::Value, Self::Error>;
    fn constant(&mut self, node: NodeId, value: &Rational) -> Result<Self::Value, Self::Error>;
    fn sum(
        &mut self,
        node: NodeId,
        terms: &mut dyn Iterator<Item = (&Rational, &Self::Value)>,
    ) -> Result<Self::Value, Self::Error>;
    fn product(
        &mut self,
        node: NodeId,
        factors: &mut dyn Iterator<Item = &Self::Value>,
    ) -> Result<Self::Value, Self::Error>;
    fn div(&mut self, node: NodeId, num: &Self::Value, den: &Self::Value) -> Result<Self::Value, Self::Error>;
}

/// An immutable, validated arithmetic circuit. Equality is structural.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    n: usize,
    nodes: Vec<Node>,
    root: NodeId,
    semantics: Semantics,
    divisions_allowed: bool,
    size: usize,
    scopes: Vec<ScopeSet>,
}

impl Circuit {
    /// Validates a topologically ordered node table. Divisions are rejected.
    pub fn build(nodes: Vec<Node>, root: NodeId, n: usize, semantics: Semantics) -> Result<Circuit, CircuitError> {
        Self::build_with(nodes, root, n, semantics, false)
    }

    pub fn build_with(
        nodes: Vec<Node>,
        root: NodeId,
        n: usize,
        semantics: Semantics,
        divisions_allowed: bool,
    ) -> Result<Circuit, CircuitError> {
        if root.index() >= nodes.len() {
            return Err(CircuitError::MissingRoot(root));
        }
        for (pos, node) in nodes.iter().enumerate() {
            let id = NodeId(pos as u32);
            match node {
                Node::Sum(terms) if terms.is_empty() => return Err(CircuitError::EmptyChildren { node: id }),
                Node::Product(factors) if factors.is_empty() => return Err(CircuitError::EmptyChildren { node: id }),
                Node::Div(..) if !divisions_allowed => return Err(CircuitError::DivisionNotAllowed { node: id }),
                Node::Var(var) => {
                    if var.index == 0 || var.index as usize > n {
                        return Err(CircuitError::VarOutOfRange { node: id, var: *var, n });
                    }
                    if var.is_bar() && !semantics.admits_bar() {
                        return Err(CircuitError::Polarity { node: id, var: *var, semantics });
                    }
                }
                _ => {}
            }
            for child in node.children() {
                if child.index() >= nodes.len() {
                    return Err(CircuitError::DanglingChild { node: id, child });
                }
                if child.index() >= pos {
                    return Err(CircuitError::Cycle { node: id, child });
                }
            }
        }
        let mut reachable = vec![false; nodes.len()];
        reachable[root.index()] = true;
        for pos in (0..nodes.len()).rev() {
            if reachable[pos] {
                for child in nodes[pos].children() {
                    reachable[child.index()] = true;
                }
            }
        }
        if let Some(pos) = reachable.iter().position(|r| !r) {
            return Err(CircuitError::MultipleRoots { node: NodeId(pos as u32) });
        }
        let size = nodes.iter().map(Node::edge_count).sum();
        let scopes = compute_scopes(&nodes);
        Ok(Circuit { n, nodes, root, semantics, divisions_allowed, size, scopes })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    pub fn semantics(&self) -> Semantics {
        self.semantics
    }

    pub fn divisions_allowed(&self) -> bool {
        self.divisions_allowed
    }

    /// Number of edges.
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn has_divisions(&self) -> bool {
        self.nodes.iter().any(|n| matches!(n, Node::Div(..)))
    }

    pub fn has_bar_leaves(&self) -> bool {
        self.nodes.iter().any(|n| matches!(n, Node::Var(v) if v.is_bar()))
    }

    pub fn ids(&self) -> impl Iterator<Item = NodeId> {
        (0..self.nodes.len() as u32).map(NodeId)
    }

    pub fn scope(&self, id: NodeId) -> &ScopeSet {
        &self.scopes[id.index()]
    }

    /// Scope of every node, indexed by node id.
    pub fn scopes(&self) -> &[ScopeSet] {
        &self.scopes
    }

    /// The same circuit under a different tag; leaf polarity rules are rechecked.
    pub fn with_semantics(&self, semantics: Semantics) -> Result<Circuit, CircuitError> {
        Circuit::build_with(self.nodes.clone(), self.root, self.n, semantics, self.divisions_allowed)
    }

    /// Renumbers nodes densely in depth-first order of first use from the root.
    pub fn canonical(&self) -> Circuit {
        let mut order = Vec::with_capacity(self.nodes.len());
        let mut new_id: Vec<Option<NodeId>> = vec![None; self.nodes.len()];
        let mut stack = vec![(self.root, false)];
        while let Some((id, expanded)) = stack.pop() {
            if new_id[id.index()].is_some() {
                continue;
            }
            if expanded {
                new_id[id.index()] = Some(NodeId(order.len() as u32));
                order.push(id);
            } else {
                stack.push((id, true));
                let children: Vec<NodeId> = self.nodes[id.index()].children().collect();
                for child in children.into_iter().rev() {
                    if new_id[child.index()].is_none() {
                        stack.push((child, false));
                    }
                }
            }
        }
        let nodes =
            order.iter().map(|id| self.nodes[id.index()].map_children(|c| new_id[c.index()].unwrap())).collect();
        let root = new_id[self.root.index()].unwrap();
        Circuit::build_with(nodes, root, self.n, self.semantics, self.divisions_allowed)
            .expect("renumbering preserves validity")
    }

    pub(crate) fn interpret<I: Interpretation>(&self, interp: &mut I) -> Result<I::Value, I::Error> {
        let mut pending_parents = vec![0u32; self.nodes.len()];
        for node in &self.nodes {
            for child in node.children() {
                pending_parents[child.index()] += 1;
            }
        }
        let mut values: Vec<Option<I::Value>> = Vec::with_capacity(self.nodes.len());
        for (pos, node) in self.nodes.iter().enumerate() {
            let id = NodeId(pos as u32);
            let value = {
                let get = |c: &NodeId| values[c.index()].as_ref().expect("child evaluated");
                match node {
                    Node::Var(var) => interp.var(id, *var)?,
                    Node::Const(value) => interp.constant(id, value)?,
                    Node::Sum(terms) => {
                        let mut it = terms.iter().map(|(w, c)| (w, get(c)));
                        interp.sum(id, &mut it)?
                    }
                    Node::Product(factors) => {
                        let mut it = factors.iter().map(get);
                        interp.product(id, &mut it)?
                    }
                    Node::Div(num, den) => interp.div(id, get(num), get(den))?,
                }
            };
            for child in node.children() {
                let count = &mut pending_parents[child.index()];
                *count -= 1;
                if *count == 0 && child != self.root {
                    values[child.index()] = None;
                }
            }
            values.push(Some(value));
        }
        Ok(values.swap_remove(self.root.index()).expect("root evaluated"))
    }

    /// Exact value at `point`, in one topological pass.
    pub fn evaluate(&self, point: &Point) -> Result<Rational, EvalError> {
        self.interpret(&mut RationalEval { point })
    }

    /// Value at `point` with every operation reduced modulo `prime`.
    pub fn evaluate_mod(&self, point: &ModPoint, prime: u64) -> Result<u64, EvalError> {
        self.interpret(&mut ModEval { point, prime })
    }
}

fn compute_scopes(nodes: &[Node]) -> Vec<ScopeSet> {
    let mut scopes: Vec<ScopeSet> = Vec::with_capacity(nodes.len());
    for node in nodes {
        let scope = match node {
            Node::Var(var) => ScopeSet::singleton(var.index),
            Node::Const(_) => ScopeSet::empty(),
            _ => {
                let mut s = ScopeSet::empty();
                for child in node.children() {
                    s.union_with(&scopes[child.index()]);
                }
                s
            }
        };
        scopes.push(scope);
    }
    scopes
}

struct RationalEval<'a> {
    point: &'a Point,
}

impl Interpretation for RationalEval<'_> {
    type Value = Rational;
    type Error = EvalError;

    fn var(&mut self, _: NodeId, var: VarRef) -> Result<Rational, EvalError> {
        self.point.get(var).cloned().ok_or(EvalError::MissingValue(var))
    }

    fn constant(&mut self, _: NodeId, value: &Rational) -> Result<Rational, EvalError> {
        Ok(value.clone())
    }

    fn sum(
        &mut self,
        _: NodeId,
        terms: &mut dyn Iterator<Item = (&Rational, &Rational)>,
    ) -> Result<Rational, EvalError> {
        let mut acc = Rational::zero();
        for (w, v) in terms {
            if !v.is_zero() {
                acc += w * v;
            }
        }
        Ok(acc)
    }

    fn product(&mut self, _: NodeId, factors: &mut dyn Iterator<Item = &Rational>) -> Result<Rational, EvalError> {
        let mut acc = Rational::one();
        for v in factors {
            if v.is_zero() {
                return Ok(Rational::zero());
            }
            acc *= v;
        }
        Ok(acc)
    }

    fn div(&mut self, node: NodeId, num: &Rational, den: &Rational) -> Result<Rational, EvalError> {
        num.checked_div(den).ok_or(EvalError::DivideByZero(node))
    }
}

struct ModEval<'a> {
    point: &'a ModPoint,
    prime: u64,
}

impl Interpretation for ModEval<'_> {
    type Value = u64;
    type Error = EvalError;

    fn var(&mut self, _: NodeId, var: VarRef) -> Result<u64, EvalError> {
        self.point.get(var).map(|v| v % self.prime).ok_or(EvalError::MissingValue(var))
    }

    fn constant(&mut self, node: NodeId, value: &Rational) -> Result<u64, EvalError> {
        value.residue(self.prime).ok_or(EvalError::NonInvertibleWeight(node))
    }

    fn sum(&mut self, node: NodeId, terms: &mut dyn Iterator<Item = (&Rational, &u64)>) -> Result<u64, EvalError> {
        let p = self.prime;
        let mut acc = 0;
        for (w, v) in terms {
            let w = w.residue(p).ok_or(EvalError::NonInvertibleWeight(node))?;
            acc = field::add_mod(acc, field::mul_mod(w, *v, p), p);
        }
        Ok(acc)
    }

    fn product(&mut self, _: NodeId, factors: &mut dyn Iterator<Item = &u64>) -> Result<u64, EvalError> {
        Ok(factors.fold(1 % self.prime, |acc, v| field::mul_mod(acc, *v, self.prime)))
    }

    fn div(&mut self, node: NodeId, num: &u64, den: &u64) -> Result<u64, EvalError> {
        if *den == 0 {
            return Err(EvalError::DivideByZero(node));
        }
        Ok(field::mul_mod(*num, field::inv_mod(*den, self.prime), self.prime))
    }
}

/// Incremental construction of circuits, with optional structural hash-consing.
///
/// Ids handed out by a builder are only meaningful for that builder. Several outputs may
/// share one builder; [`CircuitBuilder::finish`] extracts the part reachable from a root.
#[derive(Debug, Clone)]
pub struct CircuitBuilder {
    n: usize,
    nodes: Vec<Node>,
    dedup: Option<HashMap<Node, NodeId>>,
}

impl CircuitBuilder {
    pub fn new(n: usize) -> Self {
        CircuitBuilder { n, nodes: Vec::new(), dedup: Some(HashMap::new()) }
    }

    /// A builder that keeps every pushed node, even structural duplicates.
    pub fn without_hash_consing(n: usize) -> Self {
        CircuitBuilder { n, nodes: Vec::new(), dedup: None }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn push(&mut self, node: Node) -> NodeId {
        debug_assert!(node.children().all(|c| c.index() < self.nodes.len()));
        debug_assert!(!matches!(&node, Node::Sum(t) if t.is_empty()));
        debug_assert!(!matches!(&node, Node::Product(f) if f.is_empty()));
        if let Some(map) = &self.dedup {
            if let Some(id) = map.get(&node) {
                return *id;
            }
        }
        let id = NodeId(self.nodes.len() as u32);
        if let Some(map) = &mut self.dedup {
            map.insert(node.clone(), id);
        }
        self.nodes.push(node);
        id
    }

    pub fn var(&mut self, var: VarRef) -> NodeId {
        self.push(Node::Var(var))
    }

    pub fn constant(&mut self, value: Rational) -> NodeId {
        self.push(Node::Const(value))
    }

    pub fn one(&mut self) -> NodeId {
        self.constant(Rational::one())
    }

    pub fn sum(&mut self, terms: Vec<(Rational, NodeId)>) -> NodeId {
        self.push(Node::Sum(terms))
    }

    pub fn product(&mut self, factors: Vec<NodeId>) -> NodeId {
        self.push(Node::Product(factors))
    }

    pub fn div(&mut self, num: NodeId, den: NodeId) -> NodeId {
        self.push(Node::Div(num, den))
    }

    /// `offset + slope * node` as a single sum node (the offset edge is omitted when zero).
    pub fn affine(&mut self, offset: Rational, slope: Rational, node: NodeId) -> NodeId {
        if offset.is_zero() {
            return self.sum(vec![(slope, node)]);
        }
        let one = self.one();
        self.sum(vec![(offset, one), (slope, node)])
    }

    /// Copies every node of `circuit` into the builder; returns the id map.
    pub fn import(&mut self, circuit: &Circuit) -> Vec<NodeId> {
        let mut map: Vec<NodeId> = Vec::with_capacity(circuit.node_count());
        for node in circuit.nodes() {
            let id = self.push(node.map_children(|c| map[c.index()]));
            map.push(id);
        }
        map
    }

    /// Extracts the sub-DAG reachable from `root` as a validated circuit.
    pub fn finish(&self, root: NodeId, semantics: Semantics) -> Result<Circuit, CircuitError> {
        let mut reachable = vec![false; self.nodes.len()];
        reachable[root.index()] = true;
        for pos in (0..=root.index()).rev() {
            if reachable[pos] {
                for child in self.nodes[pos].children() {
                    reachable[child.index()] = true;
                }
            }
        }
        let mut new_id: Vec<NodeId> = vec![NodeId(u32::MAX); root.index() + 1];
        let mut nodes = Vec::new();
        let mut divisions = false;
        for pos in 0..=root.index() {
            if reachable[pos] {
                new_id[pos] = NodeId(nodes.len() as u32);
                let node = self.nodes[pos].map_children(|c| new_id[c.index()]);
                divisions |= matches!(node, Node::Div(..));
                nodes.push(node);
            }
        }
        let root = new_id[root.index()];
        Ok(Circuit::build_with(nodes, root, self.n, semantics, divisions)?.canonical())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn r(s: &str) -> Rational {
        s.parse().unwrap()
    }

    #[test]
    fn constant_circuit_with_no_variables() {
        let c = Circuit::build(vec![Node::Const(Rational::one())], NodeId(0), 0, Semantics::Likelihood).unwrap();
        assert_eq!(c.size(), 0);
        assert_eq!(c.evaluate(&Point::default()).unwrap(), Rational::one());
    }

    #[test]
    fn bar_leaf_rejected_under_generating() {
        let err = Circuit::build(vec![Node::Var(VarRef::bar(1))], NodeId(0), 1, Semantics::Generating).unwrap_err();
        assert!(matches!(err, CircuitError::Polarity { .. }));
    }

    #[test]
    fn structural_errors() {
        let cyc = Circuit::build(vec![Node::Product(vec![NodeId(0)])], NodeId(0), 1, Semantics::Raw);
        assert!(matches!(cyc, Err(CircuitError::Cycle { .. })));
        let dangling = Circuit::build(
            vec![Node::Var(VarRef::plain(1)), Node::Product(vec![NodeId(7)])],
            NodeId(1),
            1,
            Semantics::Raw,
        );
        assert!(matches!(dangling, Err(CircuitError::DanglingChild { .. })));
        let empty = Circuit::build(vec![Node::Sum(vec![])], NodeId(0), 0, Semantics::Raw);
        assert!(matches!(empty, Err(CircuitError::EmptyChildren { .. })));
        let range = Circuit::build(vec![Node::Var(VarRef::plain(3))], NodeId(0), 2, Semantics::Raw);
        assert!(matches!(range, Err(CircuitError::VarOutOfRange { .. })));
        let two_roots = Circuit::build(
            vec![Node::Var(VarRef::plain(1)), Node::Var(VarRef::plain(2))],
            NodeId(1),
            2,
            Semantics::Raw,
        );
        assert!(matches!(two_roots, Err(CircuitError::MultipleRoots { .. })));
        let div = Circuit::build(
            vec![Node::Var(VarRef::plain(1)), Node::Div(NodeId(0), NodeId(0))],
            NodeId(1),
            1,
            Semantics::Raw,
        );
        assert!(matches!(div, Err(CircuitError::DivisionNotAllowed { .. })));
    }

    #[test]
    fn example_evaluates_at_all_ones() {
        let c = fixtures::two_var_likelihood();
        let v = c.evaluate(&Point::plain(vec![Rational::one(), Rational::one()])).unwrap();
        assert_eq!(v, Rational::new(9, 20));
        let zero = c.evaluate(&Point::plain(vec![Rational::zero(), Rational::zero()])).unwrap();
        assert_eq!(zero, r("0.09"));
    }

    #[test]
    fn example_scopes() {
        let c = fixtures::two_var_likelihood();
        assert_eq!(c.scope(c.root()), &ScopeSet::full(2));
        for id in c.ids() {
            if let Node::Const(_) = c.node(id) {
                assert!(c.scope(id).is_empty());
            }
        }
    }

    #[test]
    fn product_scope_is_union() {
        let mut b = CircuitBuilder::new(2);
        let x1 = b.var(VarRef::plain(1));
        let nx2 = b.var(VarRef::bar(2));
        let p = b.product(vec![x1, nx2]);
        let c = b.finish(p, Semantics::Network).unwrap();
        assert_eq!(c.scope(c.root()), &ScopeSet::full(2));
        assert_eq!(c.size(), 2);
    }

    #[test]
    fn hash_consing_merges_duplicates() {
        let mut b = CircuitBuilder::new(1);
        let x = b.var(VarRef::plain(1));
        let y = b.var(VarRef::plain(1));
        assert_eq!(x, y);
        let s1 = b.sum(vec![(Rational::one(), x)]);
        let s2 = b.sum(vec![(Rational::one(), y)]);
        assert_eq!(s1, s2);
        let mut raw = CircuitBuilder::without_hash_consing(1);
        let x = raw.var(VarRef::plain(1));
        let y = raw.var(VarRef::plain(1));
        assert_ne!(x, y);
    }

    #[test]
    fn modular_evaluation_matches_exact() {
        let c = fixtures::two_var_likelihood();
        let p = field::MERSENNE_61;
        let v = c.evaluate_mod(&Point::plain(vec![1, 1]), p).unwrap();
        assert_eq!(v, Rational::new(9, 20).residue(p).unwrap());
    }

    #[test]
    fn constant_modular() {
        let p = field::MERSENNE_61;
        let c = Circuit::build(vec![Node::Const(Rational::new(3, 4))], NodeId(0), 0, Semantics::Raw).unwrap();
        let v = c.evaluate_mod(&Point::default(), p).unwrap();
        assert_eq!(v, field::mul_mod(3, field::inv_mod(4, p), p));
    }

    #[test]
    fn division_by_zero_is_reported() {
        let mut b = CircuitBuilder::new(1);
        let x = b.var(VarRef::plain(1));
        let nx = b.var(VarRef::bar(1));
        let d = b.div(x, nx);
        let c = b.finish(d, Semantics::Raw).unwrap();
        let point = Point::new(vec![Rational::one()], vec![Rational::zero()]);
        assert_eq!(c.evaluate(&point), Err(EvalError::DivideByZero(c.root())));
    }

    #[test]
    fn semantics_round_trip_text() {
        for tag in
            Semantics::DISTRIBUTION_TAGS.into_iter().chain([Semantics::Raw, Semantics::CategoricalGenerating { k: 4 }])
        {
            let text = alloc::format!("{tag}");
            assert_eq!(text.parse::<Semantics>().unwrap(), tag);
        }
        assert!("categorical_generating k=1".parse::<Semantics>().is_err());
        assert!("bogus".parse::<Semantics>().is_err());
    }

    #[test]
    fn canonical_order_is_first_use() {
        let nodes =
            vec![Node::Var(VarRef::plain(2)), Node::Var(VarRef::plain(1)), Node::Product(vec![NodeId(1), NodeId(0)])];
        let c = Circuit::build(nodes, NodeId(2), 2, Semantics::Raw).unwrap().canonical();
        assert_eq!(c.node(NodeId(0)), &Node::Var(VarRef::plain(1)));
        assert_eq!(c.node(NodeId(1)), &Node::Var(VarRef::plain(2)));
        assert_eq!(c.root(), NodeId(2));
    }
}
