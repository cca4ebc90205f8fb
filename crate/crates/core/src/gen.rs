//! Seeded random instances for tests and benchmarks.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::circuit::{Circuit, CircuitBuilder, NodeId, Semantics, VarRef};
use crate::hardness::IntMatrix;
use crate::oracle::DistTable;
use crate::rational::Rational;

/// A distribution with small random integer weights, normalized. Roughly one entry in
/// five is zero; at least one entry is positive.
pub fn random_dist<R: Rng>(rng: &mut R, n: usize) -> DistTable {
    let mut weights: Vec<i64> =
        (0..1usize << n).map(|_| if rng.random_bool(0.2) { 0 } else { rng.random_range(1..=20) }).collect();
    if weights.iter().all(|w| *w == 0) {
        let k = rng.random_range(0..weights.len());
        weights[k] = 1;
    }
    let total: i64 = weights.iter().sum();
    let probs = weights.into_iter().map(|w| Rational::new(w, total)).collect();
    DistTable::new(n, probs).expect("table of length 2^n")
}

/// Shape of the random mixture-of-products circuits from [`random_mixture`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureShape {
    /// Nesting depth of mixtures; at depth 0 a scope is a product of leaves.
    pub depth: u32,
    /// Largest number of components in one mixture (at least 2).
    pub max_components: usize,
    /// Chance that a leaf uses a degenerate parameter (0, 1/2 or 1), which in several
    /// encodings turns it into a constant and leaves a scope gap.
    pub degenerate: f64,
    /// Chance that a product also multiplies in a factor computing 1 over a variable it
    /// already uses, breaking decomposability.
    pub tangle: f64,
}

impl MixtureShape {
    pub fn decomposable(depth: u32) -> Self {
        MixtureShape { depth, max_components: 3, degenerate: 0.25, tangle: 0.0 }
    }
}

/// The leaf for a Bernoulli variable with `Pr(x_i = 1) = theta`, in the encoding of `tag`.
pub fn bernoulli_leaf(b: &mut CircuitBuilder, tag: Semantics, i: u32, theta: &Rational) -> NodeId {
    let one = Rational::one();
    let half = Rational::new(1, 2);
    let (offset, slope) = match tag {
        Semantics::Network | Semantics::FourierIndicator => {
            let (wx, wbar) =
                if tag == Semantics::Network { (theta.clone(), &one - theta) } else { (&half - theta, half.clone()) };
            let x = b.var(VarRef::plain(i));
            let bar = b.var(VarRef::bar(i));
            return match (wx.is_zero(), wbar.is_zero()) {
                (true, _) => b.sum(vec![(wbar, bar)]),
                (_, true) => b.sum(vec![(wx, x)]),
                _ => b.sum(vec![(wx, x), (wbar, bar)]),
            };
        }
        Semantics::Likelihood => (&one - theta, theta + theta - &one),
        Semantics::Generating => (&one - theta, theta.clone()),
        Semantics::LikelihoodPm => (half.clone(), &half - theta),
        Semantics::Fourier => (half.clone(), -theta),
        other => panic!("no Bernoulli leaf for {other}"),
    };
    if slope.is_zero() {
        return b.constant(offset);
    }
    let x = b.var(VarRef::plain(i));
    b.affine(offset, slope, x)
}

fn random_theta<R: Rng>(rng: &mut R, degenerate: f64) -> Rational {
    if rng.random_bool(degenerate) {
        [Rational::zero(), Rational::new(1, 2), Rational::one()][rng.random_range(0..3)].clone()
    } else {
        Rational::new(rng.random_range(1..10), 10)
    }
}

fn random_weights<R: Rng>(rng: &mut R, k: usize) -> Vec<Rational> {
    let raw: Vec<i64> = (0..k).map(|_| rng.random_range(1..=9)).collect();
    let total: i64 = raw.iter().sum();
    raw.into_iter().map(|w| Rational::new(w, total)).collect()
}

/// `1 + x_i - x_i` as a sum node: computes 1 but has scope `{i}`.
fn tangle_factor(b: &mut CircuitBuilder, i: u32) -> NodeId {
    let one = b.one();
    let x = b.var(VarRef::plain(i));
    b.sum(vec![(Rational::one(), one), (Rational::one(), x), (-Rational::one(), x)])
}

/// A random mixture of products of Bernoulli leaves over `{1..n}`, encoded under `tag`
/// (one of the six distribution encodings). Mixtures split their scope into random
/// blocks per component and recurse on each block.
pub fn random_mixture<R: Rng>(rng: &mut R, tag: Semantics, n: usize, shape: MixtureShape) -> Circuit {
    let mut b = CircuitBuilder::new(n);
    let scope: Vec<u32> = (1..=n as u32).collect();
    let root = if n == 0 { b.one() } else { mixture_node(rng, &mut b, tag, &scope, shape.depth, &shape) };
    b.finish(root, tag).expect("generated circuits are well formed")
}

fn mixture_node<R: Rng>(
    rng: &mut R,
    b: &mut CircuitBuilder,
    tag: Semantics,
    scope: &[u32],
    depth: u32,
    shape: &MixtureShape,
) -> NodeId {
    if depth == 0 || (scope.len() == 1 && rng.random_bool(0.5)) {
        return product_node(rng, b, tag, scope, 0, shape);
    }
    let k = rng.random_range(2..=shape.max_components.max(2));
    let terms =
        random_weights(rng, k).into_iter().map(|w| (w, product_node(rng, b, tag, scope, depth, shape))).collect();
    b.sum(terms)
}

fn product_node<R: Rng>(
    rng: &mut R,
    b: &mut CircuitBuilder,
    tag: Semantics,
    scope: &[u32],
    depth: u32,
    shape: &MixtureShape,
) -> NodeId {
    let mut factors = Vec::new();
    if depth == 0 {
        for &i in scope {
            let theta = random_theta(rng, shape.degenerate);
            factors.push(bernoulli_leaf(b, tag, i, &theta));
        }
    } else {
        let mut vars = scope.to_vec();
        vars.shuffle(rng);
        let blocks = rng.random_range(1..=vars.len().min(3));
        let mut cuts: Vec<usize> = (1..vars.len()).collect();
        cuts.shuffle(rng);
        let mut cuts: Vec<usize> = cuts.into_iter().take(blocks - 1).collect();
        cuts.sort_unstable();
        let mut start = 0;
        for end in cuts.into_iter().chain([vars.len()]) {
            let mut block = vars[start..end].to_vec();
            block.sort_unstable();
            factors.push(mixture_node(rng, b, tag, &block, depth - 1, shape));
            start = end;
        }
    }
    if shape.tangle > 0.0 && rng.random_bool(shape.tangle) {
        let i = scope[rng.random_range(0..scope.len())];
        factors.push(tangle_factor(b, i));
    }
    if factors.len() == 1 {
        factors[0]
    } else {
        b.product(factors)
    }
}

/// A random raw circuit over `n` plain variables: `layers` rounds, each adding sums and
/// binary products of earlier nodes, with small integer weights. Degree stays below
/// `2^layers`.
pub fn random_raw<R: Rng>(rng: &mut R, n: usize, layers: usize, width: usize) -> Circuit {
    let mut b = CircuitBuilder::without_hash_consing(n);
    let mut pool: Vec<NodeId> = (1..=n as u32).map(|i| b.var(VarRef::plain(i))).collect();
    pool.push(b.one());
    for _ in 0..layers {
        let mut next = Vec::new();
        for _ in 0..width {
            let a = pool[rng.random_range(0..pool.len())];
            let c = pool[rng.random_range(0..pool.len())];
            let node = if rng.random_bool(0.5) {
                b.product(vec![a, c])
            } else {
                b.sum(vec![(small_weight(rng), a), (small_weight(rng), c)])
            };
            next.push(node);
        }
        pool.extend(next);
    }
    let k = pool.len().min(4);
    let terms = pool[pool.len() - k..].iter().map(|&id| (small_weight(rng), id)).collect();
    let root = b.sum(terms);
    b.finish(root, Semantics::Raw).expect("generated circuits are well formed")
}

fn small_weight<R: Rng>(rng: &mut R) -> Rational {
    let w = rng.random_range(1..=5);
    Rational::from_integer(if rng.random_bool(0.5) { w } else { -w })
}

/// `c` with one sum-edge weight (chosen at random) increased by one. Returns `None` when
/// `c` has no sum nodes.
pub fn perturb_weight<R: Rng>(rng: &mut R, c: &Circuit) -> Option<Circuit> {
    let sums: Vec<usize> = c
        .nodes()
        .iter()
        .enumerate()
        .filter(|(_, node)| matches!(node, crate::circuit::Node::Sum(_)))
        .map(|(pos, _)| pos)
        .collect();
    let target = *sums.get(rng.random_range(0..sums.len().max(1)))?;
    let mut nodes = c.nodes().to_vec();
    if let crate::circuit::Node::Sum(terms) = &mut nodes[target] {
        let k = rng.random_range(0..terms.len());
        terms[k].0 = &terms[k].0 + &Rational::one();
    }
    Circuit::build_with(nodes, c.root(), c.n(), c.semantics(), c.divisions_allowed()).ok()
}

/// A 0/1 matrix with each entry set independently with probability `density`.
pub fn random_matrix<R: Rng>(rng: &mut R, order: usize, density: f64) -> IntMatrix {
    let mut m = IntMatrix::zeros(order);
    for r in 0..order {
        for c in 0..order {
            if rng.random_bool(density) {
                m.set(r, c, 1);
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{dist_from, flat_circuit};
    use crate::structured::{is_decomposable, is_smooth};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const TAGS: [Semantics; 6] = [
        Semantics::Likelihood,
        Semantics::Network,
        Semantics::Generating,
        Semantics::LikelihoodPm,
        Semantics::Fourier,
        Semantics::FourierIndicator,
    ];

    #[test]
    fn random_tables_are_distributions() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 0..5 {
            random_dist(&mut rng, n).validate().unwrap();
        }
    }

    #[test]
    fn mixtures_encode_the_same_distribution_in_every_tag() {
        for seed in 0..20 {
            let shape = MixtureShape { tangle: 0.3, ..MixtureShape::decomposable(2) };
            let circuits: Vec<Circuit> =
                TAGS.iter().map(|&tag| random_mixture(&mut ChaCha8Rng::seed_from_u64(seed), tag, 3, shape)).collect();
            let d = dist_from(&circuits[0]).unwrap();
            d.validate().unwrap();
            for c in &circuits[1..] {
                assert_eq!(dist_from(c).unwrap(), d, "seed {seed}, {}", c.semantics());
            }
        }
    }

    #[test]
    fn decomposable_shape_is_decomposable() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut gaps = 0;
        for _ in 0..30 {
            let c = random_mixture(&mut rng, Semantics::Likelihood, 4, MixtureShape::decomposable(2));
            assert!(is_decomposable(&c));
            gaps += usize::from(!is_smooth(&c));
        }
        assert!(gaps > 0);
        let tangled = MixtureShape { tangle: 1.0, ..MixtureShape::decomposable(1) };
        let c = random_mixture(&mut rng, Semantics::Generating, 3, tangled);
        assert!(!is_decomposable(&c));
    }

    #[test]
    fn perturbation_changes_one_weight() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = random_raw(&mut rng, 3, 3, 3);
        let p = perturb_weight(&mut rng, &c).unwrap();
        assert_eq!(p.size(), c.size());
        assert_ne!(p.nodes(), c.nodes());
        let flat = flat_circuit(Semantics::Network, &random_dist(&mut rng, 2)).unwrap();
        assert!(perturb_weight(&mut rng, &flat).is_some());
    }
}
