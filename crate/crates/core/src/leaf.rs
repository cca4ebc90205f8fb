//! Transformations that only rewrite leaves, plus at most one constant factor at the root.

use alloc::vec::Vec;

use crate::circuit::{Circuit, CircuitBuilder, Node, NodeId, Polarity, Semantics, VarRef};
use crate::rational::Rational;
use crate::transform::{expect_semantics, TransformError};

/// What a variable leaf becomes.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LeafImage {
    Keep,
    Const(Rational),
    /// `offset + slope * x_i`, always in terms of the plain variable of the same index.
    Affine {
        offset: Rational,
        slope: Rational,
    },
}

impl LeafImage {
    fn affine(offset: Rational, slope: Rational) -> Self {
        LeafImage::Affine { offset, slope }
    }
}

/// A leaf substitution applied uniformly to every index.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LeafRule {
    pub plain: LeafImage,
    pub bar: LeafImage,
    /// Constant multiplied onto the root, if any.
    pub scale: Option<Rational>,
    pub target: Semantics,
}

/// Applies `rule` to every leaf of `c`. Sum and product nodes keep their shape.
pub fn substitute(c: &Circuit, rule: &LeafRule) -> Result<Circuit, TransformError> {
    let mut b = CircuitBuilder::new(c.n());
    let mut map: Vec<NodeId> = Vec::with_capacity(c.node_count());
    for node in c.nodes() {
        let id = match node {
            Node::Var(v) => {
                let image = match v.polarity {
                    Polarity::Plain => &rule.plain,
                    Polarity::Bar => &rule.bar,
                };
                match image {
                    LeafImage::Keep => b.var(*v),
                    LeafImage::Const(k) => b.constant(k.clone()),
                    LeafImage::Affine { offset, slope } => {
                        let x = b.var(VarRef::plain(v.index));
                        b.affine(offset.clone(), slope.clone(), x)
                    }
                }
            }
            other => b.push(other.map_children(|ch| map[ch.index()])),
        };
        map.push(id);
    }
    let mut root = map[c.root().index()];
    if let Some(scale) = &rule.scale {
        let k = b.constant(scale.clone());
        root = b.product(alloc::vec![k, root]);
    }
    Ok(b.finish(root, rule.target)?)
}

fn one() -> Rational {
    Rational::one()
}

fn half() -> Rational {
    Rational::new(1, 2)
}

/// Edge 2: `~x_i := 1`, network to generating.
pub fn network_to_generating(c: &Circuit) -> Result<Circuit, TransformError> {
    expect_semantics(c, Semantics::Network)?;
    substitute(c, &bar_to_one(Semantics::Generating))
}

/// Edge 3: `~x_i := 1 - x_i`, network to likelihood.
pub fn network_to_likelihood(c: &Circuit) -> Result<Circuit, TransformError> {
    expect_semantics(c, Semantics::Network)?;
    substitute(c, &bar_to_complement(Semantics::Likelihood))
}

fn bar_to_one(target: Semantics) -> LeafRule {
    LeafRule { plain: LeafImage::Keep, bar: LeafImage::Const(one()), scale: None, target }
}

fn bar_to_complement(target: Semantics) -> LeafRule {
    LeafRule { plain: LeafImage::Keep, bar: LeafImage::affine(one(), -one()), scale: None, target }
}

/// `x := (1 - x) / 2`, from `{0,1}` coordinates to `{-1,1}` coordinates.
fn to_pm_image() -> LeafImage {
    LeafImage::affine(half(), -half())
}

/// `x := 1 - 2x`, the inverse of [`to_pm_image`].
fn from_pm_image() -> LeafImage {
    LeafImage::affine(one(), Rational::from_integer(-2))
}

/// Edge 5: likelihood to its `{-1,1}`-domain form.
pub fn likelihood_to_pm(c: &Circuit) -> Result<Circuit, TransformError> {
    expect_semantics(c, Semantics::Likelihood)?;
    swap(c, to_pm_image(), Semantics::LikelihoodPm)
}

/// Edge 6: the inverse of edge 5.
pub fn pm_to_likelihood(c: &Circuit) -> Result<Circuit, TransformError> {
    expect_semantics(c, Semantics::LikelihoodPm)?;
    swap(c, from_pm_image(), Semantics::Likelihood)
}

fn swap(c: &Circuit, plain: LeafImage, target: Semantics) -> Result<Circuit, TransformError> {
    if c.has_bar_leaves() {
        return Err(TransformError::HasBarLeaves);
    }
    substitute(c, &LeafRule { plain, bar: LeafImage::Keep, scale: None, target })
}

/// Moves a single-polarity circuit between the `{0,1}` and `{-1,1}` domains.
///
/// Likelihood and likelihood_pm circuits go to each other. A Fourier circuit goes to its
/// `{-1,1}` form, which is not one of the six encodings and is tagged raw.
pub fn domain_swap(c: &Circuit) -> Result<Circuit, TransformError> {
    if c.has_divisions() {
        return Err(TransformError::HasDivisions);
    }
    match c.semantics() {
        Semantics::Likelihood => swap(c, to_pm_image(), Semantics::LikelihoodPm),
        Semantics::LikelihoodPm => swap(c, from_pm_image(), Semantics::Likelihood),
        Semantics::Fourier => swap(c, to_pm_image(), Semantics::Raw),
        found => Err(TransformError::SemanticsMismatch { expected: Semantics::Likelihood, found }),
    }
}

/// Moves a raw single-polarity circuit in the given direction, keeping the raw tag.
pub fn domain_swap_raw(c: &Circuit, to_pm: bool) -> Result<Circuit, TransformError> {
    if c.has_divisions() {
        return Err(TransformError::HasDivisions);
    }
    let image = if to_pm { to_pm_image() } else { from_pm_image() };
    swap(c, image, Semantics::Raw)
}

/// Edge 12: scale by `2^-n`, then `x_i := 1 - 2 x_i`.
pub fn generating_to_fourier(c: &Circuit) -> Result<Circuit, TransformError> {
    expect_semantics(c, Semantics::Generating)?;
    let scale = scale_node(-(c.n() as i32));
    substitute(c, &LeafRule { plain: from_pm_image(), bar: LeafImage::Keep, scale, target: Semantics::Fourier })
}

/// Edge 11: `x_i := (1 - x_i) / 2`, then scale by `2^n`.
pub fn fourier_to_generating(c: &Circuit) -> Result<Circuit, TransformError> {
    expect_semantics(c, Semantics::Fourier)?;
    let scale = scale_node(c.n() as i32);
    substitute(c, &LeafRule { plain: to_pm_image(), bar: LeafImage::Keep, scale, target: Semantics::Generating })
}

fn scale_node(exp: i32) -> Option<Rational> {
    (exp != 0).then(|| Rational::pow2(exp))
}

/// How [`fourier_ind_collapse`] removes the barred leaves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Collapse {
    /// Edge 8: `~x_i := 1`, giving the `{-1,1}`-domain likelihood.
    ToPm,
    /// Edge 9: `~x_i := 1 - x_i`, giving the Fourier polynomial.
    ToFourier,
}

pub fn fourier_ind_collapse(c: &Circuit, mode: Collapse) -> Result<Circuit, TransformError> {
    expect_semantics(c, Semantics::FourierIndicator)?;
    let rule = match mode {
        Collapse::ToPm => bar_to_one(Semantics::LikelihoodPm),
        Collapse::ToFourier => bar_to_complement(Semantics::Fourier),
    };
    substitute(c, &rule)
}
