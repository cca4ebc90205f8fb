//! Explicit distribution tables and the definitional encodings of each semantics.
//!
//! Everything here is computed by brute force straight from the definitions, so it can
//! serve as ground truth for the circuit transformations.

use alloc::vec;
use alloc::vec::Vec;

use crate::circuit::{Circuit, CircuitBuilder, NodeId, Point, Semantics, VarRef};
use crate::rational::Rational;

use super::identity::{identical, IdentityMode};
use super::poly::{Monomial, SparsePoly};
use super::{MassDefect, OracleError};

/// Mass function of a distribution over `n` binary variables.
///
/// Entry `mask` holds `Pr(x_S)` for the subset `S` whose bit `i - 1` is set iff `i` is in `S`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct DistTable {
    n: usize,
    probs: Vec<Rational>,
}

impl DistTable {
    pub fn new(n: usize, probs: Vec<Rational>) -> Result<Self, OracleError> {
        if n >= 32 || probs.len() != 1usize << n {
            return Err(OracleError::TableLength { n, len: probs.len() });
        }
        Ok(DistTable { n, probs })
    }

    pub fn uniform(n: usize) -> Self {
        let p = Rational::pow2(-(n as i32));
        DistTable { n, probs: vec![p; 1 << n] }
    }

    pub fn point_mass(n: usize, mask: u64) -> Self {
        let mut probs = vec![Rational::zero(); 1 << n];
        probs[mask as usize] = Rational::one();
        DistTable { n, probs }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, mask: u64) -> &Rational {
        &self.probs[mask as usize]
    }

    pub fn probs(&self) -> &[Rational] {
        &self.probs
    }

    pub fn iter(&self) -> impl Iterator<Item = (u64, &Rational)> {
        self.probs.iter().enumerate().map(|(m, p)| (m as u64, p))
    }

    pub fn total(&self) -> Rational {
        self.probs.iter().sum()
    }

    /// Checks nonnegativity and normalization.
    pub fn validate(&self) -> Result<(), OracleError> {
        if let Some((mask, _)) = self.iter().find(|(_, p)| p.is_negative()) {
            return Err(OracleError::NotADistribution(MassDefect::NegativeMass { subset: mask }));
        }
        let total = self.total();
        if !total.is_one() {
            return Err(OracleError::NotADistribution(MassDefect::MassSum { total }));
        }
        Ok(())
    }

    /// Total mass of the assignments with every index of `ones` set and every index of
    /// `zeros` clear.
    pub fn marginal(&self, ones: u64, zeros: u64) -> Rational {
        self.iter().filter(|(m, _)| m & ones == ones && m & zeros == 0).map(|(_, p)| p).sum()
    }

    /// Fourier coefficients `p^(v_S) = 2^-n sum_v p(v) (-1)^{|v & S|}`.
    pub fn spectrum(&self) -> Vec<Rational> {
        let scale = Rational::pow2(-(self.n as i32));
        (0..self.probs.len() as u64)
            .map(|s| {
                let signed: Rational =
                    self.iter().map(|(v, p)| if (v & s).count_ones() % 2 == 0 { p.clone() } else { -p }).sum();
                signed * &scale
            })
            .collect()
    }

    /// Inverse of [`DistTable::spectrum`]: `p(v) = sum_S p^(v_S) (-1)^{|v & S|}`.
    pub fn from_spectrum(n: usize, spectrum: &[Rational]) -> Result<Self, OracleError> {
        if spectrum.len() != 1usize << n {
            return Err(OracleError::TableLength { n, len: spectrum.len() });
        }
        let probs = (0..spectrum.len() as u64)
            .map(|v| {
                spectrum
                    .iter()
                    .enumerate()
                    .map(|(s, f)| if (v & s as u64).count_ones().is_multiple_of(2) { f.clone() } else { -f })
                    .sum()
            })
            .collect();
        Ok(DistTable { n, probs })
    }
}

fn affine(offset: Rational, slope: Rational, var: VarRef) -> SparsePoly {
    SparsePoly::from_terms([(Monomial::one(), offset), (Monomial::var(var), slope)])
}

/// The multilinear Fourier polynomial `2^-n sum_S p(v_S) prod_{i in S} (1 - 2 x_i)`.
pub fn fourier_of(d: &DistTable) -> SparsePoly {
    let scale = Rational::pow2(-(d.n as i32));
    let mut out = SparsePoly::zero();
    for (mask, p) in d.iter() {
        if p.is_zero() {
            continue;
        }
        let mut term = SparsePoly::constant(p * &scale);
        for i in 0..d.n as u32 {
            if mask >> i & 1 == 1 {
                term = term.mul(&affine(Rational::one(), Rational::from_integer(-2), VarRef::plain(i + 1)));
            }
        }
        out = out.add(&term);
    }
    out
}

/// The polynomial a distribution has under `semantics`, built from the definition.
pub fn encode_poly(semantics: Semantics, d: &DistTable) -> Result<SparsePoly, OracleError> {
    let n = d.n as u32;
    let half = Rational::new(1, 2);
    let mut out = SparsePoly::zero();
    match semantics {
        Semantics::Network => {
            for (mask, p) in d.iter() {
                out.add_term(Monomial::indicator(d.n, mask), p.clone());
            }
        }
        Semantics::Generating => {
            for (mask, p) in d.iter() {
                out.add_term(Monomial::plain_subset(mask), p.clone());
            }
        }
        Semantics::FourierIndicator => {
            for (mask, f) in d.spectrum().into_iter().enumerate() {
                out.add_term(Monomial::indicator(d.n, mask as u64), f);
            }
        }
        Semantics::Fourier => out = fourier_of(d),
        Semantics::Likelihood | Semantics::LikelihoodPm => {
            let pm = semantics == Semantics::LikelihoodPm;
            for (mask, p) in d.iter() {
                if p.is_zero() {
                    continue;
                }
                let mut term = SparsePoly::constant(p.clone());
                for i in 0..n {
                    let x = VarRef::plain(i + 1);
                    let set = mask >> i & 1 == 1;
                    let factor = match (pm, set) {
                        (false, true) => SparsePoly::var(x),
                        (false, false) => affine(Rational::one(), -Rational::one(), x),
                        (true, true) => affine(half.clone(), -&half, x),
                        (true, false) => affine(half.clone(), half.clone(), x),
                    };
                    term = term.mul(&factor);
                }
                out = out.add(&term);
            }
        }
        other => return Err(OracleError::UnsupportedSemantics(other)),
    }
    Ok(out)
}

/// A flat (sum-of-products) circuit for the distribution under `semantics`, built from the
/// definition without going through any transformation.
pub fn flat_circuit(semantics: Semantics, d: &DistTable) -> Result<Circuit, OracleError> {
    let n = d.n;
    let mut b = CircuitBuilder::new(n);
    let half = Rational::new(1, 2);
    let (weights, scale): (Vec<Rational>, Rational) = match semantics {
        Semantics::FourierIndicator => (d.spectrum(), Rational::one()),
        Semantics::Fourier => (d.probs.clone(), Rational::pow2(-(n as i32))),
        Semantics::Likelihood | Semantics::Network | Semantics::Generating | Semantics::LikelihoodPm => {
            (d.probs.clone(), Rational::one())
        }
        other => return Err(OracleError::UnsupportedSemantics(other)),
    };
    let mut terms: Vec<(Rational, NodeId)> = Vec::new();
    for (mask, w) in weights.iter().enumerate() {
        if w.is_zero() {
            continue;
        }
        let mut factors = Vec::new();
        for i in 0..n as u32 {
            let set = mask >> i & 1 == 1;
            let x = b.var(VarRef::plain(i + 1));
            let factor = match (semantics, set) {
                (Semantics::Network | Semantics::FourierIndicator, true) => x,
                (Semantics::Network | Semantics::FourierIndicator, false) => b.var(VarRef::bar(i + 1)),
                (Semantics::Generating, true) | (Semantics::Likelihood, true) => x,
                (Semantics::Generating, false) => continue,
                (Semantics::Likelihood, false) => b.affine(Rational::one(), -Rational::one(), x),
                (Semantics::LikelihoodPm, true) => b.affine(half.clone(), -&half, x),
                (Semantics::LikelihoodPm, false) => b.affine(half.clone(), half.clone(), x),
                (Semantics::Fourier, true) => b.affine(Rational::one(), Rational::from_integer(-2), x),
                (Semantics::Fourier, false) => continue,
                _ => unreachable!(),
            };
            factors.push(factor);
        }
        let node = if factors.is_empty() { b.one() } else { b.product(factors) };
        terms.push((w * &scale, node));
    }
    let root = if terms.is_empty() { b.constant(Rational::zero()) } else { b.sum(terms) };
    Ok(b.finish(root, semantics).expect("flat encodings are well formed"))
}

/// Options for checking that a circuit really computes the polynomial its tag claims.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verify {
    /// Compare full expansions.
    Exact,
    /// Compare residues at random points modulo 2^61 - 1.
    Probabilistic { trials: u32, seed: u64 },
}

/// Recovers the distribution a tagged circuit encodes, using exact expansion to confirm
/// the circuit has the tag's form.
pub fn dist_from(c: &Circuit) -> Result<DistTable, OracleError> {
    dist_from_with(c, Verify::Exact)
}

/// Like [`dist_from`] with a selectable form check.
///
/// The table itself is always computed exactly, from `2^n` exact evaluations; `verify`
/// only controls how the circuit is compared with the definitional encoding of that table.
pub fn dist_from_with(c: &Circuit, verify: Verify) -> Result<DistTable, OracleError> {
    let n = c.n();
    let semantics = c.semantics();
    if !semantics.is_distribution() {
        return Err(OracleError::UnsupportedSemantics(semantics));
    }
    let size = 1usize << n;
    let at = |point: Point| c.evaluate(&point).map_err(OracleError::Eval);
    let subset_point =
        |mask: u64| Point::plain((0..n).map(|i| Rational::from_integer((mask >> i & 1) as i64)).collect());
    let table = match semantics {
        Semantics::Network => {
            let probs = (0..size as u64).map(|m| at(Point::indicator(n, m))).collect::<Result<_, _>>()?;
            DistTable::new(n, probs)?
        }
        Semantics::Likelihood => {
            let probs = (0..size as u64).map(|m| at(subset_point(m))).collect::<Result<_, _>>()?;
            DistTable::new(n, probs)?
        }
        Semantics::LikelihoodPm => {
            let probs = (0..size as u64)
                .map(|m| {
                    let signs = (0..n).map(|i| Rational::from_integer(if m >> i & 1 == 1 { -1 } else { 1 }));
                    at(Point::plain(signs.collect()))
                })
                .collect::<Result<_, _>>()?;
            DistTable::new(n, probs)?
        }
        Semantics::Generating => {
            let values: Vec<Rational> = (0..size as u64).map(|m| at(subset_point(m))).collect::<Result<_, _>>()?;
            DistTable::new(n, mobius(&values))?
        }
        Semantics::Fourier => {
            let spectrum: Vec<Rational> = (0..size as u64).map(|m| at(subset_point(m))).collect::<Result<_, _>>()?;
            DistTable::from_spectrum(n, &spectrum)?
        }
        Semantics::FourierIndicator => {
            let spectrum: Vec<Rational> =
                (0..size as u64).map(|m| at(Point::indicator(n, m))).collect::<Result<_, _>>()?;
            DistTable::from_spectrum(n, &spectrum)?
        }
        _ => unreachable!(),
    };
    let reference = flat_circuit(semantics, &table)?;
    let mode = match verify {
        Verify::Exact => IdentityMode::Exact,
        Verify::Probabilistic { trials, seed } => IdentityMode::Probabilistic { trials, seed },
    };
    let report = identical(c, &reference, mode)?;
    if !report.identical {
        return Err(OracleError::SemanticsMismatch { semantics, witness: report.witness });
    }
    table.validate()?;
    Ok(table)
}

/// Coefficients of a multilinear polynomial from its values on `{0,1}^n` (subset Mobius
/// inversion).
fn mobius(values: &[Rational]) -> Vec<Rational> {
    let mut coeffs = values.to_vec();
    let mut bit = 1;
    while bit < coeffs.len() {
        for m in 0..coeffs.len() {
            if m & bit != 0 {
                let lower = coeffs[m ^ bit].clone();
                coeffs[m] -= lower;
            }
        }
        bit <<= 1;
    }
    coeffs
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::oracle::expand;

    fn r(s: &str) -> Rational {
        s.parse().unwrap()
    }

    #[test]
    fn table_from_likelihood_circuit() {
        let d = dist_from(&fixtures::two_var_likelihood()).unwrap();
        assert_eq!(d, fixtures::two_var_distribution());
        assert_eq!(d.probs(), &[r("0.09"), r("0.25"), r("0.21"), r("0.45")]);
    }

    #[test]
    fn generating_point_mass() {
        let mut b = CircuitBuilder::new(2);
        let x1 = b.var(VarRef::plain(1));
        let x2 = b.var(VarRef::plain(2));
        let root = b.product(vec![x1, x2]);
        let c = b.finish(root, Semantics::Generating).unwrap();
        assert_eq!(dist_from(&c).unwrap(), DistTable::point_mass(2, 0b11));
    }

    #[test]
    fn fourier_polynomial_of_two_variables() {
        let p = fourier_of(&fixtures::two_var_distribution());
        let x1 = VarRef::plain(1);
        let x2 = VarRef::plain(2);
        let expected = SparsePoly::from_terms([
            (Monomial::one(), r("1/4")),
            (Monomial::var(x1), r("-0.35")),
            (Monomial::var(x2), r("-0.33")),
            (Monomial::from_powers([(x1, 1), (x2, 1)]), r("0.45")),
        ]);
        assert_eq!(p, expected);
    }

    #[test]
    fn fourier_circuit_recovers_the_table() {
        let mut b = CircuitBuilder::new(2);
        let one = b.one();
        let x1 = b.var(VarRef::plain(1));
        let x2 = b.var(VarRef::plain(2));
        let x12 = b.product(vec![x1, x2]);
        let root = b.sum(vec![(r("1/4"), one), (r("-0.35"), x1), (r("-0.33"), x2), (r("0.45"), x12)]);
        let c = b.finish(root, Semantics::Fourier).unwrap();
        assert_eq!(dist_from(&c).unwrap(), fixtures::two_var_distribution());
    }

    #[test]
    fn uniform_spectrum_sits_on_the_empty_set() {
        let d = DistTable::uniform(1);
        assert_eq!(d.spectrum(), vec![Rational::new(1, 2), Rational::zero()]);
        // 2^-1 (1/2 + 1/2 (1 - 2 x1))
        assert_eq!(fourier_of(&d).to_string(), "1/2 - 1/2*x1");
    }

    #[test]
    fn point_mass_on_empty_set_fourier() {
        // 2^-2 (the S = {} term only): p^(x) = 1/4 for every x
        let p = fourier_of(&DistTable::point_mass(2, 0));
        assert_eq!(p, SparsePoly::constant(Rational::new(1, 4)));
        // S = {1, 2}: (1/4)(1 - 2x1)(1 - 2x2)
        let p = fourier_of(&DistTable::point_mass(2, 0b11));
        assert_eq!(p.coefficient(&Monomial::plain_subset(0b11)), Rational::one());
        assert_eq!(p.coefficient(&Monomial::plain_subset(0b01)), r("-1/2"));
    }

    #[test]
    fn spectrum_inverts() {
        let d = fixtures::two_var_distribution();
        let spectrum = d.spectrum();
        assert_eq!(spectrum, vec![r("1/4"), r("-1/10"), r("-0.08"), r("0.02")]);
        assert_eq!(DistTable::from_spectrum(2, &spectrum).unwrap(), d);
    }

    #[test]
    fn parity_reconstruction() {
        // p(x) = sum_S p^(v_S) prod_{i in S} (1 - 2 x_i) on {0,1}^n
        let d = fixtures::two_var_distribution();
        let spectrum = d.spectrum();
        for v in 0..4u64 {
            let total: Rational = spectrum
                .iter()
                .enumerate()
                .map(|(s, f)| {
                    let parity = (0..2).filter(|i| (s >> i) & 1 == 1 && (v >> i) & 1 == 1).count();
                    if parity % 2 == 0 {
                        f.clone()
                    } else {
                        -f
                    }
                })
                .sum();
            assert_eq!(&total, d.get(v));
        }
    }

    #[test]
    fn encodings_agree_with_flat_circuits() {
        let d = fixtures::two_var_distribution();
        for tag in Semantics::DISTRIBUTION_TAGS {
            let c = flat_circuit(tag, &d).unwrap();
            assert_eq!(expand(&c).unwrap(), encode_poly(tag, &d).unwrap(), "{tag}");
            assert_eq!(dist_from(&c).unwrap(), d, "{tag}");
        }
    }

    #[test]
    fn negative_mass_is_flagged() {
        let probs = vec![r("1/2"), r("-1/4"), r("1/2"), r("1/4")];
        let d = DistTable::new(2, probs).unwrap();
        let c = flat_circuit(Semantics::Generating, &d).unwrap();
        assert_eq!(dist_from(&c), Err(OracleError::NotADistribution(MassDefect::NegativeMass { subset: 1 })));
    }

    #[test]
    fn wrong_form_is_a_mismatch() {
        // x1 * x1 agrees with x1 on {0,1} but is not a likelihood polynomial
        let mut b = CircuitBuilder::new(1);
        let x = b.var(VarRef::plain(1));
        let sq = b.product(vec![x, x]);
        let one = b.one();
        let half = b.sum(vec![(r("1/2"), sq), (r("1/2"), one)]);
        let c = b.finish(half, Semantics::Likelihood).unwrap();
        assert!(matches!(dist_from(&c), Err(OracleError::SemanticsMismatch { .. })));
    }
}
