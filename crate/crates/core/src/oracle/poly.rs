//! Canonical sparse polynomials over the rationals.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::fmt;

use crate::circuit::{
    Circuit, CircuitBuilder, CircuitError, EvalError, Interpretation, NodeId, Point, Polarity, Semantics, VarRef,
};
use crate::rational::Rational;

use super::OracleError;

/// Default cap on the number of terms any intermediate expansion may hold.
pub const DEFAULT_TERM_CAP: usize = 1 << 20;

/// Exponent vector over interleaved slots `x1, ~x1, x2, ~x2, ...`, trailing zeros trimmed.
#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct Monomial(Vec<u32>);

fn slot(var: VarRef) -> usize {
    2 * (var.index as usize - 1) + usize::from(var.polarity == Polarity::Bar)
}

fn var_of_slot(slot: usize) -> VarRef {
    let index = (slot / 2 + 1) as u32;
    if slot.is_multiple_of(2) {
        VarRef::plain(index)
    } else {
        VarRef::bar(index)
    }
}

impl Monomial {
    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(var: VarRef) -> Self {
        Monomial::one().times_var(var, 1)
    }

    /// Builds a monomial from `(variable, exponent)` pairs.
    pub fn from_powers(powers: impl IntoIterator<Item = (VarRef, u32)>) -> Self {
        powers.into_iter().fold(Monomial::one(), |m, (v, e)| m.times_var(v, e))
    }

    /// `prod_{i in S} x_i` for the subset encoded by `mask` (bit `i - 1` for index `i`).
    pub fn plain_subset(mask: u64) -> Self {
        Monomial::from_powers((0..64).filter(|b| mask >> b & 1 == 1).map(|b| (VarRef::plain(b + 1), 1)))
    }

    /// `prod_{i in S} x_i prod_{i not in S} ~x_i` over indices `1..=n`.
    pub fn indicator(n: usize, mask: u64) -> Self {
        Monomial::from_powers((0..n as u32).map(|b| {
            let v = if mask >> b & 1 == 1 { VarRef::plain(b + 1) } else { VarRef::bar(b + 1) };
            (v, 1)
        }))
    }

    pub fn times_var(mut self, var: VarRef, exp: u32) -> Self {
        if exp == 0 {
            return self;
        }
        let s = slot(var);
        if self.0.len() <= s {
            self.0.resize(s + 1, 0);
        }
        self.0[s] += exp;
        self
    }

    pub fn exponent(&self, var: VarRef) -> u32 {
        self.0.get(slot(var)).copied().unwrap_or(0)
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    pub fn max_exponent(&self) -> u32 {
        self.0.iter().copied().max().unwrap_or(0)
    }

    /// `(variable, exponent)` pairs with nonzero exponent, in slot order.
    pub fn powers(&self) -> impl Iterator<Item = (VarRef, u32)> + '_ {
        self.0.iter().enumerate().filter(|(_, e)| **e > 0).map(|(s, e)| (var_of_slot(s), *e))
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let (long, short) = if self.0.len() >= other.0.len() { (self, other) } else { (other, self) };
        let mut exps = long.0.clone();
        for (a, b) in exps.iter_mut().zip(&short.0) {
            *a += b;
        }
        Monomial(exps)
    }

    /// Whether `self` divides `other`.
    pub fn divides(&self, other: &Monomial) -> bool {
        self.0.iter().enumerate().all(|(s, e)| *e <= other.0.get(s).copied().unwrap_or(0))
    }

    pub fn eval(&self, point: &Point) -> Result<Rational, EvalError> {
        let mut acc = Rational::one();
        for (var, exp) in self.powers() {
            let value = point.get(var).ok_or(EvalError::MissingValue(var))?;
            acc *= value.pow(exp);
        }
        Ok(acc)
    }
}

/// Graded order: lower total degree first, then `x1` before `x2` before `~x1`-heavy terms.
impl Ord for Monomial {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree().cmp(&other.degree()).then_with(|| {
            let len = self.0.len().max(other.0.len());
            for s in 0..len {
                let a = self.0.get(s).copied().unwrap_or(0);
                let b = other.0.get(s).copied().unwrap_or(0);
                if a != b {
                    return b.cmp(&a);
                }
            }
            Ordering::Equal
        })
    }
}

impl PartialOrd for Monomial {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (var, exp) in self.powers() {
            if !first {
                f.write_str("*")?;
            }
            first = false;
            write!(f, "{var}")?;
            if exp > 1 {
                write!(f, "^{exp}")?;
            }
        }
        if first {
            f.write_str("1")?;
        }
        Ok(())
    }
}

impl fmt::Debug for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Unordered running sum of terms; cheaper than inserting into the ordered map one by one.
#[derive(Default)]
struct Accumulator(hashbrown::HashMap<Monomial, Rational>);

impl Accumulator {
    fn add(&mut self, m: Monomial, coefficient: Rational) {
        match self.0.entry(m) {
            hashbrown::hash_map::Entry::Vacant(e) => {
                e.insert(coefficient);
            }
            hashbrown::hash_map::Entry::Occupied(mut e) => {
                *e.get_mut() += coefficient;
            }
        }
    }

    fn len(&self) -> usize {
        self.0.len()
    }

    fn finish(self) -> SparsePoly {
        let mut terms: Vec<(Monomial, Rational)> = self.0.into_iter().filter(|(_, c)| !c.is_zero()).collect();
        terms.sort_unstable_by(|a, b| a.0.cmp(&b.0));
        SparsePoly { terms: terms.into_iter().collect() }
    }
}

/// A polynomial as a map from monomials to nonzero rational coefficients.
#[derive(Clone, PartialEq, Eq, Default, Hash)]
pub struct SparsePoly {
    terms: BTreeMap<Monomial, Rational>,
}

impl SparsePoly {
    pub fn zero() -> Self {
        SparsePoly::default()
    }

    pub fn constant(value: Rational) -> Self {
        SparsePoly::monomial(Monomial::one(), value)
    }

    pub fn var(var: VarRef) -> Self {
        SparsePoly::monomial(Monomial::var(var), Rational::one())
    }

    pub fn monomial(m: Monomial, coefficient: Rational) -> Self {
        let mut p = SparsePoly::zero();
        p.add_term(m, coefficient);
        p
    }

    pub fn from_terms(terms: impl IntoIterator<Item = (Monomial, Rational)>) -> Self {
        let mut p = SparsePoly::zero();
        for (m, c) in terms {
            p.add_term(m, c);
        }
        p
    }

    pub fn add_term(&mut self, m: Monomial, coefficient: Rational) {
        if coefficient.is_zero() {
            return;
        }
        match self.terms.entry(m) {
            alloc::collections::btree_map::Entry::Vacant(e) => {
                e.insert(coefficient);
            }
            alloc::collections::btree_map::Entry::Occupied(mut e) => {
                *e.get_mut() += coefficient;
                if e.get().is_zero() {
                    e.remove();
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &Rational)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, m: &Monomial) -> Rational {
        self.terms.get(m).cloned().unwrap_or_else(Rational::zero)
    }

    pub fn constant_term(&self) -> Rational {
        self.coefficient(&Monomial::one())
    }

    pub fn is_multilinear(&self) -> bool {
        self.terms.keys().all(|m| m.max_exponent() <= 1)
    }

    /// Total degree; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(Monomial::degree).max()
    }

    pub fn degree_in(&self, var: VarRef) -> u32 {
        self.terms.keys().map(|m| m.exponent(var)).max().unwrap_or(0)
    }

    pub fn homogeneous_part(&self, degree: u32) -> SparsePoly {
        SparsePoly {
            terms: self
                .terms
                .iter()
                .filter(|(m, _)| m.degree() == degree)
                .map(|(m, c)| (m.clone(), c.clone()))
                .collect(),
        }
    }

    pub fn add(&self, other: &SparsePoly) -> SparsePoly {
        let mut out = self.clone();
        for (m, c) in &other.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }

    pub fn sub(&self, other: &SparsePoly) -> SparsePoly {
        self.add(&other.scale(&-Rational::one()))
    }

    pub fn scale(&self, factor: &Rational) -> SparsePoly {
        if factor.is_zero() {
            return SparsePoly::zero();
        }
        SparsePoly { terms: self.terms.iter().map(|(m, c)| (m.clone(), c * factor)).collect() }
    }

    /// Product, failing once the result would exceed `cap` terms.
    pub fn mul_capped(&self, other: &SparsePoly, cap: usize) -> Result<SparsePoly, OracleError> {
        let mut out = Accumulator::default();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &other.terms {
                out.add(ma.mul(mb), ca * cb);
            }
            if out.len() > cap {
                return Err(OracleError::TermBlowup { cap });
            }
        }
        let out = out.finish();
        if out.num_terms() > cap {
            return Err(OracleError::TermBlowup { cap });
        }
        Ok(out)
    }

    pub fn mul(&self, other: &SparsePoly) -> SparsePoly {
        self.mul_capped(other, usize::MAX).expect("uncapped")
    }

    pub fn eval(&self, point: &Point) -> Result<Rational, EvalError> {
        let mut acc = Rational::zero();
        for (m, c) in &self.terms {
            acc += c * &m.eval(point)?;
        }
        Ok(acc)
    }

    /// Drops every term whose monomial does not divide `bound`.
    pub fn retain_dividing(&mut self, bound: &Monomial) {
        self.terms.retain(|m, _| m.divides(bound));
    }
}

impl fmt::Display for SparsePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (k, (m, c)) in self.terms.iter().enumerate() {
            let magnitude = c.abs();
            match (k, c.is_negative()) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            if m.degree() == 0 {
                write!(f, "{magnitude}")?;
            } else if magnitude.is_one() {
                write!(f, "{m}")?;
            } else {
                write!(f, "{magnitude}*{m}")?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed polynomial at byte {offset}: {reason}")]
pub struct ParsePolyError {
    pub offset: usize,
    pub reason: &'static str,
}

/// Reads sums of terms such as `0.08x1x2 + 0.16x1 - 3/4*~x2^2 + 0.09`: an optional
/// rational coefficient followed by factors `x<i>` or `~x<i>`, each with an optional
/// `^<exp>`, separated by optional `*`. Whitespace is ignored.
impl core::str::FromStr for SparsePoly {
    type Err = ParsePolyError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let text: Vec<(usize, char)> = s.char_indices().filter(|(_, ch)| !ch.is_whitespace()).collect();
        let numeric = |ch: char| ch.is_ascii_digit() || ch == '.';
        if let Some(w) = text.windows(2).find(|w| w[1].0 > w[0].0 + 1 && numeric(w[0].1) && numeric(w[1].1)) {
            return Err(ParsePolyError { offset: w[1].0, reason: "space inside a number" });
        }
        let fail = |pos: usize, reason| ParsePolyError { offset: text.get(pos).map_or(s.len(), |(o, _)| *o), reason };
        let digits_from = |mut pos: usize| {
            let start = pos;
            while pos < text.len() && text[pos].1.is_ascii_digit() {
                pos += 1;
            }
            (text[start..pos].iter().map(|(_, ch)| *ch).collect::<alloc::string::String>(), pos)
        };
        let mut out = SparsePoly::zero();
        let mut pos = 0;
        if text.is_empty() {
            return Err(fail(0, "empty input"));
        }
        while pos < text.len() {
            let mut negative = false;
            while pos < text.len() && matches!(text[pos].1, '+' | '-') {
                negative ^= text[pos].1 == '-';
                pos += 1;
            }
            let start = pos;
            while pos < text.len() && (text[pos].1.is_ascii_digit() || matches!(text[pos].1, '.' | '/')) {
                pos += 1;
            }
            let literal: alloc::string::String = text[start..pos].iter().map(|(_, ch)| *ch).collect();
            let mut coefficient = if literal.is_empty() {
                Rational::one()
            } else {
                literal.parse::<Rational>().map_err(|_| fail(start, "bad coefficient"))?
            };
            if negative {
                coefficient = -coefficient;
            }
            let mut monomial = Monomial::one();
            let mut factors = 0;
            loop {
                if pos < text.len() && text[pos].1 == '*' {
                    pos += 1;
                }
                let bar = pos < text.len() && text[pos].1 == '~';
                if bar {
                    pos += 1;
                }
                if pos >= text.len() || text[pos].1 != 'x' {
                    if bar || (pos > 0 && text[pos - 1].1 == '*') {
                        return Err(fail(pos, "expected a variable"));
                    }
                    break;
                }
                let (index, next) = digits_from(pos + 1);
                let index: u32 =
                    index.parse().ok().filter(|i| *i > 0).ok_or_else(|| fail(pos + 1, "bad variable index"))?;
                pos = next;
                let mut exp = 1;
                if pos < text.len() && text[pos].1 == '^' {
                    let (e, next) = digits_from(pos + 1);
                    exp = e.parse().map_err(|_| fail(pos + 1, "bad exponent"))?;
                    pos = next;
                }
                let var = if bar { VarRef::bar(index) } else { VarRef::plain(index) };
                monomial = monomial.times_var(var, exp);
                factors += 1;
            }
            if literal.is_empty() && factors == 0 {
                return Err(fail(pos, "expected a term"));
            }
            out.add_term(monomial, coefficient);
            if pos < text.len() && !matches!(text[pos].1, '+' | '-') {
                return Err(fail(pos, "unexpected character"));
            }
        }
        Ok(out)
    }
}

impl SparsePoly {
    /// Largest variable index that appears, or 0.
    pub fn num_vars(&self) -> usize {
        self.terms.keys().flat_map(|m| m.powers().map(|(v, _)| v.index as usize)).max().unwrap_or(0)
    }

    /// A flat circuit: one product per term, powers written as repeated factors.
    pub fn to_circuit(&self, n: usize, semantics: Semantics) -> Result<Circuit, CircuitError> {
        let mut b = CircuitBuilder::new(n);
        let mut terms = Vec::new();
        for (m, c) in &self.terms {
            let mut factors = Vec::new();
            for (var, exp) in m.powers() {
                let leaf = b.var(var);
                factors.extend(core::iter::repeat_n(leaf, exp as usize));
            }
            let node = match factors.len() {
                0 => b.one(),
                1 => factors[0],
                _ => b.product(factors),
            };
            terms.push((c.clone(), node));
        }
        let root = if terms.is_empty() { b.constant(Rational::zero()) } else { b.sum(terms) };
        b.finish(root, semantics)
    }
}

impl fmt::Debug for SparsePoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

struct Expand {
    cap: usize,
    /// When set, terms not dividing this monomial are dropped at every node.
    bound: Option<Monomial>,
}

impl Expand {
    fn trim(&self, mut p: SparsePoly) -> SparsePoly {
        if let Some(bound) = &self.bound {
            p.retain_dividing(bound);
        }
        p
    }
}

impl Interpretation for Expand {
    type Value = SparsePoly;
    type Error = OracleError;

    fn var(&mut self, _: NodeId, var: VarRef) -> Result<SparsePoly, OracleError> {
        Ok(self.trim(SparsePoly::var(var)))
    }

    fn constant(&mut self, _: NodeId, value: &Rational) -> Result<SparsePoly, OracleError> {
        Ok(SparsePoly::constant(value.clone()))
    }

    fn sum(
        &mut self,
        _: NodeId,
        terms: &mut dyn Iterator<Item = (&Rational, &SparsePoly)>,
    ) -> Result<SparsePoly, OracleError> {
        let mut acc = Accumulator::default();
        for (w, p) in terms {
            for (m, c) in p.terms() {
                acc.add(m.clone(), w * c);
            }
            if acc.len() > self.cap {
                return Err(OracleError::TermBlowup { cap: self.cap });
            }
        }
        Ok(acc.finish())
    }

    fn product(
        &mut self,
        _: NodeId,
        factors: &mut dyn Iterator<Item = &SparsePoly>,
    ) -> Result<SparsePoly, OracleError> {
        let mut acc = SparsePoly::constant(Rational::one());
        for p in factors {
            acc = self.trim(acc.mul_capped(p, self.cap)?);
            if acc.is_zero() {
                break;
            }
        }
        Ok(acc)
    }

    fn div(&mut self, node: NodeId, _: &SparsePoly, _: &SparsePoly) -> Result<SparsePoly, OracleError> {
        Err(OracleError::Eval(EvalError::DivisionUnsupported(node)))
    }
}

/// Expands a division-free circuit into its polynomial.
pub fn expand(c: &Circuit) -> Result<SparsePoly, OracleError> {
    expand_capped(c, DEFAULT_TERM_CAP)
}

pub fn expand_capped(c: &Circuit, cap: usize) -> Result<SparsePoly, OracleError> {
    c.interpret(&mut Expand { cap, bound: None })
}

/// Expansion restricted to the monomials dividing `bound`.
///
/// Truncation commutes with sums and products, so the coefficient of any monomial dividing
/// `bound` is exact.
pub fn expand_dividing(c: &Circuit, bound: &Monomial, cap: usize) -> Result<SparsePoly, OracleError> {
    c.interpret(&mut Expand { cap, bound: Some(bound.clone()) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{CircuitBuilder, Semantics};
    use crate::fixtures;

    fn r(s: &str) -> Rational {
        s.parse().unwrap()
    }

    #[test]
    fn two_var_expansion() {
        let p = expand(&fixtures::two_var_likelihood()).unwrap();
        let x1 = VarRef::plain(1);
        let x2 = VarRef::plain(2);
        let expected = SparsePoly::from_terms([
            (Monomial::from_powers([(x1, 1), (x2, 1)]), r("0.08")),
            (Monomial::var(x1), r("0.16")),
            (Monomial::var(x2), r("0.12")),
            (Monomial::one(), r("0.09")),
        ]);
        assert_eq!(p, expected);
        assert_eq!(alloc::format!("{p}"), "9/100 + 4/25*x1 + 3/25*x2 + 2/25*x1*x2");
    }

    #[test]
    fn zero_annihilates() {
        let mut b = CircuitBuilder::new(2);
        let z = b.constant(Rational::zero());
        let x = b.var(VarRef::plain(1));
        let p = b.product(vec![z, x]);
        let c = b.finish(p, Semantics::Raw).unwrap();
        assert!(expand(&c).unwrap().is_zero());
    }

    #[test]
    fn indicator_pairs_expand_to_four_monomials() {
        let mut b = CircuitBuilder::new(2);
        let mut factors = alloc::vec::Vec::new();
        for i in 1..=2 {
            let x = b.var(VarRef::plain(i));
            let nx = b.var(VarRef::bar(i));
            factors.push(b.sum(alloc::vec![(Rational::one(), x), (Rational::one(), nx)]));
        }
        let root = b.product(factors);
        let c = b.finish(root, Semantics::Network).unwrap();
        let p = expand(&c).unwrap();
        assert_eq!(p.num_terms(), 4);
        assert!(p.terms().all(|(_, c)| c.is_one()));
        // cross-check against evaluation on the 3^4 grid {0, 1, 2}
        for code in 0..81u32 {
            let digit = |k: u32| Rational::from_integer((code / 3u32.pow(k) % 3) as i64);
            let point = Point::new(alloc::vec![digit(0), digit(1)], alloc::vec![digit(2), digit(3)]);
            assert_eq!(p.eval(&point).unwrap(), c.evaluate(&point).unwrap());
        }
    }

    #[test]
    fn term_cap_is_enforced() {
        let mut b = CircuitBuilder::new(8);
        let factors = (1..=8)
            .map(|i| {
                let x = b.var(VarRef::plain(i));
                b.affine(Rational::one(), Rational::one(), x)
            })
            .collect();
        let root = b.product(factors);
        let c = b.finish(root, Semantics::Raw).unwrap();
        assert_eq!(expand(&c).unwrap().num_terms(), 256);
        assert!(matches!(expand_capped(&c, 100), Err(OracleError::TermBlowup { cap: 100 })));
    }

    #[test]
    fn monomial_order_is_graded() {
        let x1 = Monomial::var(VarRef::plain(1));
        let x2 = Monomial::var(VarRef::plain(2));
        let nx1 = Monomial::var(VarRef::bar(1));
        assert!(Monomial::one() < x1);
        assert!(x1 < nx1);
        assert!(nx1 < x2);
        assert!(x2 < x1.mul(&x2));
    }

    #[test]
    fn dividing_expansion_keeps_target_coefficient() {
        let mut b = CircuitBuilder::new(2);
        let x1 = b.var(VarRef::plain(1));
        let x2 = b.var(VarRef::plain(2));
        let s = b.sum(alloc::vec![(Rational::one(), x1), (Rational::one(), x2)]);
        let sq = b.product(alloc::vec![s, s]);
        let c = b.finish(sq, Semantics::Raw).unwrap();
        let target = Monomial::plain_subset(0b11);
        let p = expand_dividing(&c, &target, DEFAULT_TERM_CAP).unwrap();
        assert_eq!(p.coefficient(&target), Rational::from_integer(2));
        assert!(p.terms().all(|(m, _)| m.max_exponent() <= 1));
    }

    #[test]
    fn parses_decimal_text() {
        let p: SparsePoly = "0.08x1x2 + 0.16x1 + 0.12 x2 + 0.09".parse().unwrap();
        assert_eq!(p, expand(&fixtures::two_var_likelihood()).unwrap());
        let q: SparsePoly = "9/20*x1*x2 + 1/4*x1*~x2 - x1^2 + -2".parse().unwrap();
        assert_eq!(q.to_string(), "-2 - x1^2 + 9/20*x1*x2 + 1/4*x1*~x2");
        assert_eq!(q.to_string().parse::<SparsePoly>().unwrap(), q);
        assert_eq!(q.num_vars(), 2);
        for bad in ["", "x", "x0", "3 4", "2*", "~3", "x1^"] {
            assert!(bad.parse::<SparsePoly>().is_err(), "{bad}");
        }
    }

    #[test]
    fn flat_circuit_from_polynomial() {
        let q: SparsePoly = "3*x1^2*x2 - 1".parse().unwrap();
        let c = q.to_circuit(2, Semantics::Raw).unwrap();
        assert_eq!(expand(&c).unwrap(), q);
    }
}
