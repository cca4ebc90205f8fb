//! Polynomial identity testing for division-free circuits.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::circuit::{Circuit, ModPoint, Point, VarRef};
use crate::field::MERSENNE_61;
use crate::rational::Rational;

use super::poly::{expand, SparsePoly};
use super::OracleError;

/// Default number of random evaluations in probabilistic mode.
pub const DEFAULT_TRIALS: u32 = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IdentityMode {
    /// Expand both circuits and compare coefficient maps.
    Exact,
    /// Compare residues modulo 2^61 - 1 at `trials` uniformly random points drawn from a
    /// generator seeded with `seed`.
    Probabilistic { trials: u32, seed: u64 },
}

/// A point at which two circuits were seen to differ.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Counterexample {
    Rational(Point),
    Modular(ModPoint),
}

fn write_point<T: core::fmt::Display>(f: &mut core::fmt::Formatter<'_>, point: &Point<T>) -> core::fmt::Result {
    let plain = point.plain.iter().enumerate().map(|(i, v)| (VarRef::plain(i as u32 + 1), v));
    let bar = point.bar.iter().enumerate().map(|(i, v)| (VarRef::bar(i as u32 + 1), v));
    for (k, (var, v)) in plain.chain(bar).enumerate() {
        if k > 0 {
            f.write_str(", ")?;
        }
        write!(f, "{var}={v}")?;
    }
    Ok(())
}

impl core::fmt::Display for Counterexample {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            Counterexample::Rational(p) => write_point(f, p),
            Counterexample::Modular(p) => {
                write_point(f, p)?;
                f.write_str(" (mod 2^61 - 1)")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IdentityReport {
    pub identical: bool,
    /// Present whenever `identical` is false and a separating point was found.
    pub witness: Option<Counterexample>,
}

impl IdentityReport {
    fn equal() -> Self {
        IdentityReport { identical: true, witness: None }
    }
}

pub fn identical(a: &Circuit, b: &Circuit, mode: IdentityMode) -> Result<IdentityReport, OracleError> {
    match mode {
        IdentityMode::Exact => identical_exact(a, b),
        IdentityMode::Probabilistic { trials, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            identical_probabilistic(a, b, trials, &mut rng)
        }
    }
}

pub fn identical_exact(a: &Circuit, b: &Circuit) -> Result<IdentityReport, OracleError> {
    let diff = expand(a)?.sub(&expand(b)?);
    if diff.is_zero() {
        return Ok(IdentityReport::equal());
    }
    let n = a.n().max(b.n());
    Ok(IdentityReport { identical: false, witness: separating_point(&diff, n).map(Counterexample::Rational) })
}

pub fn identical_probabilistic<R: Rng + ?Sized>(
    a: &Circuit,
    b: &Circuit,
    trials: u32,
    rng: &mut R,
) -> Result<IdentityReport, OracleError> {
    let n = a.n().max(b.n());
    let p = MERSENNE_61;
    for _ in 0..trials {
        let point = ModPoint::new(
            (0..n).map(|_| rng.random_range(0..p)).collect(),
            (0..n).map(|_| rng.random_range(0..p)).collect(),
        );
        let va = a.evaluate_mod(&point, p).map_err(OracleError::Eval)?;
        let vb = b.evaluate_mod(&point, p).map_err(OracleError::Eval)?;
        if va != vb {
            return Ok(IdentityReport { identical: false, witness: Some(Counterexample::Modular(point)) });
        }
    }
    Ok(IdentityReport::equal())
}

/// A small integer point where the nonzero polynomial `diff` does not vanish.
///
/// Tries the diagonal points `(t, ..., t)` for small `t` first, then pseudo-random points
/// from a grid wider than the degree, where each try succeeds with probability above 1/2.
pub fn separating_point(diff: &SparsePoly, n: usize) -> Option<Point> {
    let check = |point: Point| match diff.eval(&point) {
        Ok(v) if !v.is_zero() => Some(point),
        _ => None,
    };
    for t in 2..6 {
        let v = Rational::from_integer(t);
        if let Some(p) = check(Point::constant(n, &v)) {
            return Some(p);
        }
    }
    let width = 2 * diff.degree().unwrap_or(0) as i64 + 2;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for _ in 0..128 {
        let mut coord =
            || -> Vec<Rational> { (0..n).map(|_| Rational::from_integer(rng.random_range(0..width))).collect() };
        let plain = coord();
        let bar = coord();
        if let Some(p) = check(Point::new(plain, bar)) {
            return Some(p);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::{CircuitBuilder, Semantics, VarRef};
    use crate::fixtures;

    #[test]
    fn rebuilt_circuit_is_identical() {
        let c = fixtures::two_var_likelihood();
        let mut b = CircuitBuilder::new(2);
        let map = b.import(&c);
        let again = b.finish(map[c.root().index()], Semantics::Likelihood).unwrap();
        for mode in [IdentityMode::Exact, IdentityMode::Probabilistic { trials: 8, seed: 1 }] {
            assert!(identical(&c, &again, mode).unwrap().identical);
        }
    }

    #[test]
    fn square_differs_from_linear_at_two() {
        let mut b = CircuitBuilder::new(1);
        let x = b.var(VarRef::plain(1));
        let lin = b.finish(x, Semantics::Raw).unwrap();
        let sq = b.product(alloc::vec![x, x]);
        let sq = b.finish(sq, Semantics::Raw).unwrap();
        let report = identical(&lin, &sq, IdentityMode::Exact).unwrap();
        assert!(!report.identical);
        match report.witness {
            Some(Counterexample::Rational(point)) => {
                assert_eq!(point.plain, alloc::vec![Rational::from_integer(2)]);
                assert_eq!(Counterexample::Rational(point).to_string(), "x1=2, ~x1=2");
            }
            other => panic!("unexpected witness {other:?}"),
        }
        let report = identical(&lin, &sq, IdentityMode::Probabilistic { trials: 8, seed: 3 }).unwrap();
        assert!(!report.identical);
        assert!(matches!(report.witness, Some(Counterexample::Modular(_))));
    }

    #[test]
    fn diagonal_blind_spot_still_separated() {
        // x1 - x2 vanishes on every diagonal point
        let mut diff = SparsePoly::var(VarRef::plain(1));
        diff = diff.sub(&SparsePoly::var(VarRef::plain(2)));
        let p = separating_point(&diff, 2).unwrap();
        assert!(!diff.eval(&p).unwrap().is_zero());
    }
}
