//! Marginal probabilities from circuits in the four inference-ready encodings.

use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::circuit::{Circuit, EvalError, Point, Semantics};
use crate::rational::Rational;
use crate::transform::{apply_edge, Edge, TransformError};

/// Evidence on one variable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Evidence {
    One,
    Zero,
    /// Summed out.
    Marg,
}

/// One evidence state per variable, written as `1`, `0` or `?` separated by spaces.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Query(pub Vec<Evidence>);

impl Query {
    pub fn all_marg(n: usize) -> Self {
        Query(alloc::vec![Evidence::Marg; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// All `3^n` queries, in base-3 counting order with the first variable fastest and
    /// digits `0 -> One`, `1 -> Zero`, `2 -> Marg`.
    pub fn enumerate(n: usize) -> impl Iterator<Item = Query> {
        let total = 3usize.pow(n as u32);
        (0..total).map(move |mut k| {
            let mut states = Vec::with_capacity(n);
            for _ in 0..n {
                states.push([Evidence::One, Evidence::Zero, Evidence::Marg][k % 3]);
                k /= 3;
            }
            Query(states)
        })
    }

    /// Bit masks of the variables set to one and to zero.
    pub fn masks(&self) -> (u64, u64) {
        let mut ones = 0;
        let mut zeros = 0;
        for (i, e) in self.0.iter().enumerate() {
            match e {
                Evidence::One => ones |= 1 << i,
                Evidence::Zero => zeros |= 1 << i,
                Evidence::Marg => {}
            }
        }
        (ones, zeros)
    }

    /// The same query with variable `i` (zero-based) set to `e`.
    pub fn with(&self, i: usize, e: Evidence) -> Query {
        let mut q = self.clone();
        q.0[i] = e;
        q
    }
}

impl fmt::Display for Query {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            f.write_str(match e {
                Evidence::One => "1",
                Evidence::Zero => "0",
                Evidence::Marg => "?",
            })?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("malformed query `{0}`: expected space-separated 1, 0 or ?")]
pub struct ParseQueryError(pub alloc::string::String);

impl FromStr for Query {
    type Err = ParseQueryError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.split_whitespace()
            .map(|t| match t {
                "1" => Some(Evidence::One),
                "0" => Some(Evidence::Zero),
                "?" => Some(Evidence::Marg),
                _ => None,
            })
            .collect::<Option<Vec<_>>>()
            .map(Query)
            .ok_or_else(|| ParseQueryError(s.into()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InferenceError {
    #[error("expected a {expected} circuit, found {found}")]
    SemanticsMismatch { expected: Semantics, found: Semantics },
    #[error("{0} circuits do not support marginal queries directly")]
    Unsupported(Semantics),
    #[error("query has {found} entries, circuit has {expected} variables")]
    QueryLength { expected: usize, found: usize },
    #[error("input contains division nodes")]
    HasDivisions,
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Transform(#[from] TransformError),
}

fn check(c: &Circuit, q: &Query, expected: Semantics) -> Result<(), InferenceError> {
    if c.semantics() != expected {
        return Err(InferenceError::SemanticsMismatch { expected, found: c.semantics() });
    }
    if c.has_divisions() {
        return Err(InferenceError::HasDivisions);
    }
    if q.len() != c.n() {
        return Err(InferenceError::QueryLength { expected: c.n(), found: q.len() });
    }
    Ok(())
}

fn int(v: i64) -> Rational {
    Rational::from_integer(v)
}

/// One pass with `x_i, ~x_i` set to `(1, 0)`, `(0, 1)` or `(1, 1)`.
pub fn marginal_network(c: &Circuit, q: &Query) -> Result<Rational, InferenceError> {
    check(c, q, Semantics::Network)?;
    let (plain, bar) =
        q.0.iter()
            .map(|e| match e {
                Evidence::One => (int(1), int(0)),
                Evidence::Zero => (int(0), int(1)),
                Evidence::Marg => (int(1), int(1)),
            })
            .unzip();
    Ok(c.evaluate(&Point::new(plain, bar))?)
}

/// One pass with `x_i` set to `1`, `0` or `1/2`, then scaled by `2^(#marginalized)`.
///
/// With `~x_i = 1 - x_i` the likelihood polynomial agrees with the network polynomial
/// divided by `prod (x_i + ~x_i)`, and that product is `1` at evidence and `2` at
/// `x_i = ~x_i = 1`, which `x_i = 1/2` stands in for after rescaling.
pub fn marginal_likelihood(c: &Circuit, q: &Query) -> Result<Rational, InferenceError> {
    check(c, q, Semantics::Likelihood)?;
    let mut marg = 0i32;
    let plain =
        q.0.iter()
            .map(|e| match e {
                Evidence::One => int(1),
                Evidence::Zero => int(0),
                Evidence::Marg => {
                    marg += 1;
                    Rational::new(1, 2)
                }
            })
            .collect();
    Ok(c.evaluate(&Point::plain(plain))? * Rational::pow2(marg))
}

/// Interpolation in one variable: with `x_i = z` on observed ones, `0` on observed zeros
/// and `1` on marginalized variables, the generating polynomial becomes a polynomial
/// `h(z)` of degree at most `|ones|`, whose leading coefficient is the marginal.
/// Evaluates `h` at `z = 0..=|ones|` and takes the leading Lagrange coefficient.
pub fn marginal_generating(c: &Circuit, q: &Query) -> Result<Rational, InferenceError> {
    check(c, q, Semantics::Generating)?;
    let m = q.0.iter().filter(|e| **e == Evidence::One).count();
    let mut values = Vec::with_capacity(m + 1);
    for z in 0..=m as i64 {
        let plain =
            q.0.iter()
                .map(|e| match e {
                    Evidence::One => int(z),
                    Evidence::Zero => int(0),
                    Evidence::Marg => int(1),
                })
                .collect();
        values.push(c.evaluate(&Point::plain(plain))?);
    }
    Ok(leading_coefficient(&values))
}

/// Leading coefficient of the degree-`m` polynomial through `(k, values[k])`,
/// `k = 0..=m`: `sum_k values[k] (-1)^(m-k) / (k! (m-k)!)`.
pub fn leading_coefficient(values: &[Rational]) -> Rational {
    let m = values.len() - 1;
    let mut factorial = alloc::vec![Rational::one(); m + 1];
    for k in 1..=m {
        factorial[k] = &factorial[k - 1] * &int(k as i64);
    }
    values
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let denom = &factorial[k] * &factorial[m - k];
            let term = v.checked_div(&denom).expect("factorials are nonzero");
            if (m - k) % 2 == 1 {
                -term
            } else {
                term
            }
        })
        .sum()
}

/// Rewrites to the generating polynomial (edge 11) and interpolates.
pub fn marginal_fourier(c: &Circuit, q: &Query) -> Result<Rational, InferenceError> {
    check(c, q, Semantics::Fourier)?;
    let g = apply_edge(c, Edge::new(11).expect("edge 11"))?;
    marginal_generating(&g, q)
}

/// Dispatches on the circuit's tag.
pub fn marginal(c: &Circuit, q: &Query) -> Result<Rational, InferenceError> {
    match c.semantics() {
        Semantics::Network => marginal_network(c, q),
        Semantics::Likelihood => marginal_likelihood(c, q),
        Semantics::Generating => marginal_generating(c, q),
        Semantics::Fourier => marginal_fourier(c, q),
        other => Err(InferenceError::Unsupported(other)),
    }
}

/// Transforms once for a batch of queries: likelihood and generating circuits become
/// network circuits (edges 4 and 1), Fourier circuits become generating circuits
/// (edge 11). Other tags are returned unchanged.
pub fn compile_for_queries(c: &Circuit) -> Result<Circuit, InferenceError> {
    let edge = match c.semantics() {
        Semantics::Likelihood => 4,
        Semantics::Generating => 1,
        Semantics::Fourier => 11,
        _ => return Ok(c.clone()),
    };
    Ok(apply_edge(c, Edge::new(edge).expect("valid edge"))?)
}
