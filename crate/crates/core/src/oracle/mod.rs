//! Brute-force ground truth: expansion to sparse polynomials, distribution tables,
//! identity testing and permanents.

mod dist;
mod identity;
mod permanent;
mod poly;

use crate::circuit::{EvalError, Semantics};
use crate::rational::Rational;

pub use dist::{dist_from, dist_from_with, encode_poly, flat_circuit, fourier_of, DistTable, Verify};
pub use identity::{
    identical, identical_exact, identical_probabilistic, separating_point, Counterexample, IdentityMode,
    IdentityReport, DEFAULT_TRIALS,
};
pub use permanent::{contributing_permutations, permanent, permanent_by_enumeration, permanent_ryser};
pub use poly::{expand, expand_capped, expand_dividing, Monomial, SparsePoly, DEFAULT_TERM_CAP};

/// Why a table fails to be a probability distribution.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MassDefect {
    /// The subset (as a bit mask) carrying negative mass.
    NegativeMass {
        subset: u64,
    },
    MassSum {
        total: Rational,
    },
}

impl core::fmt::Display for MassDefect {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        match self {
            MassDefect::NegativeMass { subset } => {
                write!(f, "negative mass on subset {}", crate::circuit::ScopeSet::from_mask(*subset))
            }
            MassDefect::MassSum { total } => write!(f, "masses sum to {total}, not 1"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum OracleError {
    #[error("expansion exceeded {cap} terms")]
    TermBlowup { cap: usize },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("a table over {n} variables needs 2^{n} entries, got {len}")]
    TableLength { n: usize, len: usize },
    #[error("semantics {0} does not encode a binary distribution")]
    UnsupportedSemantics(Semantics),
    #[error("circuit does not have the form of a {semantics} polynomial")]
    SemanticsMismatch { semantics: Semantics, witness: Option<Counterexample> },
    #[error("not a distribution: {0}")]
    NotADistribution(MassDefect),
}
