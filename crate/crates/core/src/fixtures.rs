//! Small worked examples used by tests and documentation.

use alloc::vec;

use crate::circuit::{Circuit, CircuitBuilder, Semantics, VarRef};
use crate::hardness::IntMatrix;
use crate::oracle::DistTable;
use crate::rational::Rational;

/// Likelihood circuit for `p(x) = 0.08 x1 x2 + 0.16 x1 + 0.12 x2 + 0.09`, written as
/// `x2 (0.08 x1 + 0.12) + (0.16 x1 + 0.09)`.
pub fn two_var_likelihood() -> Circuit {
    let mut b = CircuitBuilder::new(2);
    let x1 = b.var(VarRef::plain(1));
    let x2 = b.var(VarRef::plain(2));
    let one = b.one();
    let inner = b.sum(vec![(Rational::new(8, 100), x1), (Rational::new(12, 100), one)]);
    let left = b.product(vec![x2, inner]);
    let right = b.sum(vec![(Rational::new(16, 100), x1), (Rational::new(9, 100), one)]);
    let root = b.sum(vec![(Rational::one(), left), (Rational::one(), right)]);
    b.finish(root, Semantics::Likelihood).expect("fixture is well formed")
}

/// The distribution of [`two_var_likelihood`]: masses 9/100, 25/100, 21/100, 45/100 on
/// `{}`, `{1}`, `{2}`, `{1,2}`.
pub fn two_var_distribution() -> DistTable {
    DistTable::new(
        2,
        vec![Rational::new(9, 100), Rational::new(25, 100), Rational::new(21, 100), Rational::new(45, 100)],
    )
    .expect("four entries")
}

/// A 4x4 matrix whose only nonzero column is the second, which is all ones.
pub fn single_column_matrix() -> IntMatrix {
    IntMatrix::from_rows(&[&[0, 1, 0, 0], &[0, 1, 0, 0], &[0, 1, 0, 0], &[0, 1, 0, 0]])
}
