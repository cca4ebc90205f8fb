//! Likelihoods of categorical generating circuits encode matrix permanents.
//!
//! A 0/1 matrix is first made column-sparse (at most three ones per column) without
//! changing its permanent. The product of row sums `prod_i sum_j M[i,j] x_j` is then a
//! generating polynomial with per-variable degree at most 3, i.e. a valid 4-category PGC,
//! whose coefficient of `x_1 ... x_n` is the permanent.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::circuit::{Circuit, CircuitBuilder, Node, NodeId, Semantics, VarRef};
use crate::oracle::{expand_dividing, Monomial, OracleError, SparsePoly};
use crate::rational::Rational;

/// Most ones a column may hold for the product-of-sums circuit to have degree at most 3.
pub const MAX_COLUMN_ONES: usize = 3;

/// Square 0/1 matrix, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct IntMatrix {
    order: usize,
    entries: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MatrixError {
    #[error("row {row} has {len} entries, expected {order}")]
    NotSquare { row: usize, len: usize, order: usize },
    #[error("entry `{token}` in row {row} is not 0 or 1")]
    BadEntry { row: usize, token: String },
}

impl IntMatrix {
    pub fn zeros(order: usize) -> Self {
        IntMatrix { order, entries: vec![0; order * order] }
    }

    pub fn identity(order: usize) -> Self {
        let mut m = Self::zeros(order);
        for i in 0..order {
            m.set(i, i, 1);
        }
        m
    }

    pub fn all_ones(order: usize) -> Self {
        IntMatrix { order, entries: vec![1; order * order] }
    }

    /// Builds a matrix from rows; panics if they are not square or not 0/1.
    pub fn from_rows(rows: &[&[u8]]) -> Self {
        let order = rows.len();
        let mut m = Self::zeros(order);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), order, "row {i} has the wrong length");
            for (j, &e) in row.iter().enumerate() {
                assert!(e <= 1, "entries must be 0 or 1");
                m.set(i, j, e);
            }
        }
        m
    }

    /// The matrix whose entries are the bits of `bits`, row-major, least significant first.
    pub fn from_bits(order: usize, bits: u64) -> Self {
        let mut m = Self::zeros(order);
        for k in 0..order * order {
            m.entries[k] = (bits >> k & 1) as u8;
        }
        m
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.entries[row * self.order + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        debug_assert!(value <= 1);
        self.entries[row * self.order + col] = value;
    }

    pub fn column_count(&self, col: usize) -> usize {
        (0..self.order).filter(|&i| self.get(i, col) != 0).count()
    }

    pub fn max_column_count(&self) -> usize {
        (0..self.order).map(|j| self.column_count(j)).max().unwrap_or(0)
    }

    /// A copy with one extra all-zero row and column.
    fn grown(&self) -> IntMatrix {
        let mut m = Self::zeros(self.order + 1);
        for i in 0..self.order {
            for j in 0..self.order {
                m.set(i, j, self.get(i, j));
            }
        }
        m
    }
}

impl fmt::Display for IntMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.order {
            for j in 0..self.order {
                if j > 0 {
                    f.write_str(" ")?;
                }
                write!(f, "{}", self.get(i, j))?;
            }
            f.write_str("\n")?;
        }
        Ok(())
    }
}

impl FromStr for IntMatrix {
    type Err = MatrixError;

    /// Whitespace-separated rows, one per non-blank line.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let rows: Vec<Vec<&str>> =
            s.lines().map(|l| l.split_whitespace().collect::<Vec<_>>()).filter(|r| !r.is_empty()).collect();
        let order = rows.len();
        let mut m = Self::zeros(order);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != order {
                return Err(MatrixError::NotSquare { row: i + 1, len: row.len(), order });
            }
            for (j, token) in row.iter().enumerate() {
                let e = match *token {
                    "0" => 0,
                    "1" => 1,
                    _ => return Err(MatrixError::BadEntry { row: i + 1, token: (*token).into() }),
                };
                m.set(i, j, e);
            }
        }
        Ok(m)
    }
}

/// One sparsifying step. Indices are zero-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SparsifyStep {
    /// Column whose entries were moved.
    pub column: usize,
    /// The two rows whose entries moved to the new column.
    pub rows: (usize, usize),
    /// Order of the matrix after the step.
    pub order: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Hash)]
pub struct SparsifyTrace {
    pub steps: Vec<SparsifyStep>,
}

impl SparsifyTrace {
    /// Applies the recorded steps to `m`.
    pub fn replay(&self, m: &IntMatrix) -> IntMatrix {
        let mut out = m.clone();
        for step in &self.steps {
            out = sparsify_step(&out, step.column, step.rows.0, step.rows.1);
            debug_assert_eq!(out.order(), step.order);
        }
        out
    }
}

impl fmt::Display for SparsifyTrace {
    /// One line per step, with one-based indices.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for s in &self.steps {
            writeln!(f, "column {} rows {},{} -> order {}", s.column + 1, s.rows.0 + 1, s.rows.1 + 1, s.order)?;
        }
        Ok(())
    }
}

/// Appends a row and column with diagonal entry 1 and a 1 in column `t` of the new row,
/// then moves the ones at `(a, t)` and `(b, t)` into the new column.
///
/// The permanent is unchanged: permutations of the old matrix using `(a, t)` or `(b, t)`
/// correspond to permutations of the new one that route through `(n, t)`.
pub fn sparsify_step(m: &IntMatrix, t: usize, a: usize, b: usize) -> IntMatrix {
    assert!(a != b, "moved rows must differ");
    assert!(m.get(a, t) == 1 && m.get(b, t) == 1, "moved entries must be nonzero");
    let n = m.order();
    let mut out = m.grown();
    out.set(n, n, 1);
    out.set(n, t, 1);
    out.set(a, t, 0);
    out.set(b, t, 0);
    out.set(a, n, 1);
    out.set(b, n, 1);
    out
}

/// Makes every column hold at most three ones, preserving the permanent.
///
/// Columns are processed left to right; each step moves the ones of the two smallest rows.
pub fn sparsify(m: &IntMatrix) -> (IntMatrix, SparsifyTrace) {
    let mut out = m.clone();
    let mut trace = SparsifyTrace::default();
    for t in 0..m.order() {
        while out.column_count(t) > MAX_COLUMN_ONES {
            let mut rows = (0..out.order()).filter(|&i| out.get(i, t) == 1);
            let a = rows.next().expect("column has ones");
            let b = rows.next().expect("column has ones");
            out = sparsify_step(&out, t, a, b);
            trace.steps.push(SparsifyStep { column: t, rows: (a, b), order: out.order() });
        }
    }
    (out, trace)
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum HardnessError {
    #[error("column {column} has {count} ones; at most {MAX_COLUMN_ONES} keep every degree below 4")]
    DegreeViolation { column: usize, count: usize },
    #[error("the circuit is tagged {0}, not as a categorical generating circuit")]
    SemanticsMismatch(Semantics),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

/// The product-of-row-sums formula `prod_i sum_j M[i,j] x_j`, tagged as a 4-category
/// generating circuit.
pub fn valiant_circuit(m: &IntMatrix) -> Result<Circuit, HardnessError> {
    let n = m.order();
    for j in 0..n {
        let count = m.column_count(j);
        if count > MAX_COLUMN_ONES {
            return Err(HardnessError::DegreeViolation { column: j + 1, count });
        }
    }
    let mut b = CircuitBuilder::new(n);
    let root = if n == 0 {
        b.one()
    } else {
        let rows: Vec<NodeId> = (0..n)
            .map(|i| {
                let terms: Vec<(Rational, NodeId)> = (0..n)
                    .filter(|&j| m.get(i, j) == 1)
                    .map(|j| (Rational::one(), b.var(VarRef::plain(j as u32 + 1))))
                    .collect();
                if terms.is_empty() {
                    b.constant(Rational::zero())
                } else {
                    b.sum(terms)
                }
            })
            .collect();
        b.product(rows)
    };
    let c = b.finish(root, Semantics::CategoricalGenerating { k: 4 }).expect("formula is well formed");
    debug_assert!(degree_bounds(&c).iter().all(|d| *d <= 3));
    Ok(c)
}

/// An upper bound on the degree of each variable, by structural analysis: sums take the
/// maximum over children, products add. Entry `i - 1` belongs to `x_i`; barred leaves
/// count towards their index. Division nodes are bounded by their numerator.
pub fn degree_bounds(c: &Circuit) -> Vec<u32> {
    let n = c.n();
    let mut bounds: Vec<Vec<u32>> = Vec::with_capacity(c.node_count());
    for node in c.nodes() {
        let mut d = vec![0u32; n];
        match node {
            Node::Var(v) => d[v.index as usize - 1] = 1,
            Node::Const(_) => {}
            Node::Sum(terms) => {
                for (_, child) in terms {
                    for (a, b) in d.iter_mut().zip(&bounds[child.index()]) {
                        *a = (*a).max(*b);
                    }
                }
            }
            Node::Product(factors) => {
                for child in factors {
                    for (a, b) in d.iter_mut().zip(&bounds[child.index()]) {
                        *a += *b;
                    }
                }
            }
            Node::Div(num, _) => d.clone_from(&bounds[num.index()]),
        }
        bounds.push(d);
    }
    bounds.swap_remove(c.root().index())
}

/// Coefficient of `x_1 x_2 ... x_n` in the polynomial of a categorical generating circuit,
/// i.e. the likelihood of the all-ones assignment, by expansion.
///
/// Expansion drops every monomial that does not divide `x_1 ... x_n`. When the root is a
/// product of linear forms (the shape [`valiant_circuit`] builds), the factors are
/// multiplied in an order that finishes variables early and monomials that can no longer
/// reach a finished variable are dropped too.
pub fn coefficient_of_all_ones(c: &Circuit, n: usize) -> Result<Rational, HardnessError> {
    coefficient_of_all_ones_capped(c, n, crate::oracle::DEFAULT_TERM_CAP)
}

pub fn coefficient_of_all_ones_capped(c: &Circuit, n: usize, cap: usize) -> Result<Rational, HardnessError> {
    if !matches!(c.semantics(), Semantics::CategoricalGenerating { .. }) {
        return Err(HardnessError::SemanticsMismatch(c.semantics()));
    }
    let target = Monomial::from_powers((1..=n as u32).map(|i| (VarRef::plain(i), 1)));
    if let Some(rows) = linear_factors(c) {
        return Ok(all_ones_of_linear_product(&rows, n, cap)?);
    }
    let poly = expand_dividing(c, &target, cap)?;
    Ok(poly.coefficient(&target))
}

/// Each root factor as a list of `(variable index, weight)` if the root is a product of
/// weighted sums of plain variables (or zero constants).
fn linear_factors(c: &Circuit) -> Option<Vec<Vec<(u32, Rational)>>> {
    let Node::Product(factors) = c.node(c.root()) else { return None };
    factors
        .iter()
        .map(|f| match c.node(*f) {
            Node::Sum(terms) => terms
                .iter()
                .map(|(w, child)| match c.node(*child) {
                    Node::Var(v) if !v.is_bar() => Some((v.index, w.clone())),
                    _ => None,
                })
                .collect(),
            Node::Var(v) if !v.is_bar() => Some(vec![(v.index, Rational::one())]),
            Node::Const(k) if k.is_zero() => Some(Vec::new()),
            _ => None,
        })
        .collect()
}

fn all_ones_of_linear_product(rows: &[Vec<(u32, Rational)>], n: usize, cap: usize) -> Result<Rational, OracleError> {
    if rows.len() != n {
        // each factor raises the degree by one, so the degree-n coefficient needs n factors
        return Ok(Rational::zero());
    }
    // Greedy order: repeatedly take the factor that completes the most variables.
    let mut remaining_uses = vec![0usize; n + 1];
    for row in rows {
        for (j, _) in row {
            remaining_uses[*j as usize] += 1;
        }
    }
    let mut order: Vec<usize> = Vec::with_capacity(rows.len());
    let mut used = vec![false; rows.len()];
    let mut uses = remaining_uses.clone();
    for _ in 0..rows.len() {
        let best = (0..rows.len())
            .filter(|r| !used[*r])
            .max_by_key(|r| {
                let done = rows[*r].iter().filter(|(j, _)| uses[*j as usize] == 1).count();
                (done, core::cmp::Reverse(rows[*r].len()), core::cmp::Reverse(*r))
            })
            .expect("a factor remains");
        used[best] = true;
        for (j, _) in &rows[best] {
            uses[*j as usize] -= 1;
        }
        order.push(best);
    }
    let mut poly = SparsePoly::constant(Rational::one());
    for r in order {
        let mut factor = SparsePoly::zero();
        for (j, w) in &rows[r] {
            factor.add_term(Monomial::var(VarRef::plain(*j)), w.clone());
        }
        poly = poly.mul_capped(&factor, cap)?;
        for (j, _) in &rows[r] {
            remaining_uses[*j as usize] -= 1;
        }
        // a variable with no remaining factors must already be present, and exponents
        // above one can never shrink
        let finished: Vec<u32> = (1..=n as u32).filter(|j| remaining_uses[*j as usize] == 0).collect();
        poly = SparsePoly::from_terms(poly.terms().filter_map(|(m, w)| {
            let keep = m.max_exponent() <= 1 && finished.iter().all(|j| m.exponent(VarRef::plain(*j)) == 1);
            keep.then(|| (m.clone(), w.clone()))
        }));
    }
    let target = Monomial::from_powers((1..=n as u32).map(|i| (VarRef::plain(i), 1)));
    Ok(poly.coefficient(&target))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::oracle::{contributing_permutations, expand, permanent};

    #[test]
    fn parse_and_display_round_trip() {
        let text = "0 1 0 0\n0 1 0 0\n0 1 0 0\n0 1 0 0\n";
        let m: IntMatrix = text.parse().unwrap();
        assert_eq!(m, fixtures::single_column_matrix());
        assert_eq!(m.to_string(), text);
        assert!(matches!("1 0\n1".parse::<IntMatrix>(), Err(MatrixError::NotSquare { .. })));
        assert!(matches!("2".parse::<IntMatrix>(), Err(MatrixError::BadEntry { .. })));
    }

    #[test]
    fn already_sparse_matrix_is_untouched() {
        let m = IntMatrix::all_ones(3);
        let (out, trace) = sparsify(&m);
        assert_eq!(out, m);
        assert!(trace.steps.is_empty());
    }

    #[test]
    fn step_can_move_middle_rows() {
        let m = fixtures::single_column_matrix();
        let out = sparsify_step(&m, 1, 1, 2);
        let expected = IntMatrix::from_rows(&[
            &[0, 1, 0, 0, 0],
            &[0, 0, 0, 0, 1],
            &[0, 0, 0, 0, 1],
            &[0, 1, 0, 0, 0],
            &[0, 1, 0, 0, 1],
        ]);
        assert_eq!(out, expected);
        assert_eq!(out.column_count(1), 3);
        assert_eq!(permanent(&out), 0);
    }

    #[test]
    fn single_column_sparsifies_in_one_step() {
        let (out, trace) = sparsify(&fixtures::single_column_matrix());
        assert_eq!(out.order(), 5);
        assert_eq!(out.column_count(1), 3);
        assert_eq!(trace.steps, vec![SparsifyStep { column: 1, rows: (0, 1), order: 5 }]);
        assert_eq!(trace.replay(&fixtures::single_column_matrix()), out);
    }

    #[test]
    fn dense_matrix_keeps_its_permanent() {
        let m = IntMatrix::all_ones(5);
        let (out, trace) = sparsify(&m);
        assert!(out.max_column_count() <= 3);
        assert!(out.order() <= 5 + 25);
        assert_eq!(permanent(&out), 120);
        assert_eq!(trace.replay(&m), out);
    }

    #[test]
    fn one_step_is_a_bijection_on_terms() {
        let m = IntMatrix::all_ones(4);
        let stepped = sparsify_step(&m, 0, 0, 1);
        assert_eq!(contributing_permutations(&m).len(), contributing_permutations(&stepped).len());
    }

    #[test]
    fn valiant_examples() {
        let id = valiant_circuit(&IntMatrix::identity(2)).unwrap();
        assert_eq!(expand(&id).unwrap().to_string(), "x1*x2");
        let ones = valiant_circuit(&IntMatrix::all_ones(2)).unwrap();
        let poly = expand(&ones).unwrap();
        let x1x2 = Monomial::plain_subset(0b11);
        assert_eq!(poly.coefficient(&x1x2), Rational::from_integer(2));
        assert_eq!(poly.num_terms(), 3);
        assert!(matches!(
            valiant_circuit(&IntMatrix::all_ones(4)),
            Err(HardnessError::DegreeViolation { column: 1, count: 4 })
        ));
    }

    #[test]
    fn all_ones_coefficient_is_the_permanent() {
        for (m, per) in [
            (IntMatrix::identity(3), 1),
            (IntMatrix::all_ones(3), 6),
            (sparsify(&fixtures::single_column_matrix()).0, 0),
            (sparsify(&IntMatrix::all_ones(5)).0, 120),
        ] {
            let c = valiant_circuit(&m).unwrap();
            let coeff = coefficient_of_all_ones(&c, m.order()).unwrap();
            assert_eq!(coeff, Rational::from_integer(per));
        }
    }

    #[test]
    fn generic_path_agrees_with_linear_path() {
        let m = sparsify(&IntMatrix::all_ones(4)).0;
        let c = valiant_circuit(&m).unwrap();
        let target = Monomial::plain_subset((1 << m.order()) - 1);
        let generic = expand_dividing(&c, &target, 1 << 20).unwrap().coefficient(&target);
        assert_eq!(generic, coefficient_of_all_ones(&c, m.order()).unwrap());
        assert_eq!(generic, Rational::from_integer(24));
    }

    #[test]
    fn degree_bounds_follow_column_counts() {
        let m = sparsify(&IntMatrix::all_ones(4)).0;
        let c = valiant_circuit(&m).unwrap();
        let bounds = degree_bounds(&c);
        for (j, bound) in bounds.iter().enumerate() {
            assert_eq!(*bound as usize, m.column_count(j));
        }
    }
}
