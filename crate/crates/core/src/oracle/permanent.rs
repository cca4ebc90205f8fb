//! Exact permanents of 0/1 matrices.

use alloc::vec;
use alloc::vec::Vec;

use crate::hardness::IntMatrix;

/// Permanent, by enumeration up to order 12, Ryser's formula up to order 20, and
/// zero-pruned enumeration beyond that (only practical for sparse matrices).
pub fn permanent(m: &IntMatrix) -> u128 {
    match m.order() {
        0..=12 => permanent_by_enumeration(m),
        13..=20 => permanent_ryser(m),
        _ => permanent_by_enumeration(m),
    }
}

/// Sum over permutations in lexicographic order, skipping prefixes that hit a zero entry.
pub fn permanent_by_enumeration(m: &IntMatrix) -> u128 {
    let mut count = 0u128;
    for_each_contributing(m, |_| count += 1);
    count
}

/// Every permutation `sigma` (as `sigma[row] = column`) with all `M[i, sigma(i)] = 1`,
/// in lexicographic order.
pub fn contributing_permutations(m: &IntMatrix) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    for_each_contributing(m, |sigma| out.push(sigma.to_vec()));
    out
}

fn for_each_contributing(m: &IntMatrix, mut visit: impl FnMut(&[usize])) {
    let n = m.order();
    let mut sigma = Vec::with_capacity(n);
    let mut used = vec![false; n];
    fn go(m: &IntMatrix, sigma: &mut Vec<usize>, used: &mut [bool], visit: &mut dyn FnMut(&[usize])) {
        let row = sigma.len();
        if row == m.order() {
            visit(sigma);
            return;
        }
        for col in 0..m.order() {
            if !used[col] && m.get(row, col) == 1 {
                used[col] = true;
                sigma.push(col);
                go(m, sigma, used, visit);
                sigma.pop();
                used[col] = false;
            }
        }
    }
    go(m, &mut sigma, &mut used, &mut visit);
}

/// Ryser's inclusion-exclusion formula, iterating column subsets in Gray-code order.
pub fn permanent_ryser(m: &IntMatrix) -> u128 {
    let n = m.order();
    if n == 0 {
        return 1;
    }
    assert!(n <= 62, "Ryser path limited to small orders");
    let mut row_sums = vec![0i128; n];
    let mut total: i128 = 0;
    let mut gray: u64 = 0;
    for k in 1u64..(1u64 << n) {
        let next = k ^ (k >> 1);
        let flipped = (gray ^ next).trailing_zeros() as usize;
        let added = next & (1 << flipped) != 0;
        for (i, s) in row_sums.iter_mut().enumerate() {
            let e = m.get(i, flipped) as i128;
            if added {
                *s += e;
            } else {
                *s -= e;
            }
        }
        gray = next;
        let prod: i128 = row_sums.iter().product();
        if (n - gray.count_ones() as usize).is_multiple_of(2) {
            total += prod;
        } else {
            total -= prod;
        }
    }
    total as u128
}
