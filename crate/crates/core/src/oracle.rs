//! Exhaustive references for the partial matching objective and the LAP.
//!
//! These exist to validate the solver on small instances and make no attempt
//! at efficiency.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::instance::{total_cost, Instance, PartialAssignment};
use crate::lap::Permutation;

/// Largest number of candidates [`brute_force_pgm`] will enumerate.
pub const MAX_PGM_CANDIDATES: u128 = 10_000_000;
/// Largest matrix size accepted by [`brute_force_lap`].
pub const MAX_LAP_SIZE: usize = 8;

/// Number of partial assignments between `m` sources and `n` targets,
/// `sum_k C(m,k) C(n,k) k!`.
pub fn count_partial_assignments(m: usize, n: usize) -> Result<u64> {
    let overflow = || Error::CountOverflow { m, n };
    let mut total: u128 = 0;
    // term_k = C(m,k) C(n,k) k! = m!/(m-k)! * C(n,k); built incrementally:
    // term_{k+1} = term_k * (m-k) * (n-k) / (k+1)
    let mut term: u128 = 1;
    for k in 0..=m.min(n) {
        total = total.checked_add(term).ok_or_else(overflow)?;
        if total > i64::MAX as u128 {
            return Err(overflow());
        }
        if k < m.min(n) {
            term = term
                .checked_mul(((m - k) * (n - k)) as u128)
                .ok_or_else(overflow)?
                / (k as u128 + 1);
        }
    }
    Ok(total as u64)
}

/// Visits every partial assignment, ordered by cardinality and then
/// lexicographically by the ascending list of `(source, target)` pairs.
pub fn for_each_partial_assignment<F>(m: usize, n: usize, mut visit: F)
where
    F: FnMut(&[(usize, usize)]),
{
    let mut pairs = Vec::with_capacity(m.min(n));
    let mut col_used = vec![false; n];
    for k in 0..=m.min(n) {
        extend(m, n, k, 0, &mut pairs, &mut col_used, &mut visit);
    }
}

fn extend<F>(
    m: usize,
    n: usize,
    k: usize,
    first_row: usize,
    pairs: &mut Vec<(usize, usize)>,
    col_used: &mut [bool],
    visit: &mut F,
) where
    F: FnMut(&[(usize, usize)]),
{
    if pairs.len() == k {
        visit(pairs);
        return;
    }
    let remaining = k - pairs.len();
    for i in first_row..m {
        if m - i < remaining {
            break;
        }
        for j in 0..n {
            if col_used[j] {
                continue;
            }
            col_used[j] = true;
            pairs.push((i, j));
            extend(m, n, k, i + 1, pairs, col_used, visit);
            pairs.pop();
            col_used[j] = false;
        }
    }
}

/// Minimizes the objective by enumerating every partial assignment.
///
/// Ties go to the first candidate in enumeration order (see
/// [`for_each_partial_assignment`]).
pub fn brute_force_pgm(inst: &Instance) -> Result<(PartialAssignment, f64)> {
    inst.validate()?;
    let (m, n) = (inst.m(), inst.n());
    let count = count_partial_assignments(m, n)? as u128;
    if count > MAX_PGM_CANDIDATES {
        return Err(Error::GuardExceeded {
            what: "partial assignment count",
            value: count,
            limit: MAX_PGM_CANDIDATES,
        });
    }
    let mut best: Option<(Vec<(usize, usize)>, f64)> = None;
    for_each_partial_assignment(m, n, |pairs| {
        let pi = PartialAssignment::from_pairs(m, n, pairs.iter().copied())
            .expect("enumeration yields valid assignments");
        let value = total_cost(inst, &pi).expect("dimensions agree");
        if best.as_ref().is_none_or(|(_, b)| value < *b) {
            best = Some((pairs.to_vec(), value));
        }
    });
    let (pairs, value) = best.expect("the empty assignment is always enumerated");
    Ok((PartialAssignment::from_pairs(m, n, pairs)?, value))
}

/// Minimizes a square LAP by enumerating all `n!` permutations in
/// lexicographic order; ties go to the first.
pub fn brute_force_lap(cost: &Array2<f64>) -> Result<(Permutation, f64)> {
    let (rows, cols) = cost.dim();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    if rows > MAX_LAP_SIZE {
        return Err(Error::GuardExceeded {
            what: "brute-force LAP size",
            value: rows as u128,
            limit: MAX_LAP_SIZE as u128,
        });
    }
    let n = rows;
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = perm.clone();
    let mut best_value = row_sum(cost, &perm);
    while next_permutation(&mut perm) {
        let value = row_sum(cost, &perm);
        if value < best_value {
            best_value = value;
            best.copy_from_slice(&perm);
        }
    }
    Ok((Permutation::new(best)?, best_value))
}

fn row_sum(cost: &Array2<f64>, perm: &[usize]) -> f64 {
    perm.iter().enumerate().map(|(i, &j)| cost[[i, j]]).sum()
}

fn next_permutation(p: &mut [usize]) -> bool {
    if p.len() < 2 {
        return false;
    }
    let Some(i) = (0..p.len() - 1).rev().find(|&i| p[i] < p[i + 1]) else {
        return false;
    };
    let j = (i + 1..p.len()).rev().find(|&j| p[j] > p[i]).unwrap();
    p.swap(i, j);
    p[i + 1..].reverse();
    true
}
