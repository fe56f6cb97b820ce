//! Square linear sum assignment.
//!
//! Shortest-augmenting-path Hungarian method with row/column potentials.
//! Each of the `n` rows is inserted by a Dijkstra-like search over the
//! columns, so the worst case is `O(n^3)`. Ties in the search are broken by
//! the lowest column index, which makes the output reproducible.

use ndarray::Array2;

use crate::error::{Error, Result};

const NONE: usize = usize::MAX;

/// A bijection between rows and columns of a square matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    /// Wraps `map`, checking that it is a bijection on `0..map.len()`.
    pub fn new(map: Vec<usize>) -> Result<Self> {
        let n = map.len();
        let mut seen = vec![false; n];
        for (i, &j) in map.iter().enumerate() {
            if j >= n {
                return Err(Error::IndexOutOfRange { row: i, col: j, m: n, n });
            }
            if seen[j] {
                return Err(Error::DuplicateTarget(j));
            }
            seen[j] = true;
        }
        Ok(Self { map })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            map: (0..n).collect(),
        }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Column assigned to row `i`.
    pub fn col(&self, i: usize) -> usize {
        self.map[i]
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.map
    }

    /// `sum_i cost[i, map[i]]`, summed in row order.
    pub fn cost(&self, cost: &Array2<f64>) -> f64 {
        self.map.iter().enumerate().map(|(i, &j)| cost[[i, j]]).sum()
    }
}

/// Solves `min_{sigma} sum_i cost[i, sigma(i)]` over all permutations.
///
/// Returns the optimal permutation and its objective. An empty matrix gives
/// the empty permutation with cost 0.
pub fn solve_lap(cost: &Array2<f64>) -> Result<(Permutation, f64)> {
    let (rows, cols) = cost.dim();
    if rows != cols {
        return Err(Error::NotSquare { rows, cols });
    }
    if let Some(((i, j), _)) = cost.indexed_iter().find(|(_, c)| !c.is_finite()) {
        return Err(Error::NonFinite {
            what: "cost",
            index: format!("({i}, {j})"),
        });
    }
    let n = rows;
    let dense: Vec<f64> = cost.iter().copied().collect();
    let map = shortest_augmenting_path(&dense, n);
    let perm = Permutation { map };
    let value = perm.cost(cost);
    Ok((perm, value))
}

/// Core routine on a row-major `n x n` buffer. Column `n` is a virtual
/// column that holds the row currently being inserted.
fn shortest_augmenting_path(c: &[f64], n: usize) -> Vec<usize> {
    let mut u = vec![0.0f64; n];
    let mut v = vec![0.0f64; n + 1];
    // row_of[j]: row assigned to column j
    let mut row_of = vec![NONE; n + 1];
    let mut way = vec![NONE; n];
    let mut minv = vec![f64::INFINITY; n];
    let mut used = vec![false; n + 1];

    for i in 0..n {
        row_of[n] = i;
        let mut j0 = n;
        minv.fill(f64::INFINITY);
        used.fill(false);

        loop {
            used[j0] = true;
            let i0 = row_of[j0];
            let row = &c[i0 * n..(i0 + 1) * n];
            let ui0 = u[i0];
            let mut delta = f64::INFINITY;
            let mut j1 = NONE;
            for j in 0..n {
                if used[j] {
                    continue;
                }
                let reduced = row[j] - ui0 - v[j];
                if reduced < minv[j] {
                    minv[j] = reduced;
                    way[j] = j0;
                }
                if minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            debug_assert!(j1 != NONE, "no reachable column");
            for j in 0..n {
                if used[j] {
                    u[row_of[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            u[row_of[n]] += delta;
            v[n] -= delta;

            j0 = j1;
            if row_of[j0] == NONE {
                break;
            }
        }

        // augment along the alternating path back to the virtual column
        loop {
            let j1 = way[j0];
            row_of[j0] = row_of[j1];
            j0 = j1;
            if j0 == n {
                break;
            }
        }
    }

    let mut map = vec![NONE; n];
    for (j, &i) in row_of[..n].iter().enumerate() {
        map[i] = j;
    }
    map
}
