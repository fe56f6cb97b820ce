//! Exact partial graph matching by reduction to a square assignment problem.
//!
//! With unit masses, the weighted-TV partial transport problem always has a
//! 0/1 optimum, and that optimum can be read off an `n x n` LAP:
//!
//! * pairs whose cost exceeds `rho (alpha_i + beta_j)` are never matched, so
//!   their cost is clipped to the threshold;
//! * `n - m` dummy sources are appended, priced at `rho (alpha_* + beta_j)`
//!   with `alpha_* > max_i alpha_i`;
//! * a LAP optimum is mapped back by dropping dummy rows and clipped pairs.
//!
//! For any permutation `P` of the padded matrix,
//! `<P, Cbar> = TC(h(P)) + rho (n - m) alpha_*`, so LAP optimality carries
//! over to the partial matching objective.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::instance::{cost_breakdown, Instance, PartialAssignment};
use crate::lap::{solve_lap, Permutation};

/// Tolerance used by [`balanced_cross_check`].
pub const CROSS_CHECK_TOL: f64 = 1e-9;
/// Largest `m + n` accepted by [`balanced_cross_check`].
pub const CROSS_CHECK_MAX_SIZE: usize = 12;

/// `mask[i][j]` is true iff `C_ij <= rho (alpha_i + beta_j)`.
pub fn feasibility_mask(inst: &Instance) -> Array2<bool> {
    Array2::from_shape_fn(inst.cost.dim(), |(i, j)| inst.is_feasible(i, j))
}

/// The padded square cost matrix of the LAP reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub cbar: Array2<f64>,
    pub alpha_star: f64,
    pub mask: Array2<bool>,
}

impl Embedding {
    pub fn feasible_pairs(&self) -> usize {
        self.mask.iter().filter(|&&f| f).count()
    }
}

/// Builds the padded `n x n` matrix for an instance with `m <= n`.
///
/// `alpha_* = max_i alpha_i + 1` (or 1 when there are no sources).
pub fn build_embedding(inst: &Instance) -> Result<Embedding> {
    inst.validate()?;
    let (m, n) = (inst.m(), inst.n());
    if m > n {
        return Err(Error::InvalidParameter(format!(
            "embedding requires m <= n, got {m}x{n}; transpose first"
        )));
    }
    let alpha_star = inst.alpha.iter().copied().fold(0.0, f64::max) + 1.0;
    let mask = feasibility_mask(inst);
    let cbar = Array2::from_shape_fn((n, n), |(i, j)| {
        if i < m {
            if mask[[i, j]] {
                inst.cost[[i, j]]
            } else {
                inst.threshold(i, j)
            }
        } else {
            inst.rho * (alpha_star + inst.beta[j])
        }
    });
    Ok(Embedding {
        cbar,
        alpha_star,
        mask,
    })
}

/// Maps a permutation of the padded problem to a partial assignment: dummy
/// rows are dropped and infeasible pairs are unmatched.
pub fn restrict_assignment(perm: &Permutation, inst: &Instance) -> Result<PartialAssignment> {
    let (m, n) = (inst.m(), inst.n());
    if perm.len() != n {
        return Err(Error::DimensionMismatch {
            what: "permutation",
            expected: n,
            found: perm.len(),
        });
    }
    if m > n {
        return Err(Error::InvalidParameter(format!(
            "restriction requires m <= n, got {m}x{n}"
        )));
    }
    PartialAssignment::from_pairs(
        m,
        n,
        (0..m)
            .map(|i| (i, perm.col(i)))
            .filter(|&(i, j)| inst.is_feasible(i, j)),
    )
}

/// Result of [`solve`].
#[derive(Debug, Clone, PartialEq)]
pub struct SolveReport {
    pub assignment: PartialAssignment,
    /// Objective value of `assignment`.
    pub total_cost: f64,
    /// `<pi, C>`
    pub transported_cost: f64,
    /// `rho (<alpha, 1 - pi_1> + <beta, 1 - pi_2>)`
    pub unmatch_penalty: f64,
    /// Unscaled weighted unmatched mass, `unmatch_penalty / rho`.
    pub unmatched_mass: f64,
    pub alpha_star: f64,
    /// Number of pairs below their feasibility threshold.
    pub feasible_pairs: usize,
    /// LAP optimum over the padded matrix.
    pub lap_value: f64,
    /// Whether the instance was solved in transposed form (`m > n`). The
    /// padded problem then has `m` rows and `alpha_star` refers to the
    /// target biases.
    pub transposed: bool,
}

impl SolveReport {
    /// Number of dummy rows in the padded problem, `|n - m|`.
    pub fn padding(&self) -> usize {
        let (m, n) = (self.assignment.m(), self.assignment.n());
        m.abs_diff(n)
    }

    pub fn matched(&self) -> usize {
        self.assignment.len()
    }
}

/// Solves the partial matching problem exactly.
///
/// Instances with more sources than targets are solved on the transpose
/// and the assignment flipped back.
pub fn solve(inst: &Instance) -> Result<SolveReport> {
    inst.validate()?;
    if inst.m() > inst.n() {
        let mut report = solve_oriented(&inst.transpose())?;
        report.assignment = report.assignment.flipped();
        report.transposed = true;
        return Ok(report);
    }
    solve_oriented(inst)
}

fn solve_oriented(inst: &Instance) -> Result<SolveReport> {
    let emb = build_embedding(inst)?;
    let (perm, lap_value) = solve_lap(&emb.cbar)?;
    let assignment = restrict_assignment(&perm, inst)?;
    let breakdown = cost_breakdown(inst, &assignment)?;
    Ok(SolveReport {
        assignment,
        total_cost: breakdown.total,
        transported_cost: breakdown.transported,
        unmatch_penalty: breakdown.penalty,
        unmatched_mass: breakdown.unmatched_mass,
        alpha_star: emb.alpha_star,
        feasible_pairs: emb.feasible_pairs(),
        lap_value,
        transposed: false,
    })
}

/// The `(m+n) x (m+n)` balanced transport embedding with unit masses.
#[derive(Debug, Clone, PartialEq)]
pub struct BalancedEmbedding {
    /// `C_ij - rho (alpha_i + beta_j)` in the top-left `m x n` block, zero
    /// elsewhere.
    pub chat: Array2<f64>,
    /// `rho (|alpha|_1 + |beta|_1)`
    pub offset: f64,
}

pub fn build_balanced_embedding(inst: &Instance) -> Result<BalancedEmbedding> {
    inst.validate()?;
    let (m, n) = (inst.m(), inst.n());
    let k = m + n;
    let chat = Array2::from_shape_fn((k, k), |(i, j)| {
        if i < m && j < n {
            inst.cost[[i, j]] - inst.threshold(i, j)
        } else {
            0.0
        }
    });
    Ok(BalancedEmbedding {
        chat,
        offset: inst.empty_cost(),
    })
}

/// Outcome of [`balanced_cross_check`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrossCheck {
    /// Balanced LAP optimum plus the offset.
    pub lhs: f64,
    /// [`solve`]'s total cost.
    pub rhs: f64,
    pub ok: bool,
}

/// Solves the instance a second way, through the balanced embedding, and
/// compares the optimum with [`solve`].
///
/// With unit masses the balanced problem has all-ones marginals, so its
/// optimum is attained at a permutation and an `(m+n)` LAP solves it.
pub fn balanced_cross_check(inst: &Instance) -> Result<CrossCheck> {
    inst.validate()?;
    let size = inst.m() + inst.n();
    if size > CROSS_CHECK_MAX_SIZE {
        return Err(Error::GuardExceeded {
            what: "m + n for balanced cross-check",
            value: size as u128,
            limit: CROSS_CHECK_MAX_SIZE as u128,
        });
    }
    let emb = build_balanced_embedding(inst)?;
    let (_, balanced) = solve_lap(&emb.chat)?;
    let lhs = balanced + emb.offset;
    let rhs = solve(inst)?.total_cost;
    Ok(CrossCheck {
        lhs,
        rhs,
        ok: (lhs - rhs).abs() <= CROSS_CHECK_TOL,
    })
}
