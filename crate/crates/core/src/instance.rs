//! Problem statement types and the unit-mass partial matching objective.
//!
//! Indices are 0-based everywhere in the library. The JSON file formats use
//! 1-based indices and convert at the boundary (see [`crate::io`]).

use ndarray::Array2;

use crate::error::{Error, Result};

/// An injective partial map from source rows to target columns.
///
/// Each source is matched to at most one target and each target to at most
/// one source.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialAssignment {
    n: usize,
    row_to_col: Vec<Option<usize>>,
}

impl PartialAssignment {
    /// The assignment with no pairs.
    pub fn empty(m: usize, n: usize) -> Self {
        Self {
            n,
            row_to_col: vec![None; m],
        }
    }

    /// Builds an assignment from 0-based `(source, target)` pairs, rejecting
    /// out-of-range indices and any reuse of a source or target.
    pub fn from_pairs<I>(m: usize, n: usize, pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut row_to_col = vec![None; m];
        let mut col_used = vec![false; n];
        for (i, j) in pairs {
            if i >= m || j >= n {
                return Err(Error::IndexOutOfRange { row: i, col: j, m, n });
            }
            if row_to_col[i].is_some() {
                return Err(Error::DuplicateSource(i));
            }
            if col_used[j] {
                return Err(Error::DuplicateTarget(j));
            }
            row_to_col[i] = Some(j);
            col_used[j] = true;
        }
        Ok(Self { n, row_to_col })
    }

    pub fn m(&self) -> usize {
        self.row_to_col.len()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of matched pairs.
    pub fn len(&self) -> usize {
        self.row_to_col.iter().filter(|c| c.is_some()).count()
    }

    pub fn is_empty(&self) -> bool {
        self.row_to_col.iter().all(Option::is_none)
    }

    /// Target matched to source `i`, if any.
    pub fn target_of(&self, i: usize) -> Option<usize> {
        self.row_to_col.get(i).copied().flatten()
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.target_of(i) == Some(j)
    }

    /// Pairs in ascending source order.
    pub fn pairs(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.row_to_col
            .iter()
            .enumerate()
            .filter_map(|(i, c)| c.map(|j| (i, j)))
    }

    /// Row marginal `pi 1_n` as 0/1 flags.
    pub fn source_matched(&self) -> Vec<bool> {
        self.row_to_col.iter().map(Option::is_some).collect()
    }

    /// Column marginal `pi^T 1_m` as 0/1 flags.
    pub fn target_matched(&self) -> Vec<bool> {
        let mut used = vec![false; self.n];
        for (_, j) in self.pairs() {
            used[j] = true;
        }
        used
    }

    /// The same pairs with source and target roles swapped.
    pub fn flipped(&self) -> Self {
        let mut row_to_col = vec![None; self.n];
        for (i, j) in self.pairs() {
            row_to_col[j] = Some(i);
        }
        Self {
            n: self.m(),
            row_to_col,
        }
    }

    /// Dense 0/1 matrix form.
    pub fn to_matrix(&self) -> Array2<f64> {
        let mut out = Array2::zeros((self.m(), self.n));
        for (i, j) in self.pairs() {
            out[[i, j]] = 1.0;
        }
        out
    }

    pub(crate) fn check_dims(&self, m: usize, n: usize, what: &'static str) -> Result<()> {
        if self.m() != m {
            return Err(Error::DimensionMismatch {
                what,
                expected: m,
                found: self.m(),
            });
        }
        if self.n != n {
            return Err(Error::DimensionMismatch {
                what,
                expected: n,
                found: self.n,
            });
        }
        Ok(())
    }
}

/// A partial graph matching problem: costs, matching biases, and the
/// unbalancedness parameter `rho`, with an optional ground-truth matching.
///
/// Source and target masses are implicitly all ones.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    /// `m x n` transport costs.
    pub cost: Array2<f64>,
    /// Source matching biases, length `m`.
    pub alpha: Vec<f64>,
    /// Target matching biases, length `n`.
    pub beta: Vec<f64>,
    pub rho: f64,
    pub ground_truth: Option<PartialAssignment>,
}

impl Instance {
    /// Builds and validates an instance without ground truth.
    pub fn new(cost: Array2<f64>, alpha: Vec<f64>, beta: Vec<f64>, rho: f64) -> Result<Self> {
        let inst = Self {
            cost,
            alpha,
            beta,
            rho,
            ground_truth: None,
        };
        inst.validate()?;
        Ok(inst)
    }

    /// Instance with unit biases (`alpha = 1_m`, `beta = 1_n`).
    pub fn with_unit_biases(cost: Array2<f64>, rho: f64) -> Result<Self> {
        let (m, n) = cost.dim();
        Self::new(cost, vec![1.0; m], vec![1.0; n], rho)
    }

    /// Attaches a ground-truth matching after checking its dimensions.
    pub fn with_ground_truth(mut self, truth: PartialAssignment) -> Result<Self> {
        truth.check_dims(self.m(), self.n(), "ground_truth")?;
        self.ground_truth = Some(truth);
        Ok(self)
    }

    pub fn m(&self) -> usize {
        self.cost.nrows()
    }

    pub fn n(&self) -> usize {
        self.cost.ncols()
    }

    /// Checks every instance invariant.
    pub fn validate(&self) -> Result<()> {
        let (m, n) = self.cost.dim();
        if self.alpha.len() != m {
            return Err(Error::DimensionMismatch {
                what: "alpha",
                expected: m,
                found: self.alpha.len(),
            });
        }
        if self.beta.len() != n {
            return Err(Error::DimensionMismatch {
                what: "beta",
                expected: n,
                found: self.beta.len(),
            });
        }
        if let Some(((i, j), _)) = self.cost.indexed_iter().find(|(_, c)| !c.is_finite()) {
            return Err(Error::NonFinite {
                what: "cost",
                index: format!("({i}, {j})"),
            });
        }
        check_biases("alpha", &self.alpha)?;
        check_biases("beta", &self.beta)?;
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::InvalidRho(self.rho));
        }
        if let Some(truth) = &self.ground_truth {
            truth.check_dims(m, n, "ground_truth")?;
        }
        Ok(())
    }

    /// Feasibility threshold `rho (alpha_i + beta_j)` of a pair.
    #[inline]
    pub fn threshold(&self, i: usize, j: usize) -> f64 {
        self.rho * (self.alpha[i] + self.beta[j])
    }

    /// Whether pair `(i, j)` can ever appear in an optimal matching.
    #[inline]
    pub fn is_feasible(&self, i: usize, j: usize) -> bool {
        self.cost[[i, j]] <= self.threshold(i, j)
    }

    /// Swaps the roles of sources and targets.
    pub fn transpose(&self) -> Instance {
        Instance {
            cost: self.cost.t().to_owned(),
            alpha: self.beta.clone(),
            beta: self.alpha.clone(),
            rho: self.rho,
            ground_truth: self.ground_truth.as_ref().map(PartialAssignment::flipped),
        }
    }

    /// Objective with no pairs matched: `rho (|alpha|_1 + |beta|_1)`.
    pub fn empty_cost(&self) -> f64 {
        let a: f64 = self.alpha.iter().sum();
        let b: f64 = self.beta.iter().sum();
        self.rho * (a + b)
    }
}

fn check_biases(which: &'static str, values: &[f64]) -> Result<()> {
    for (index, &value) in values.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite {
                what: which,
                index: index.to_string(),
            });
        }
        if value < 0.0 {
            return Err(Error::NegativeBias {
                which,
                index,
                value,
            });
        }
    }
    Ok(())
}

/// Validates `raw` and hands it back unchanged.
pub fn validate_instance(raw: Instance) -> Result<Instance> {
    raw.validate()?;
    Ok(raw)
}

/// Objective terms of a partial assignment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostBreakdown {
    /// `<pi, C>`
    pub transported: f64,
    /// `<alpha, 1 - pi_1> + <beta, 1 - pi_2>`, before scaling by `rho`.
    pub unmatched_mass: f64,
    /// `rho * unmatched_mass`
    pub penalty: f64,
    pub total: f64,
}

/// Evaluates the unit-mass objective
/// `<pi, C> + rho (<alpha, 1 - pi_1> + <beta, 1 - pi_2>)`
/// term by term. Sums run in row-major order.
pub fn cost_breakdown(inst: &Instance, pi: &PartialAssignment) -> Result<CostBreakdown> {
    pi.check_dims(inst.m(), inst.n(), "assignment")?;
    let transported: f64 = pi.pairs().map(|(i, j)| inst.cost[[i, j]]).sum();
    let src = pi.source_matched();
    let tgt = pi.target_matched();
    let unmatched_src: f64 = inst
        .alpha
        .iter()
        .zip(&src)
        .filter(|(_, &used)| !used)
        .map(|(a, _)| a)
        .sum();
    let unmatched_tgt: f64 = inst
        .beta
        .iter()
        .zip(&tgt)
        .filter(|(_, &used)| !used)
        .map(|(b, _)| b)
        .sum();
    let unmatched_mass = unmatched_src + unmatched_tgt;
    let penalty = inst.rho * unmatched_mass;
    Ok(CostBreakdown {
        transported,
        unmatched_mass,
        penalty,
        total: transported + penalty,
    })
}

/// Total cost of `pi` under the unit-mass objective.
pub fn total_cost(inst: &Instance, pi: &PartialAssignment) -> Result<f64> {
    cost_breakdown(inst, pi).map(|b| b.total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn two_by_two(c: Array2<f64>) -> Instance {
        Instance::new(c, vec![1.0, 1.0], vec![1.0, 1.0], 0.4).unwrap()
    }

    #[test]
    fn accepts_valid_instance() {
        let inst = Instance::new(
            array![[0.1, 0.9], [0.9, 0.1]],
            vec![1.0, 1.0],
            vec![1.0, 1.0],
            0.4,
        );
        assert!(inst.is_ok());
    }

    #[test]
    fn rejects_negative_bias() {
        let err = Instance::new(array![[0.1, 0.9], [0.9, 0.1]], vec![-1.0, 1.0], vec![1.0, 1.0], 0.4)
            .unwrap_err();
        assert!(err.to_string().contains("negative bias"), "{err}");
    }

    #[test]
    fn rejects_duplicate_source_in_ground_truth() {
        let err = PartialAssignment::from_pairs(2, 2, [(0, 0), (0, 1)]).unwrap_err();
        assert_eq!(err, Error::DuplicateSource(0));
        assert!(err.to_string().contains("duplicate source index"));
    }

    #[test]
    fn rejects_bad_shapes_and_values() {
        let err = Instance::new(array![[0.1, 0.2]], vec![1.0, 1.0], vec![1.0, 1.0], 0.4).unwrap_err();
        assert!(err.to_string().starts_with("dimension mismatch: alpha"));
        let err = Instance::new(array![[0.1, 0.2]], vec![1.0], vec![1.0], 0.4).unwrap_err();
        assert!(err.to_string().starts_with("dimension mismatch: beta"));
        let err = Instance::new(array![[f64::NAN]], vec![1.0], vec![1.0], 0.4).unwrap_err();
        assert!(matches!(err, Error::NonFinite { .. }));
        for rho in [0.0, -1.0, f64::INFINITY] {
            let err = Instance::new(array![[0.5]], vec![1.0], vec![1.0], rho).unwrap_err();
            assert!(matches!(err, Error::InvalidRho(_)));
        }
        assert!(matches!(
            PartialAssignment::from_pairs(2, 2, [(0, 2)]),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert_eq!(
            PartialAssignment::from_pairs(2, 2, [(0, 1), (1, 1)]),
            Err(Error::DuplicateTarget(1))
        );
    }

    #[test]
    fn negative_costs_are_allowed() {
        assert!(Instance::with_unit_biases(array![[-3.0, 0.5]], 0.4).is_ok());
    }

    #[test]
    fn total_cost_examples() {
        let inst = two_by_two(array![[0.1, 0.9], [0.9, 0.1]]);
        let empty = PartialAssignment::empty(2, 2);
        assert!((total_cost(&inst, &empty).unwrap() - 1.6).abs() < 1e-12);

        let diag = PartialAssignment::from_pairs(2, 2, [(0, 0), (1, 1)]).unwrap();
        assert!((total_cost(&inst, &diag).unwrap() - 0.2).abs() < 1e-12);

        let inst = two_by_two(array![[0.1, 0.9], [0.9, 0.9]]);
        let one = PartialAssignment::from_pairs(2, 2, [(0, 0)]).unwrap();
        assert!((total_cost(&inst, &one).unwrap() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn total_cost_rejects_wrong_dims() {
        let inst = two_by_two(array![[0.1, 0.9], [0.9, 0.1]]);
        assert!(total_cost(&inst, &PartialAssignment::empty(2, 3)).is_err());
    }

    #[test]
    fn transpose_shape() {
        let inst = Instance::new(
            array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]],
            vec![0.1, 0.2, 0.3],
            vec![0.7, 0.8],
            0.5,
        )
        .unwrap();
        let t = inst.transpose();
        assert_eq!(t.cost, array![[1.0, 3.0, 5.0], [2.0, 4.0, 6.0]]);
        assert_eq!(t.alpha, vec![0.7, 0.8]);
        assert_eq!(t.beta, vec![0.1, 0.2, 0.3]);
    }

    fn arb_instance() -> impl Strategy<Value = (Instance, PartialAssignment)> {
        (0usize..5, 0usize..5).prop_flat_map(|(m, n)| {
            (
                proptest::collection::vec(0.0f64..1.0, m * n),
                proptest::collection::vec(0.0f64..1.0, m),
                proptest::collection::vec(0.0f64..1.0, n),
                0.01f64..2.0,
                proptest::collection::vec(any::<bool>(), m),
                Just((m, n)),
            )
                .prop_map(|(c, a, b, rho, keep, (m, n))| {
                    let cost = Array2::from_shape_vec((m, n), c).unwrap();
                    let truth = PartialAssignment::from_pairs(
                        m,
                        n,
                        (0..m.min(n)).filter(|&i| keep[i]).map(|i| (i, (i + 1) % n.max(1))),
                    )
                    .unwrap_or_else(|_| PartialAssignment::empty(m, n));
                    let inst = Instance::new(cost, a, b, rho)
                        .unwrap()
                        .with_ground_truth(truth.clone())
                        .unwrap();
                    (inst, truth)
                })
        })
    }

    proptest! {
        #[test]
        fn transpose_is_involution((inst, _) in arb_instance()) {
            prop_assert_eq!(inst.transpose().transpose(), inst);
        }

        #[test]
        fn cost_symmetric_under_transpose((inst, pi) in arb_instance()) {
            let a = total_cost(&inst, &pi).unwrap();
            let b = total_cost(&inst.transpose(), &pi.flipped()).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
        }

        #[test]
        fn cost_nonnegative_for_nonnegative_costs((inst, pi) in arb_instance()) {
            prop_assert!(total_cost(&inst, &pi).unwrap() >= 0.0);
        }

        #[test]
        fn empty_assignment_costs_full_penalty((inst, _) in arb_instance()) {
            let empty = PartialAssignment::empty(inst.m(), inst.n());
            prop_assert_eq!(total_cost(&inst, &empty).unwrap(), inst.empty_cost());
        }
    }
}
