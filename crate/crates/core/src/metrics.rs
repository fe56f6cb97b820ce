//! Matching quality metrics.
//!
//! Per-instance precision/recall/F1 over matched pairs, node correctness,
//! and a split of missed true matches into threshold-infeasible pairs
//! ("partiality") and feasible pairs the solver did not pick
//! ("mismatching"). Averages over a dataset are plain means of the
//! per-instance values.

use crate::error::{Error, Result};
use crate::instance::{Instance, PartialAssignment};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub node_correctness: f64,
    pub partiality_error: f64,
    pub mismatching_error: f64,
    pub total_error: f64,
}

fn check_pair(pred: &PartialAssignment, truth: &PartialAssignment) -> Result<()> {
    pred.check_dims(truth.m(), truth.n(), "prediction")?;
    if truth.is_empty() {
        return Err(Error::UndefinedRecall);
    }
    Ok(())
}

/// Precision, recall and F1 of `pred` against a non-empty `truth`.
///
/// An empty prediction scores `(0, 0, 0)`.
pub fn match_f1(pred: &PartialAssignment, truth: &PartialAssignment) -> Result<(f64, f64, f64)> {
    check_pair(pred, truth)?;
    let hits = pred.pairs().filter(|&(i, j)| truth.contains(i, j)).count() as f64;
    let precision = if pred.is_empty() {
        0.0
    } else {
        hits / pred.len() as f64
    };
    let recall = hits / truth.len() as f64;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    Ok((precision, recall, f1))
}

/// Fraction of ground-truth pairs whose source is matched to the same
/// target in `pred`.
pub fn node_correctness(pred: &PartialAssignment, truth: &PartialAssignment) -> Result<f64> {
    check_pair(pred, truth)?;
    let correct = truth.pairs().filter(|&(i, j)| pred.contains(i, j)).count();
    Ok(correct as f64 / truth.len() as f64)
}

/// `(partiality, mismatching, total)` error fractions over the truth pairs.
pub fn error_decomposition(
    pred: &PartialAssignment,
    truth: &PartialAssignment,
    inst: &Instance,
) -> Result<(f64, f64, f64)> {
    check_pair(pred, truth)?;
    truth.check_dims(inst.m(), inst.n(), "ground_truth")?;
    let mut infeasible = 0usize;
    let mut missed = 0usize;
    for (i, j) in truth.pairs() {
        if !inst.is_feasible(i, j) {
            infeasible += 1;
        } else if !pred.contains(i, j) {
            missed += 1;
        }
    }
    let total = truth.len() as f64;
    let partiality = infeasible as f64 / total;
    let mismatching = missed as f64 / total;
    Ok((partiality, mismatching, partiality + mismatching))
}

/// All metrics for one prediction.
pub fn evaluate(
    pred: &PartialAssignment,
    truth: &PartialAssignment,
    inst: &Instance,
) -> Result<MatchMetrics> {
    let (precision, recall, f1) = match_f1(pred, truth)?;
    let (partiality_error, mismatching_error, total_error) = error_decomposition(pred, truth, inst)?;
    Ok(MatchMetrics {
        precision,
        recall,
        f1,
        node_correctness: node_correctness(pred, truth)?,
        partiality_error,
        mismatching_error,
        total_error,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn pa(pairs: &[(usize, usize)]) -> PartialAssignment {
        PartialAssignment::from_pairs(3, 3, pairs.iter().copied()).unwrap()
    }

    #[test]
    fn f1_examples() {
        let t = pa(&[(0, 0), (1, 1)]);
        assert_eq!(match_f1(&t, &t).unwrap(), (1.0, 1.0, 1.0));
        let (p, r, f) = match_f1(&pa(&[(0, 0)]), &t).unwrap();
        assert_eq!((p, r), (1.0, 0.5));
        assert!((f - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(match_f1(&pa(&[]), &t).unwrap(), (0.0, 0.0, 0.0));
        assert_eq!(match_f1(&t, &pa(&[])), Err(Error::UndefinedRecall));
    }

    #[test]
    fn node_correctness_examples() {
        let t = pa(&[(0, 0), (1, 1)]);
        assert_eq!(node_correctness(&t, &t).unwrap(), 1.0);
        assert_eq!(node_correctness(&pa(&[(0, 0)]), &t).unwrap(), 0.5);
        assert_eq!(node_correctness(&pa(&[(0, 0), (1, 2)]), &t).unwrap(), 0.5);
        assert_eq!(node_correctness(&pa(&[]), &t).unwrap(), 0.0);
        assert!(node_correctness(&t, &pa(&[])).is_err());
    }

    #[test]
    fn decomposition_examples() {
        let inst = Instance::with_unit_biases(
            array![[0.1, 0.9, 0.9], [0.9, 0.95, 0.9], [0.9, 0.9, 0.2]],
            0.4,
        )
        .unwrap();
        let truth = pa(&[(0, 0), (2, 2)]);
        assert_eq!(error_decomposition(&truth, &truth, &inst).unwrap(), (0.0, 0.0, 0.0));

        let truth = pa(&[(0, 0), (1, 1)]);
        assert_eq!(
            error_decomposition(&pa(&[(0, 0)]), &truth, &inst).unwrap(),
            (0.5, 0.0, 0.5)
        );

        let truth = pa(&[(0, 0), (2, 2)]);
        assert_eq!(error_decomposition(&pa(&[]), &truth, &inst).unwrap(), (0.0, 1.0, 1.0));
    }

    fn arb_pair() -> impl Strategy<Value = (PartialAssignment, PartialAssignment)> {
        let perm = Just((0..5usize).collect::<Vec<_>>()).prop_shuffle();
        (perm.clone(), perm, proptest::collection::vec(any::<bool>(), 5), proptest::collection::vec(any::<bool>(), 5))
            .prop_map(|(p1, p2, k1, k2)| {
                let a = PartialAssignment::from_pairs(5, 5, (0..5).filter(|&i| k1[i]).map(|i| (i, p1[i]))).unwrap();
                let mut b = PartialAssignment::from_pairs(5, 5, (0..5).filter(|&i| k2[i]).map(|i| (i, p2[i]))).unwrap();
                if b.is_empty() {
                    b = PartialAssignment::from_pairs(5, 5, [(0, p2[0])]).unwrap();
                }
                (a, b)
            })
    }

    proptest! {
        #[test]
        fn f1_bounds((pred, truth) in arb_pair()) {
            let (p, r, f) = match_f1(&pred, &truth).unwrap();
            prop_assert!(f <= 2.0 * p.min(r) + 1e-15);
            prop_assert!((0.0..=1.0).contains(&f));
            prop_assert_eq!(f == 1.0, pred == truth);
        }

        #[test]
        fn decomposition_sums(
            (pred, truth) in arb_pair(),
            c in proptest::collection::vec(0.0f64..1.0, 25),
        ) {
            let cost = ndarray::Array2::from_shape_vec((5, 5), c).unwrap();
            let inst = Instance::with_unit_biases(cost, 0.3).unwrap();
            let (p, m, t) = error_decomposition(&pred, &truth, &inst).unwrap();
            prop_assert_eq!(p + m, t);
            prop_assert!((0.0..=1.0).contains(&p) && (0.0..=1.0).contains(&m) && t <= 1.0 + 1e-15);
        }
    }
}
