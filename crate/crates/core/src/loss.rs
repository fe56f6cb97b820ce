//! Partial matching loss and its gradients.
//!
//! `L = L_cost + lambda * L_bias`, where `L_cost` is a cross-entropy on the
//! costs restricted to the attention mask `Z` (ground-truth pairs and pairs
//! under their feasibility threshold), and `L_bias` pulls the biases of
//! matched nodes towards one. `Z` is treated as a constant when
//! differentiating.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::instance::PartialAssignment;

/// Clamp applied to costs before taking logs.
pub const LOG_EPS: f64 = 1e-7;
pub const DEFAULT_LAMBDA: f64 = 0.5;
pub const DEFAULT_RHO: f64 = 0.4;

#[derive(Debug, Clone, PartialEq)]
pub struct LossInputs {
    pub cost: Array2<f64>,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    pub rho: f64,
    pub truth: PartialAssignment,
    /// Weight of the bias term. Zero switches it off (fixed biases).
    pub lambda: f64,
}

impl LossInputs {
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
        self.truth.check_dims(m, n, "ground_truth")?;
        if let Some(((i, j), _)) = self.cost.indexed_iter().find(|(_, c)| !c.is_finite()) {
            return Err(Error::NonFinite {
                what: "cost",
                index: format!("({i}, {j})"),
            });
        }
        for (which, values) in [("alpha", &self.alpha), ("beta", &self.beta)] {
            if let Some((i, &v)) = values
                .iter()
                .enumerate()
                .find(|(_, v)| !(0.0..=1.0).contains(*v))
            {
                return Err(Error::OutOfRange {
                    what: which,
                    index: i.to_string(),
                    value: v,
                });
            }
        }
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::InvalidRho(self.rho));
        }
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(Error::InvalidParameter(format!(
                "lambda must lie in [0, 1], got {}",
                self.lambda
            )));
        }
        Ok(())
    }

    fn threshold(&self, i: usize, j: usize) -> f64 {
        self.rho * (self.alpha[i] + self.beta[j])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LossReport {
    pub l_cost: f64,
    pub l_bias: f64,
    pub l_total: f64,
    pub grad_cost: Array2<f64>,
    pub grad_alpha: Vec<f64>,
    pub grad_beta: Vec<f64>,
    /// Number of entries with `Z_ij = 1`.
    pub active_pairs: usize,
}

/// `Z_ij = 1` iff `(i, j)` is a ground-truth pair or `C_ij <= rho (alpha_i + beta_j)`.
pub fn attention_mask(inputs: &LossInputs) -> Result<Array2<bool>> {
    inputs.validate()?;
    Ok(mask_unchecked(inputs))
}

fn mask_unchecked(inputs: &LossInputs) -> Array2<bool> {
    Array2::from_shape_fn(inputs.cost.dim(), |(i, j)| {
        inputs.truth.contains(i, j) || inputs.cost[[i, j]] <= inputs.threshold(i, j)
    })
}

fn clamp(c: f64) -> f64 {
    c.clamp(LOG_EPS, 1.0 - LOG_EPS)
}

/// Loss values; gradient fields are left at zero.
pub fn partial_matching_loss(inputs: &LossInputs) -> Result<LossReport> {
    inputs.validate()?;
    Ok(loss_unchecked(inputs))
}

fn loss_unchecked(inputs: &LossInputs) -> LossReport {
    let z = mask_unchecked(inputs);
    let (m, n) = inputs.cost.dim();
    let mut l_cost = 0.0;
    for ((i, j), &active) in z.indexed_iter() {
        if !active {
            continue;
        }
        let c = clamp(inputs.cost[[i, j]]);
        l_cost -= if inputs.truth.contains(i, j) {
            (1.0 - c).ln()
        } else {
            c.ln()
        };
    }
    let src = inputs.truth.source_matched();
    let tgt = inputs.truth.target_matched();
    let l_bias: f64 = inputs
        .alpha
        .iter()
        .zip(&src)
        .filter(|(_, &matched)| matched)
        .map(|(a, _)| (1.0 - a).powi(2))
        .sum::<f64>()
        + inputs
            .beta
            .iter()
            .zip(&tgt)
            .filter(|(_, &matched)| matched)
            .map(|(b, _)| (1.0 - b).powi(2))
            .sum::<f64>();
    LossReport {
        l_cost,
        l_bias,
        l_total: l_cost + inputs.lambda * l_bias,
        grad_cost: Array2::zeros((m, n)),
        grad_alpha: vec![0.0; m],
        grad_beta: vec![0.0; n],
        active_pairs: z.iter().filter(|&&a| a).count(),
    }
}

/// Loss values with analytic gradients of `l_total`.
///
/// Where the log clamp is active the cost gradient is zero.
pub fn loss_gradients(inputs: &LossInputs) -> Result<LossReport> {
    let mut report = partial_matching_loss(inputs)?;
    let z = mask_unchecked(inputs);
    for ((i, j), g) in report.grad_cost.indexed_iter_mut() {
        let c = inputs.cost[[i, j]];
        if !z[[i, j]] || !(LOG_EPS..=1.0 - LOG_EPS).contains(&c) {
            continue;
        }
        *g = if inputs.truth.contains(i, j) {
            1.0 / (1.0 - c)
        } else {
            -1.0 / c
        };
    }
    let lambda = inputs.lambda;
    for ((g, &a), matched) in report
        .grad_alpha
        .iter_mut()
        .zip(&inputs.alpha)
        .zip(inputs.truth.source_matched())
    {
        if matched {
            *g = -2.0 * lambda * (1.0 - a);
        }
    }
    for ((g, &b), matched) in report
        .grad_beta
        .iter_mut()
        .zip(&inputs.beta)
        .zip(inputs.truth.target_matched())
    {
        if matched {
            *g = -2.0 * lambda * (1.0 - b);
        }
    }
    Ok(report)
}

/// Compares analytic gradients with central differences of `l_total` over
/// every cost, `alpha` and `beta` coordinate and returns the largest
/// relative error.
///
/// Requires `h` in `[1e-7, 1e-4]` and every cost at least `2h` away from
/// the clamp bounds and from its feasibility threshold (scaled by
/// `max(1, rho)` for bias perturbations), so that `Z` and the clamp do not
/// change inside the stencil.
pub fn finite_difference_check(inputs: &LossInputs, h: f64) -> Result<f64> {
    inputs.validate()?;
    if !(1e-7..=1e-4).contains(&h) {
        return Err(Error::InvalidParameter(format!(
            "finite-difference step must lie in [1e-7, 1e-4], got {h}"
        )));
    }
    let margin = 2.0 * h;
    let threshold_margin = margin * inputs.rho.max(1.0);
    for ((i, j), &c) in inputs.cost.indexed_iter() {
        if c - LOG_EPS <= margin || (1.0 - LOG_EPS) - c <= margin {
            return Err(Error::NearKink(format!(
                "cost ({i}, {j}) = {c} is within {margin} of the log clamp"
            )));
        }
        let gap = (c - inputs.threshold(i, j)).abs();
        if gap <= threshold_margin {
            return Err(Error::NearKink(format!(
                "cost ({i}, {j}) = {c} is within {threshold_margin} of its feasibility threshold"
            )));
        }
    }

    let analytic = loss_gradients(inputs)?;
    // probes may step a bias just outside [0, 1]; the loss is smooth there
    let loss_at = |probe: &LossInputs| -> f64 { loss_unchecked(probe).l_total };
    let mut worst: f64 = 0.0;
    let mut probe = inputs.clone();

    for ((i, j), &g) in analytic.grad_cost.indexed_iter() {
        let c = inputs.cost[[i, j]];
        probe.cost[[i, j]] = c + h;
        let up = loss_at(&probe);
        probe.cost[[i, j]] = c - h;
        let down = loss_at(&probe);
        probe.cost[[i, j]] = c;
        worst = worst.max(relative_error(g, (up - down) / (2.0 * h)));
    }
    for (i, &g) in analytic.grad_alpha.iter().enumerate() {
        let a = inputs.alpha[i];
        probe.alpha[i] = a + h;
        let up = loss_at(&probe);
        probe.alpha[i] = a - h;
        let down = loss_at(&probe);
        probe.alpha[i] = a;
        worst = worst.max(relative_error(g, (up - down) / (2.0 * h)));
    }
    for (j, &g) in analytic.grad_beta.iter().enumerate() {
        let b = inputs.beta[j];
        probe.beta[j] = b + h;
        let up = loss_at(&probe);
        probe.beta[j] = b - h;
        let down = loss_at(&probe);
        probe.beta[j] = b;
        worst = worst.max(relative_error(g, (up - down) / (2.0 * h)));
    }
    Ok(worst)
}

/// `|a - b| / max(|a|, |b|)`, falling back to the absolute error when both
/// are below `1e-12`.
fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-12 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn single(c: f64, alpha: f64, lambda: f64, rho: f64) -> LossInputs {
        LossInputs {
            cost: array![[c]],
            alpha: vec![alpha],
            beta: vec![1.0],
            rho,
            truth: PartialAssignment::from_pairs(1, 1, [(0, 0)]).unwrap(),
            lambda,
        }
    }

    #[test]
    fn mask_examples() {
        let mut inputs = single(0.99, 0.0, 0.5, 1e-3);
        inputs.beta = vec![0.0];
        assert_eq!(attention_mask(&inputs).unwrap(), array![[true]]);

        let inputs = LossInputs {
            cost: array![[0.2, 0.5], [0.5, 0.95]],
            alpha: vec![1.0, 1.0],
            beta: vec![1.0, 1.0],
            rho: 0.4,
            truth: PartialAssignment::from_pairs(2, 2, [(0, 0)]).unwrap(),
            lambda: 0.5,
        };
        assert_eq!(attention_mask(&inputs).unwrap(), array![[true, true], [true, false]]);

        let mut off = inputs.clone();
        off.cost[[1, 1]] = 0.9;
        off.truth = PartialAssignment::empty(2, 2);
        assert!(!attention_mask(&off).unwrap()[[1, 1]]);
    }

    #[test]
    fn single_entry_values() {
        let r = partial_matching_loss(&single(0.5, 1.0, 0.5, 1e3)).unwrap();
        assert!((r.l_cost - 2.0f64.ln()).abs() < 1e-12);
        assert_eq!(r.l_bias, 0.0);
        assert!((r.l_total - std::f64::consts::LN_2).abs() < 1e-12);

        let r = partial_matching_loss(&single(0.5, 0.5, 1.0, 1e3)).unwrap();
        assert!((r.l_bias - 0.25).abs() < 1e-15);
        assert!((r.l_total - (2.0f64.ln() + 0.25)).abs() < 1e-12);

        let r = partial_matching_loss(&single(0.0, 1.0, 0.5, 1e3)).unwrap();
        assert!(r.l_total < 1e-6);
    }

    #[test]
    fn single_entry_gradients() {
        let r = loss_gradients(&single(0.5, 0.5, 1.0, 1e3)).unwrap();
        assert!((r.grad_cost[[0, 0]] - 2.0).abs() < 1e-12);
        assert!((r.grad_alpha[0] + 1.0).abs() < 1e-12);
        assert_eq!(r.grad_beta[0], 0.0);
    }

    #[test]
    fn masked_entries_have_zero_gradient() {
        let inputs = LossInputs {
            cost: array![[0.3, 0.95], [0.97, 0.2]],
            alpha: vec![1.0, 1.0],
            beta: vec![1.0, 1.0],
            rho: 0.4,
            truth: PartialAssignment::from_pairs(2, 2, [(0, 0)]).unwrap(),
            lambda: 0.5,
        };
        let r = loss_gradients(&inputs).unwrap();
        assert_eq!(r.active_pairs, 2);
        assert_eq!(r.grad_cost[[0, 1]], 0.0);
        assert_eq!(r.grad_cost[[1, 0]], 0.0);
        assert!((r.grad_cost[[1, 1]] + 5.0).abs() < 1e-12);
    }

    #[test]
    fn lambda_zero_disables_bias() {
        let r = loss_gradients(&single(0.5, 0.2, 0.0, 1e3)).unwrap();
        assert_eq!(r.l_total, r.l_cost);
        assert_eq!(r.grad_alpha[0], 0.0);
    }

    #[test]
    fn validation() {
        let mut bad = single(0.5, 0.5, 1.0, 1.0);
        bad.lambda = 1.5;
        assert!(partial_matching_loss(&bad).is_err());
        let mut bad = single(0.5, 0.5, 1.0, 1.0);
        bad.alpha = vec![1.2];
        assert!(partial_matching_loss(&bad).is_err());
        let mut bad = single(0.5, 0.5, 1.0, 1.0);
        bad.beta = vec![];
        assert!(partial_matching_loss(&bad).is_err());
    }

    #[test]
    fn fd_single_entry() {
        let err = finite_difference_check(&single(0.5, 0.5, 1.0, 1e3), 1e-5).unwrap();
        assert!(err < 1e-8, "{err}");
    }

    #[test]
    fn fd_guards() {
        // threshold rho (alpha + beta) = 0.4 * 2 = 0.8
        let mut near = single(0.8 + 1e-6, 1.0 - 1e-3, 0.5, 0.4);
        near.alpha = vec![0.999];
        near.cost[[0, 0]] = 0.4 * (0.999 + 1.0) + 5e-6;
        assert!(matches!(finite_difference_check(&near, 1e-5), Err(Error::NearKink(_))));

        let edge = single(1e-6, 0.5, 1.0, 1e3);
        assert!(matches!(finite_difference_check(&edge, 1e-5), Err(Error::NearKink(_))));

        let ok = single(0.5, 0.5, 1.0, 1e3);
        assert!(finite_difference_check(&ok, 1e-2).is_err());
    }

    fn kink_free() -> impl Strategy<Value = LossInputs> {
        (1usize..5, 1usize..6, 0.1f64..1.0, 0.0f64..=1.0)
            .prop_flat_map(|(m, n, rho, lambda)| {
                (
                    proptest::collection::vec(0.01f64..0.99, m * n),
                    proptest::collection::vec(0.01f64..0.99, m),
                    proptest::collection::vec(0.01f64..0.99, n),
                    Just((0..n).collect::<Vec<_>>()).prop_shuffle(),
                    proptest::collection::vec(any::<bool>(), m),
                    Just((m, n, rho, lambda)),
                )
            })
            .prop_map(|(c, a, b, cols, keep, (m, n, rho, lambda))| {
                let mut cost = Array2::from_shape_vec((m, n), c).unwrap();
                // push costs off their thresholds
                for ((i, j), x) in cost.indexed_iter_mut() {
                    let t = rho * (a[i] + b[j]);
                    if (*x - t).abs() < 1e-3 {
                        *x = if t > 0.5 { t - 2e-3 } else { t + 2e-3 };
                    }
                }
                let truth = PartialAssignment::from_pairs(
                    m,
                    n,
                    (0..m.min(n)).filter(|&i| keep[i]).map(|i| (i, cols[i])),
                )
                .unwrap();
                LossInputs { cost, alpha: a, beta: b, rho, truth, lambda }
            })
    }

    proptest! {
        #[test]
        fn gradients_match_finite_differences(inputs in kink_free()) {
            let err = finite_difference_check(&inputs, 1e-5).unwrap();
            prop_assert!(err < 1e-5, "max relative error {err}");
        }

        #[test]
        fn report_invariants(inputs in kink_free()) {
            let r = loss_gradients(&inputs).unwrap();
            prop_assert!(r.l_cost >= 0.0 && r.l_bias >= 0.0);
            prop_assert!((r.l_total - r.l_cost - inputs.lambda * r.l_bias).abs() < 1e-12);
            let z = attention_mask(&inputs).unwrap();
            for ((i, j), &g) in r.grad_cost.indexed_iter() {
                if !z[[i, j]] {
                    prop_assert_eq!(g, 0.0);
                }
            }
        }

        #[test]
        fn cost_loss_decreases_towards_truth(inputs in kink_free(), t in 0.05f64..0.95) {
            // move every active entry a fraction t of the way to its target
            let z = attention_mask(&inputs).unwrap();
            let mut moved = inputs.clone();
            for ((i, j), c) in moved.cost.indexed_iter_mut() {
                if z[[i, j]] {
                    let target = if inputs.truth.contains(i, j) { 0.0 } else { 1.0 };
                    *c += t * (target - *c);
                }
            }
            // keep Z fixed for the comparison
            moved.rho = inputs.rho;
            let before = partial_matching_loss(&inputs).unwrap();
            let after_mask = attention_mask(&moved).unwrap();
            prop_assume!(after_mask == z);
            let after = partial_matching_loss(&moved).unwrap();
            prop_assert!(after.l_cost <= before.l_cost + 1e-12);
        }
    }
}
