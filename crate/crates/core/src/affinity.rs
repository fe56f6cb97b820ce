//! Cost matrix and matching biases from a cross-graph affinity matrix.
//!
//! `S = sinkhorn(A)` has unit row sums and column sums at most one, the cost
//! is `C = 1 - S`, and the biases are squashed row/column maxima of the
//! positive part of `A`.

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::instance::Instance;

/// Cross-graph node-to-node affinities (finite, otherwise unconstrained).
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityMatrix(Array2<f64>);

impl AffinityMatrix {
    pub fn new(values: Array2<f64>) -> Result<Self> {
        if let Some(((i, j), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "affinity",
                index: format!("({i}, {j})"),
            });
        }
        Ok(Self(values))
    }

    pub fn values(&self) -> &Array2<f64> {
        &self.0
    }

    pub fn dim(&self) -> (usize, usize) {
        self.0.dim()
    }

    pub fn transpose(&self) -> Self {
        Self(self.0.t().to_owned())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SinkhornConfig {
    /// Temperature applied before exponentiation, `exp(A / tau)`.
    pub temperature: f64,
    pub max_iters: usize,
    /// Target bound on the marginal residuals.
    pub tol: f64,
}

impl Default for SinkhornConfig {
    fn default() -> Self {
        Self {
            temperature: 0.1,
            max_iters: 200,
            tol: 1e-6,
        }
    }
}

impl SinkhornConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sinkhorn temperature must be > 0, got {}",
                self.temperature
            )));
        }
        if !(self.tol.is_finite() && self.tol > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "sinkhorn tol must be > 0, got {}",
                self.tol
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("sinkhorn max_iters must be positive".into()));
        }
        Ok(())
    }
}

/// Output of [`sinkhorn_normalize`]. A run that hits `max_iters` still
/// returns its last iterate with `converged = false`.
#[derive(Debug, Clone, PartialEq)]
pub struct SinkhornResult {
    pub s: Array2<f64>,
    pub iterations: usize,
    /// Largest row-sum deviation of the padded square iterate when stopped.
    pub residual: f64,
    pub converged: bool,
}

fn logsumexp(values: impl Iterator<Item = f64> + Clone) -> f64 {
    let max = values.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Sinkhorn normalization of an `m x n` affinity matrix with `m <= n`.
///
/// `exp(A / tau)` is padded with `n - m` uniform rows and scaled to a doubly
/// stochastic `n x n` matrix; the padding is then dropped and the rows
/// renormalized, so `S 1_n = 1_m` and `S^T 1_m <= 1_n + tol`. Scalings are
/// kept in the log domain, which subtracts running maxima before every
/// exponentiation.
pub fn sinkhorn_normalize(a: &AffinityMatrix, cfg: &SinkhornConfig) -> Result<SinkhornResult> {
    cfg.validate()?;
    let (m, n) = a.dim();
    if m > n {
        return Err(Error::InvalidParameter(format!(
            "sinkhorn requires m <= n, got {m}x{n}"
        )));
    }
    if m == 0 {
        return Ok(SinkhornResult {
            s: Array2::zeros((0, n)),
            iterations: 0,
            residual: 0.0,
            converged: true,
        });
    }

    let kernel = Array2::from_shape_fn((n, n), |(i, j)| {
        if i < m {
            a.0[[i, j]] / cfg.temperature
        } else {
            0.0
        }
    });
    let mut f = vec![0.0f64; n];
    let mut g = vec![0.0f64; n];
    // the final row renormalization inflates column sums by at most
    // 1 / (1 - residual); stopping at tol / 2 keeps that within tol
    let stop = cfg.tol / 2.0;
    let mut residual = f64::INFINITY;
    let mut iterations = 0;

    while iterations < cfg.max_iters {
        iterations += 1;
        for (i, fi) in f.iter_mut().enumerate() {
            let row = kernel.row(i);
            *fi = -logsumexp(row.iter().zip(&g).map(|(k, gj)| k + gj));
        }
        for (j, gj) in g.iter_mut().enumerate() {
            let col = kernel.column(j);
            *gj = -logsumexp(col.iter().zip(&f).map(|(k, fi)| k + fi));
        }
        residual = (0..n)
            .map(|i| {
                let s: f64 = (0..n).map(|j| (kernel[[i, j]] + f[i] + g[j]).exp()).sum();
                (s - 1.0).abs()
            })
            .fold(0.0, f64::max);
        if residual <= stop {
            break;
        }
    }

    let mut s = Array2::from_shape_fn((m, n), |(i, j)| (kernel[[i, j]] + f[i] + g[j]).exp());
    for mut row in s.rows_mut() {
        let total: f64 = row.sum();
        row.mapv_inplace(|x| x / total);
    }
    Ok(SinkhornResult {
        s,
        iterations,
        residual,
        converged: residual <= stop,
    })
}

/// `C_ij = 1 - S_ij`; entries of `S` must lie in `[0, 1]` up to `1e-9`.
pub fn cost_from_affinity(s: &Array2<f64>) -> Result<Array2<f64>> {
    const SLACK: f64 = 1e-9;
    if let Some(((i, j), &v)) = s
        .indexed_iter()
        .find(|(_, v)| !(v.is_finite() && **v >= -SLACK && **v <= 1.0 + SLACK))
    {
        return Err(Error::OutOfRange {
            what: "normalized affinity",
            index: format!("({i}, {j})"),
            value: v,
        });
    }
    Ok(s.mapv(|x| 1.0 - x))
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Matching biases from the positive part of the affinities:
/// `alpha_i = 2 (sigmoid(w_rs * max_j A+_ij) - 0.5)` and likewise for
/// `beta_j` over columns. Values lie in `[0, 1)`.
pub fn matching_biases(a: &AffinityMatrix, w_rs: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(w_rs.is_finite() && w_rs >= 0.0) {
        return Err(Error::InvalidParameter(format!("w_rs must be >= 0, got {w_rs}")));
    }
    let bias = |r: f64| 2.0 * (sigmoid(w_rs * r) - 0.5);
    let positive = a.0.mapv(|x| x.max(0.0));
    let alpha = positive
        .rows()
        .into_iter()
        .map(|row| bias(row.iter().copied().fold(0.0, f64::max)))
        .collect();
    let beta = positive
        .columns()
        .into_iter()
        .map(|col| bias(col.iter().copied().fold(0.0, f64::max)))
        .collect();
    Ok((alpha, beta))
}

/// An instance built from affinities, plus the normalization diagnostics.
#[derive(Debug, Clone)]
pub struct DerivedInstance {
    pub instance: Instance,
    pub sinkhorn: SinkhornResult,
}

/// Full affinity pipeline: Sinkhorn, `C = 1 - S`, and biases.
///
/// When `m > n` the normalization runs on the transpose so that rows of the
/// smaller side sum to one; the result is transposed back.
pub fn instance_from_affinity(
    a: &AffinityMatrix,
    w_rs: f64,
    rho: f64,
    cfg: &SinkhornConfig,
) -> Result<DerivedInstance> {
    let (m, n) = a.dim();
    let mut sinkhorn = if m > n {
        sinkhorn_normalize(&a.transpose(), cfg)?
    } else {
        sinkhorn_normalize(a, cfg)?
    };
    if m > n {
        sinkhorn.s = sinkhorn.s.t().to_owned();
    }
    let cost = cost_from_affinity(&sinkhorn.s)?;
    let (alpha, beta) = matching_biases(a, w_rs)?;
    let instance = Instance::new(cost, alpha, beta, rho)?;
    Ok(DerivedInstance { instance, sinkhorn })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn aff(a: Array2<f64>) -> AffinityMatrix {
        AffinityMatrix::new(a).unwrap()
    }

    fn row_sums(s: &Array2<f64>) -> Vec<f64> {
        s.rows().into_iter().map(|r| r.sum()).collect()
    }

    fn col_sums(s: &Array2<f64>) -> Vec<f64> {
        s.columns().into_iter().map(|c| c.sum()).collect()
    }

    #[test]
    fn zeros_give_uniform() {
        let r = sinkhorn_normalize(&aff(Array2::zeros((2, 2))), &SinkhornConfig::default()).unwrap();
        for &x in r.s.iter() {
            assert!((x - 0.5).abs() < 1e-12);
        }
        assert!(r.converged);
    }

    #[test]
    fn single_cell() {
        for x in [-50.0, 0.0, 3.0, 1e3] {
            let r = sinkhorn_normalize(&aff(array![[x]]), &SinkhornConfig::default()).unwrap();
            assert_eq!(r.s, array![[1.0]]);
        }
    }

    #[test]
    fn diagonal_dominant() {
        let cfg = SinkhornConfig {
            temperature: 1.0,
            max_iters: 200,
            tol: 1e-8,
        };
        let r = sinkhorn_normalize(&aff(array![[10.0, 0.0], [0.0, 10.0]]), &cfg).unwrap();
        assert!(r.converged);
        for s in row_sums(&r.s).into_iter().chain(col_sums(&r.s)) {
            assert!((s - 1.0).abs() < 1e-6);
        }
        assert!(r.s[[0, 0]] > 0.99 && r.s[[1, 1]] > 0.99);
        // exp(10) / (exp(10) + 1)
        let expected = 1.0 / (1.0 + (-10.0f64).exp());
        assert!((r.s[[0, 0]] - expected).abs() < 1e-9);

        let c = cost_from_affinity(&r.s).unwrap();
        assert!(c[[0, 0]] < 1e-4 && c[[1, 1]] < 1e-4);
        assert!(c[[0, 1]] > 0.9999 && c[[1, 0]] > 0.9999);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(AffinityMatrix::new(array![[f64::NAN]]).is_err());
        let cfg = SinkhornConfig {
            temperature: 0.0,
            ..Default::default()
        };
        assert!(sinkhorn_normalize(&aff(array![[1.0]]), &cfg).is_err());
        assert!(sinkhorn_normalize(&aff(Array2::zeros((3, 2))), &SinkhornConfig::default()).is_err());
    }

    #[test]
    fn reports_non_convergence() {
        let cfg = SinkhornConfig {
            temperature: 0.01,
            max_iters: 1,
            tol: 1e-12,
        };
        let a = array![[1.0, 0.9, 0.0], [0.95, 0.2, 0.1]];
        let r = sinkhorn_normalize(&aff(a), &cfg).unwrap();
        assert!(!r.converged);
        assert_eq!(r.iterations, 1);
        assert!(r.residual > 0.0);
        for s in row_sums(&r.s) {
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn cost_examples() {
        assert_eq!(cost_from_affinity(&array![[1.0, 0.0]]).unwrap(), array![[0.0, 1.0]]);
        assert_eq!(
            cost_from_affinity(&Array2::from_elem((2, 3), 0.5)).unwrap(),
            Array2::from_elem((2, 3), 0.5)
        );
        assert!(cost_from_affinity(&array![[1.1]]).is_err());
        assert!(cost_from_affinity(&array![[-0.01]]).is_err());
    }

    #[test]
    fn bias_examples() {
        let a = aff(array![[1.0, -2.0], [0.5, 3.0]]);
        let (alpha, beta) = matching_biases(&a, 0.0).unwrap();
        assert!(alpha.iter().chain(&beta).all(|&b| b == 0.0));

        let (alpha, beta) = matching_biases(&aff(Array2::from_elem((2, 3), -1.0)), 5.0).unwrap();
        assert!(alpha.iter().chain(&beta).all(|&b| b == 0.0));

        let (alpha, beta) = matching_biases(&aff(array![[1.0]]), 3.0f64.ln()).unwrap();
        assert!((alpha[0] - 0.5).abs() < 1e-12);
        assert!((beta[0] - 0.5).abs() < 1e-12);

        assert!(matching_biases(&a, -1.0).is_err());
    }

    #[test]
    fn pipeline_handles_tall_inputs() {
        let a = aff(array![[2.0, 0.0], [0.0, 2.0], [1.0, 1.0]]);
        let d = instance_from_affinity(&a, 1.0, 0.4, &SinkhornConfig::default()).unwrap();
        assert_eq!(d.instance.cost.dim(), (3, 2));
        for s in col_sums(&d.sinkhorn.s) {
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    fn arb_affinity() -> impl Strategy<Value = Array2<f64>> {
        (1usize..8)
            .prop_flat_map(|m| (Just(m), m..10))
            .prop_flat_map(|(m, n)| {
                proptest::collection::vec(-2.0f64..2.0, m * n)
                    .prop_map(move |v| Array2::from_shape_vec((m, n), v).unwrap())
            })
    }

    proptest! {
        #[test]
        fn marginal_contract(a in arb_affinity()) {
            let cfg = SinkhornConfig { temperature: 0.5, max_iters: 5000, tol: 1e-6 };
            let r = sinkhorn_normalize(&aff(a), &cfg).unwrap();
            prop_assert!(r.converged, "residual {}", r.residual);
            for s in row_sums(&r.s) {
                prop_assert!((s - 1.0).abs() <= 1e-6);
            }
            for s in col_sums(&r.s) {
                prop_assert!(s <= 1.0 + 1e-6);
            }
            prop_assert!(r.s.iter().all(|&x| (0.0..=1.0).contains(&x)));
        }

        #[test]
        fn biases_monotone_and_bounded(
            a in arb_affinity(),
            w in 0.0f64..5.0,
            bump in 0.0f64..3.0,
            at in any::<proptest::sample::Index>(),
        ) {
            let (alpha, beta) = matching_biases(&aff(a.clone()), w).unwrap();
            prop_assert!(alpha.iter().chain(&beta).all(|&b| (0.0..1.0).contains(&b)));
            let (m, n) = a.dim();
            let k = at.index(m * n);
            let (i, j) = (k / n, k % n);
            let mut raised = a.clone();
            raised[[i, j]] += bump;
            let (alpha2, beta2) = matching_biases(&aff(raised), w).unwrap();
            prop_assert!(alpha2[i] >= alpha[i]);
            prop_assert!(beta2[j] >= beta[j]);
        }

        #[test]
        fn cost_map_involution(v in proptest::collection::vec(0.0f64..=1.0, 1..20)) {
            let s = Array2::from_shape_vec((1, v.len()), v).unwrap();
            let back = cost_from_affinity(&cost_from_affinity(&s).unwrap()).unwrap();
            for (x, y) in s.iter().zip(back.iter()) {
                prop_assert!((x - y).abs() <= 1e-15);
            }
        }
    }
}
