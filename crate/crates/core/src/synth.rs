//! Synthetic instances with planted matchings, and parameter sweeps.

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::instance::{Instance, PartialAssignment};
use crate::loss::{partial_matching_loss, LossInputs};
use crate::metrics::match_f1;
use crate::parallel;
use crate::pgm::solve;

/// Two-band cost model: `k` planted pairs at `matched_cost`, every other
/// pair uniform in `[base_low, base_high]`, plus Gaussian noise, clipped to
/// `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantSpec {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub noise_sigma: f64,
    pub base_low: f64,
    pub base_high: f64,
    pub matched_cost: f64,
    pub rho: f64,
    pub seed: u64,
}

impl Default for PlantSpec {
    fn default() -> Self {
        Self {
            m: 8,
            n: 10,
            k: 6,
            noise_sigma: 0.0,
            base_low: 0.85,
            base_high: 1.0,
            matched_cost: 0.05,
            rho: 0.4,
            seed: 0,
        }
    }
}

impl PlantSpec {
    pub fn validate(&self) -> Result<()> {
        if self.k > self.m.min(self.n) {
            return Err(Error::InvalidParameter(format!(
                "planted count k = {} exceeds min(m, n) = {}",
                self.k,
                self.m.min(self.n)
            )));
        }
        let finite = [self.noise_sigma, self.base_low, self.base_high, self.matched_cost];
        if finite.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("plant parameters must be finite".into()));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::InvalidParameter("noise_sigma must be >= 0".into()));
        }
        if self.base_low > self.base_high {
            return Err(Error::InvalidParameter(format!(
                "base_low {} > base_high {}",
                self.base_low, self.base_high
            )));
        }
        if !(self.rho.is_finite() && self.rho > 0.0) {
            return Err(Error::InvalidRho(self.rho));
        }
        Ok(())
    }
}

/// Draws an instance with unit biases whose ground truth is the planted
/// matching. Identical specs give identical instances.
pub fn planted_instance(spec: &PlantSpec) -> Result<Instance> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut rows: Vec<usize> = (0..spec.m).collect();
    let mut cols: Vec<usize> = (0..spec.n).collect();
    rows.shuffle(&mut rng);
    cols.shuffle(&mut rng);
    let truth = PartialAssignment::from_pairs(
        spec.m,
        spec.n,
        rows.iter().copied().zip(cols.iter().copied()).take(spec.k),
    )?;
    let noise = Normal::new(0.0, spec.noise_sigma)
        .map_err(|e| Error::InvalidParameter(e.to_string()))?;
    let mut cost = Array2::zeros((spec.m, spec.n));
    for ((i, j), c) in cost.indexed_iter_mut() {
        let base = if truth.contains(i, j) {
            spec.matched_cost
        } else {
            rng.gen_range(spec.base_low..=spec.base_high)
        };
        let jitter = if spec.noise_sigma > 0.0 {
            noise.sample(&mut rng)
        } else {
            0.0
        };
        *c = (base + jitter).clamp(0.0, 1.0);
    }
    Instance::with_unit_biases(cost, spec.rho)?.with_ground_truth(truth)
}

/// Uniform random instance: `C`, `alpha`, `beta` all `U[0, 1]`.
pub fn random_instance<R: Rng + ?Sized>(rng: &mut R, m: usize, n: usize, rho: f64) -> Result<Instance> {
    let cost = Array2::from_shape_fn((m, n), |_| rng.gen::<f64>());
    let alpha = (0..m).map(|_| rng.gen::<f64>()).collect();
    let beta = (0..n).map(|_| rng.gen::<f64>()).collect();
    Instance::new(cost, alpha, beta, rho)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoSweepRow {
    pub rho: f64,
    pub matched: usize,
    pub total_cost: f64,
    /// `<alpha, 1 - pi_1> + <beta, 1 - pi_2>`; non-increasing in `rho`.
    pub unmatched_mass: f64,
    /// F1 against the ground truth, when the instance has a non-empty one.
    pub f1: Option<f64>,
}

fn check_grid(values: &[f64], name: &str, positive: bool) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidParameter(format!("{name} grid is empty")));
    }
    if values.iter().any(|v| !v.is_finite() || (positive && *v <= 0.0)) {
        return Err(Error::InvalidParameter(format!("{name} values must be finite and positive")));
    }
    if values.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParameter(format!("{name} grid must be sorted ascending")));
    }
    Ok(())
}

/// Solves `inst` at every `rho` in an ascending grid. Rows come back in
/// grid order; the solves run on the worker pool.
pub fn rho_sweep(inst: &Instance, rhos: &[f64]) -> Result<Vec<RhoSweepRow>> {
    inst.validate()?;
    check_grid(rhos, "rho", true)?;
    parallel::install(|| {
        rhos.par_iter()
            .map(|&rho| {
                let mut at = inst.clone();
                at.rho = rho;
                let report = solve(&at)?;
                let f1 = match &inst.ground_truth {
                    Some(t) if !t.is_empty() => Some(match_f1(&report.assignment, t)?.2),
                    _ => None,
                };
                Ok(RhoSweepRow {
                    rho,
                    matched: report.matched(),
                    total_cost: report.total_cost,
                    unmatched_mass: report.unmatched_mass,
                    f1,
                })
            })
            .collect()
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LambdaSweepRow {
    pub lambda: f64,
    pub l_cost: f64,
    pub l_bias: f64,
    pub l_total: f64,
}

/// Evaluates the loss of `inst` against its ground truth for each `lambda`.
pub fn lambda_sweep(inst: &Instance, lambdas: &[f64]) -> Result<Vec<LambdaSweepRow>> {
    inst.validate()?;
    check_grid(lambdas, "lambda", false)?;
    let truth = inst
        .ground_truth
        .clone()
        .ok_or_else(|| Error::InvalidParameter("lambda sweep needs a ground truth".into()))?;
    lambdas
        .iter()
        .map(|&lambda| {
            let r = partial_matching_loss(&LossInputs {
                cost: inst.cost.clone(),
                alpha: inst.alpha.clone(),
                beta: inst.beta.clone(),
                rho: inst.rho,
                truth: truth.clone(),
                lambda,
            })?;
            Ok(LambdaSweepRow {
                lambda,
                l_cost: r.l_cost,
                l_bias: r.l_bias,
                l_total: r.l_total,
            })
        })
        .collect()
}
