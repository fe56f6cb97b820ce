//! JSON instance and report files.
//!
//! Files use 1-based `[source, target]` pairs; everything is converted to
//! 0-based indices on load. Canonical output has sorted keys, no
//! insignificant whitespace, every float printed with 17 significant
//! digits, and a trailing LF, so `write(read(file))` reproduces a canonical
//! file byte for byte.

use std::io;

use ndarray::Array2;
use serde::{Deserialize, Serialize};
use serde_json::ser::Formatter;
use serde_json::Value;

use crate::affinity::{instance_from_affinity, AffinityMatrix, SinkhornConfig, SinkhornResult};
use crate::error::{Error, Result};
use crate::instance::{Instance, PartialAssignment};
use crate::loss::DEFAULT_RHO;
use crate::metrics::MatchMetrics;
use crate::pgm::SolveReport;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SinkhornSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
}

impl SinkhornSection {
    pub fn config(&self) -> SinkhornConfig {
        let d = SinkhornConfig::default();
        SinkhornConfig {
            temperature: self.tau.unwrap_or(d.temperature),
            max_iters: self.max_iters.unwrap_or(d.max_iters),
            tol: self.tol.unwrap_or(d.tol),
        }
    }
}

/// On-disk problem description, either in cost mode (`cost`, `alpha`,
/// `beta`) or affinity mode (`affinity`, `w_rs`, optional `sinkhorn`).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cost: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<Vec<[usize; 2]>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affinity: Option<Vec<Vec<f64>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub w_rs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sinkhorn: Option<SinkhornSection>,
}

/// A loaded problem. `sinkhorn` is set in affinity mode.
#[derive(Debug, Clone)]
pub struct LoadedInstance {
    pub instance: Instance,
    pub sinkhorn: Option<SinkhornResult>,
}

impl InstanceFile {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn to_canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("instance files always serialize");
        to_canonical_string(&value)
    }

    /// Cost-mode file for an instance.
    pub fn from_instance(inst: &Instance) -> Self {
        Self {
            m: Some(inst.m()),
            n: Some(inst.n()),
            cost: Some(inst.cost.rows().into_iter().map(|r| r.to_vec()).collect()),
            alpha: Some(inst.alpha.clone()),
            beta: Some(inst.beta.clone()),
            rho: Some(inst.rho),
            ground_truth: inst
                .ground_truth
                .as_ref()
                .map(|t| t.pairs().map(|(i, j)| [i + 1, j + 1]).collect()),
            ..Default::default()
        }
    }

    /// Builds the validated instance, deriving costs and biases first in
    /// affinity mode. `rho_override` replaces the file's `rho`, which
    /// otherwise defaults to 0.4.
    pub fn load(&self, rho_override: Option<f64>) -> Result<LoadedInstance> {
        let rho = rho_override.or(self.rho).unwrap_or(DEFAULT_RHO);
        match (&self.cost, &self.affinity) {
            (Some(cost), None) => {
                if self.w_rs.is_some() || self.sinkhorn.is_some() {
                    return Err(Error::Format(
                        "w_rs and sinkhorn only apply to affinity-mode files".into(),
                    ));
                }
                let cost = self.matrix("cost", cost)?;
                let alpha = self.alpha.clone().ok_or_else(|| missing("alpha"))?;
                let beta = self.beta.clone().ok_or_else(|| missing("beta"))?;
                let inst = Instance::new(cost, alpha, beta, rho)?;
                let inst = self.attach_truth(inst)?;
                Ok(LoadedInstance {
                    instance: inst,
                    sinkhorn: None,
                })
            }
            (None, Some(aff)) => {
                if self.alpha.is_some() || self.beta.is_some() {
                    return Err(Error::Format(
                        "alpha and beta are derived in affinity mode and must be omitted".into(),
                    ));
                }
                let a = AffinityMatrix::new(self.matrix("affinity", aff)?)?;
                let w_rs = self.w_rs.ok_or_else(|| missing("w_rs"))?;
                let cfg = self.sinkhorn.unwrap_or(SinkhornSection {
                    tau: None,
                    max_iters: None,
                    tol: None,
                });
                let derived = instance_from_affinity(&a, w_rs, rho, &cfg.config())?;
                let inst = self.attach_truth(derived.instance)?;
                Ok(LoadedInstance {
                    instance: inst,
                    sinkhorn: Some(derived.sinkhorn),
                })
            }
            (Some(_), Some(_)) => Err(Error::Format(
                "exactly one of cost and affinity may be given, found both".into(),
            )),
            (None, None) => Err(Error::Format(
                "exactly one of cost and affinity must be given, found neither".into(),
            )),
        }
    }

    fn matrix(&self, what: &'static str, rows: &[Vec<f64>]) -> Result<Array2<f64>> {
        let m = rows.len();
        if let Some(expected) = self.m {
            if expected != m {
                return Err(Error::DimensionMismatch {
                    what: "m",
                    expected,
                    found: m,
                });
            }
        }
        let n = match (self.n, rows.first()) {
            (Some(n), _) => n,
            (None, Some(first)) => first.len(),
            (None, None) => {
                return Err(Error::Format(format!("{what} is empty and n is not given")));
            }
        };
        for row in rows {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    what,
                    expected: n,
                    found: row.len(),
                });
            }
        }
        Ok(Array2::from_shape_fn((m, n), |(i, j)| rows[i][j]))
    }

    fn attach_truth(&self, inst: Instance) -> Result<Instance> {
        let Some(pairs) = &self.ground_truth else {
            return Ok(inst);
        };
        let (m, n) = (inst.m(), inst.n());
        let zero_based = pairs
            .iter()
            .map(|&[i, j]| {
                if i == 0 || j == 0 {
                    Err(Error::IndexOutOfRange { row: i, col: j, m, n })
                } else {
                    Ok((i - 1, j - 1))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        let truth = PartialAssignment::from_pairs(m, n, zero_based).map_err(to_one_based)?;
        inst.with_ground_truth(truth)
    }
}

fn missing(key: &str) -> Error {
    Error::Format(format!("missing key: {key}"))
}

fn to_one_based(e: Error) -> Error {
    match e {
        Error::DuplicateSource(i) => Error::DuplicateSource(i + 1),
        Error::DuplicateTarget(j) => Error::DuplicateTarget(j + 1),
        Error::IndexOutOfRange { row, col, m, n } => Error::IndexOutOfRange {
            row: row + 1,
            col: col + 1,
            m,
            n,
        },
        other => other,
    }
}

/// Solver output as written by `popa solve`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportFile {
    pub pairs: Vec<[usize; 2]>,
    pub total_cost: f64,
    pub transported_cost: f64,
    pub unmatch_penalty: f64,
    pub alpha_star: f64,
    pub feasible_pairs: usize,
    pub lap_value: f64,
    pub rho: f64,
    pub transposed: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f1: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub node_correctness: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub partiality_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mismatching_error: Option<f64>,
    /// Derived biases, echoed in affinity mode.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub beta: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sinkhorn_iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sinkhorn_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sinkhorn_converged: Option<bool>,
}

impl ReportFile {
    pub fn new(
        inst: &Instance,
        report: &SolveReport,
        metrics: Option<&MatchMetrics>,
        sinkhorn: Option<&SinkhornResult>,
    ) -> Self {
        Self {
            pairs: report.assignment.pairs().map(|(i, j)| [i + 1, j + 1]).collect(),
            total_cost: report.total_cost,
            transported_cost: report.transported_cost,
            unmatch_penalty: report.unmatch_penalty,
            alpha_star: report.alpha_star,
            feasible_pairs: report.feasible_pairs,
            lap_value: report.lap_value,
            rho: inst.rho,
            transposed: report.transposed,
            precision: metrics.map(|m| m.precision),
            recall: metrics.map(|m| m.recall),
            f1: metrics.map(|m| m.f1),
            node_correctness: metrics.map(|m| m.node_correctness),
            partiality_error: metrics.map(|m| m.partiality_error),
            mismatching_error: metrics.map(|m| m.mismatching_error),
            alpha: sinkhorn.map(|_| inst.alpha.clone()),
            beta: sinkhorn.map(|_| inst.beta.clone()),
            sinkhorn_iterations: sinkhorn.map(|s| s.iterations),
            sinkhorn_residual: sinkhorn.map(|s| s.residual),
            sinkhorn_converged: sinkhorn.map(|s| s.converged),
        }
    }

    pub fn to_canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("reports always serialize");
        to_canonical_string(&value)
    }
}

/// Compact JSON writer that prints floats as `{:.16e}` (17 significant
/// digits, exact round trip for f64).
struct CanonicalFormatter;

impl Formatter for CanonicalFormatter {
    fn write_f64<W>(&mut self, writer: &mut W, value: f64) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        write!(writer, "{value:.16e}")
    }

    fn write_f32<W>(&mut self, writer: &mut W, value: f32) -> io::Result<()>
    where
        W: ?Sized + io::Write,
    {
        self.write_f64(writer, f64::from(value))
    }
}

/// Serializes `value` canonically: sorted object keys, floats with 17
/// significant digits, terminated by a single LF.
pub fn to_canonical_string(value: &Value) -> String {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, CanonicalFormatter);
    sorted(value)
        .serialize(&mut ser)
        .expect("in-memory JSON serialization cannot fail");
    out.push(b'\n');
    String::from_utf8(out).expect("serde_json emits UTF-8")
}

fn sorted(value: &Value) -> Value {
    match value {
        Value::Object(map) => {
            let mut entries: Vec<_> = map.iter().collect();
            entries.sort_by(|a, b| a.0.cmp(b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k.clone(), sorted(v))).collect())
        }
        Value::Array(items) => Value::Array(items.iter().map(sorted).collect()),
        other => other.clone(),
    }
}
