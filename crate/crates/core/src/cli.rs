//! The `popa` command-line tool.
//!
//! Exit codes: 0 on success, 1 on validation errors or failed checks, 2 on
//! I/O errors. Errors are written to stderr as one JSON object per line.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::json;

use crate::error::Error;
use crate::instance::Instance;
use crate::io::{to_canonical_string, InstanceFile, ReportFile};
use crate::loss::{finite_difference_check, loss_gradients, LossInputs, DEFAULT_LAMBDA};
use crate::metrics::evaluate;
use crate::oracle::brute_force_pgm;
use crate::parallel;
use crate::pgm::solve;
use crate::synth::{lambda_sweep, planted_instance, random_instance, rho_sweep, PlantSpec};

/// Largest allowed `time(2n) / time(n)` in `popa bench`.
pub const MAX_DOUBLING_RATIO: f64 = 10.0;

#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Io(String),
    CheckFailed(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::CheckFailed(_) => 1,
            CliError::Io(_) => 2,
        }
    }

    fn to_json(&self) -> String {
        let (kind, message) = match self {
            CliError::Validation(m) => ("validation", m),
            CliError::Io(m) => ("io", m),
            CliError::CheckFailed(m) => ("check_failed", m),
        };
        json!({ "error": kind, "message": message }).to_string()
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Validation(e.to_string())
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "popa", version, about = "Exact partial graph matching")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TransposePolicy {
    /// Solve `m > n` instances on the transpose and flip the result back.
    Auto,
    /// Reject instances with more sources than targets.
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepParam {
    Rho,
    Lambda,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve an instance file and write a JSON report.
    Solve {
        #[arg(short, long)]
        input: PathBuf,
        /// Report path; stdout when omitted.
        #[arg(short, long)]
        output: Option<PathBuf>,
        #[arg(long)]
        rho: Option<f64>,
        #[arg(long, value_enum, default_value_t = TransposePolicy::Auto)]
        transpose_policy: TransposePolicy,
    },
    /// Compare the solver with brute force on random small instances.
    Oracle {
        #[arg(long, default_value_t = 500)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 4)]
        max_m: usize,
        #[arg(long, default_value_t = 5)]
        max_n: usize,
    },
    /// Write a planted instance file.
    Gen {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        k: usize,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 0.85)]
        base_low: f64,
        #[arg(long, default_value_t = 1.0)]
        base_high: f64,
        #[arg(long, default_value_t = 0.05)]
        matched_cost: f64,
        #[arg(long, default_value_t = 0.4)]
        rho: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Sweep rho (solve) or lambda (loss) over a grid and write CSV.
    Sweep {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long, value_enum, default_value_t = SweepParam::Rho)]
        param: SweepParam,
        /// Comma-separated ascending grid.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Time `solve` on random square instances and write CSV.
    Bench {
        /// Comma-separated sizes.
        #[arg(long, value_delimiter = ',', default_values_t = [250usize, 500, 1000])]
        sizes: Vec<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 3)]
        repeats: usize,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Evaluate the loss, its gradients, and a finite-difference check.
    Loss {
        #[arg(short, long)]
        input: PathBuf,
        #[arg(long, default_value_t = DEFAULT_LAMBDA)]
        lambda: f64,
        #[arg(long, default_value_t = 1e-5)]
        h: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

/// Parses `args` and runs the command, returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("{}", e.to_json());
            e.exit_code()
        }
    }
}

pub fn execute(command: Command) -> CliResult<()> {
    match command {
        Command::Solve {
            input,
            output,
            rho,
            transpose_policy,
        } => cmd_solve(&input, output.as_deref(), rho, transpose_policy),
        Command::Oracle {
            count,
            seed,
            max_m,
            max_n,
        } => cmd_oracle(count, seed, max_m, max_n),
        Command::Gen {
            m,
            n,
            k,
            noise,
            base_low,
            base_high,
            matched_cost,
            rho,
            seed,
            output,
        } => {
            let spec = PlantSpec {
                m,
                n,
                k,
                noise_sigma: noise,
                base_low,
                base_high,
                matched_cost,
                rho,
                seed,
            };
            let inst = planted_instance(&spec)?;
            emit(output.as_deref(), &InstanceFile::from_instance(&inst).to_canonical_json())
        }
        Command::Sweep {
            input,
            param,
            values,
            output,
        } => cmd_sweep(&input, param, &values, output.as_deref()),
        Command::Bench {
            sizes,
            seed,
            repeats,
            output,
        } => {
            let rows = run_bench(&sizes, seed, repeats)?;
            emit(output.as_deref(), &bench_csv(&rows))?;
            check_bench(&rows)
        }
        Command::Loss {
            input,
            lambda,
            h,
            output,
        } => cmd_loss(&input, lambda, h, output.as_deref()),
    }
}

fn read_instance(path: &Path, rho: Option<f64>) -> CliResult<crate::io::LoadedInstance> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::Io(format!("cannot read {}: {e}", path.display())))?;
    Ok(InstanceFile::from_json(&text)?.load(rho)?)
}

fn emit(path: Option<&Path>, text: &str) -> CliResult<()> {
    match path {
        Some(p) => fs::write(p, text)
            .map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display()))),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

pub fn cmd_solve(
    input: &Path,
    output: Option<&Path>,
    rho: Option<f64>,
    policy: TransposePolicy,
) -> CliResult<()> {
    let loaded = read_instance(input, rho)?;
    let inst = &loaded.instance;
    if policy == TransposePolicy::Reject && inst.m() > inst.n() {
        return Err(CliError::Validation(format!(
            "m = {} exceeds n = {} and transposition is disabled",
            inst.m(),
            inst.n()
        )));
    }
    let report = solve(inst)?;
    let metrics = match &inst.ground_truth {
        Some(t) if !t.is_empty() => Some(evaluate(&report.assignment, t, inst)?),
        _ => None,
    };
    let file = ReportFile::new(inst, &report, metrics.as_ref(), loaded.sinkhorn.as_ref());
    emit(output, &file.to_canonical_json())
}

/// Summary of an oracle run.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleSummary {
    pub instances: usize,
    pub mismatches: usize,
    pub infeasible_pairs: usize,
    pub max_abs_diff: f64,
}

/// Solves `count` seeded random instances (`m` in `[1, max_m]`, `n` in
/// `[m, max_n]`, uniform costs and biases, `rho` in `{0.1, ..., 1.0}`) and
/// compares each optimum with brute force at tolerance `1e-9`.
pub fn oracle_run(count: usize, seed: u64, max_m: usize, max_n: usize) -> crate::Result<OracleSummary> {
    if max_m == 0 || max_n < max_m {
        return Err(Error::InvalidParameter(format!(
            "need 1 <= max_m <= max_n, got max_m = {max_m}, max_n = {max_n}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let instances = (0..count)
        .map(|_| {
            let m = rng.gen_range(1..=max_m);
            let n = rng.gen_range(m..=max_n);
            let rho = f64::from(rng.gen_range(1..=10u32)) / 10.0;
            random_instance(&mut rng, m, n, rho)
        })
        .collect::<crate::Result<Vec<Instance>>>()?;
    let results = parallel::install(|| {
        instances
            .par_iter()
            .map(|inst| -> crate::Result<(f64, usize)> {
                let r = solve(inst)?;
                let (_, best) = brute_force_pgm(inst)?;
                let bad = r
                    .assignment
                    .pairs()
                    .filter(|&(i, j)| !inst.is_feasible(i, j))
                    .count();
                Ok(((r.total_cost - best).abs(), bad))
            })
            .collect::<crate::Result<Vec<_>>>()
    })?;
    Ok(OracleSummary {
        instances: count,
        mismatches: results.iter().filter(|(d, _)| *d > 1e-9).count(),
        infeasible_pairs: results.iter().map(|(_, b)| b).sum(),
        max_abs_diff: results.iter().map(|(d, _)| *d).fold(0.0, f64::max),
    })
}

fn cmd_oracle(count: usize, seed: u64, max_m: usize, max_n: usize) -> CliResult<()> {
    let s = oracle_run(count, seed, max_m, max_n)?;
    println!(
        "{}",
        json!({
            "instances": s.instances,
            "mismatches": s.mismatches,
            "infeasible_pairs": s.infeasible_pairs,
            "max_abs_diff": s.max_abs_diff,
        })
    );
    if s.mismatches > 0 || s.infeasible_pairs > 0 {
        return Err(CliError::CheckFailed(format!(
            "{} of {} instances disagree with brute force; {} infeasible pairs returned",
            s.mismatches, s.instances, s.infeasible_pairs
        )));
    }
    Ok(())
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn cmd_sweep(input: &Path, param: SweepParam, values: &[f64], output: Option<&Path>) -> CliResult<()> {
    let inst = read_instance(input, None)?.instance;
    let mut csv = String::new();
    match param {
        SweepParam::Rho => {
            csv.push_str("rho,matched,total_cost,unmatched_mass,f1\n");
            for r in rho_sweep(&inst, values)? {
                let _ = writeln!(
                    csv,
                    "{},{},{},{},{}",
                    r.rho,
                    r.matched,
                    r.total_cost,
                    r.unmatched_mass,
                    opt(r.f1)
                );
            }
        }
        SweepParam::Lambda => {
            csv.push_str("lambda,l_cost,l_bias,l_total\n");
            for r in lambda_sweep(&inst, values)? {
                let _ = writeln!(csv, "{},{},{},{}", r.lambda, r.l_cost, r.l_bias, r.l_total);
            }
        }
    }
    emit(output, &csv)
}

/// One row of `popa bench`.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    pub mean_ms: f64,
    pub p95_ms: f64,
    /// `mean_ms / previous mean_ms` when this size doubles the previous one.
    pub ratio: Option<f64>,
}

/// Times [`solve`] on `repeats` random `n x n` instances per size
/// (uniform costs and biases, `rho = 0.4`).
pub fn run_bench(sizes: &[usize], seed: u64, repeats: usize) -> crate::Result<Vec<BenchRow>> {
    if sizes.is_empty() || sizes.contains(&0) {
        return Err(Error::InvalidParameter("bench sizes must be a non-empty list of positive integers".into()));
    }
    if repeats == 0 {
        return Err(Error::InvalidParameter("repeats must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows: Vec<BenchRow> = Vec::with_capacity(sizes.len());
    for &n in sizes {
        let mut times = Vec::with_capacity(repeats);
        for _ in 0..repeats {
            let inst = random_instance(&mut rng, n, n, 0.4)?;
            let start = Instant::now();
            let report = solve(&inst)?;
            times.push(start.elapsed().as_secs_f64() * 1e3);
            std::hint::black_box(report);
        }
        times.sort_by(f64::total_cmp);
        let mean_ms = times.iter().sum::<f64>() / times.len() as f64;
        let p95_idx = ((0.95 * times.len() as f64).ceil() as usize).clamp(1, times.len()) - 1;
        let ratio = rows
            .last()
            .filter(|prev| prev.n * 2 == n)
            .map(|prev| mean_ms / prev.mean_ms);
        rows.push(BenchRow {
            n,
            mean_ms,
            p95_ms: times[p95_idx],
            ratio,
        });
    }
    Ok(rows)
}

pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut csv = String::from("n,mean_ms,p95_ms,ratio\n");
    for r in rows {
        let _ = writeln!(csv, "{},{:.3},{:.3},{}", r.n, r.mean_ms, r.p95_ms, opt(r.ratio));
    }
    csv
}

fn check_bench(rows: &[BenchRow]) -> CliResult<()> {
    for r in rows {
        if let Some(ratio) = r.ratio {
            eprintln!("scaling n={}: time ratio {ratio:.2} (limit {MAX_DOUBLING_RATIO})", r.n);
            if ratio > MAX_DOUBLING_RATIO {
                return Err(CliError::CheckFailed(format!(
                    "time({}) / time({}) = {ratio:.2} exceeds {MAX_DOUBLING_RATIO}",
                    r.n,
                    r.n / 2
                )));
            }
        }
    }
    Ok(())
}

fn cmd_loss(input: &Path, lambda: f64, h: f64, output: Option<&Path>) -> CliResult<()> {
    let inst = read_instance(input, None)?.instance;
    let truth = inst
        .ground_truth
        .clone()
        .ok_or_else(|| CliError::Validation("loss needs a ground_truth".into()))?;
    let inputs = LossInputs {
        cost: inst.cost.clone(),
        alpha: inst.alpha.clone(),
        beta: inst.beta.clone(),
        rho: inst.rho,
        truth,
        lambda,
    };
    let r = loss_gradients(&inputs)?;
    let (fd_error, fd_skipped) = match finite_difference_check(&inputs, h) {
        Ok(e) => (Some(e), None),
        Err(e @ (Error::NearKink(_) | Error::InvalidParameter(_))) => (None, Some(e.to_string())),
        Err(e) => return Err(e.into()),
    };
    let grad_cost: Vec<Vec<f64>> = r.grad_cost.rows().into_iter().map(|row| row.to_vec()).collect();
    let mut value = json!({
        "lambda": lambda,
        "l_cost": r.l_cost,
        "l_bias": r.l_bias,
        "l_total": r.l_total,
        "active_pairs": r.active_pairs,
        "grad_cost": grad_cost,
        "grad_alpha": r.grad_alpha,
        "grad_beta": r.grad_beta,
    });
    if let Some(e) = fd_error {
        value["fd_max_rel_error"] = json!(e);
    }
    if let Some(reason) = fd_skipped {
        value["fd_skipped"] = json!(reason);
    }
    emit(output, &to_canonical_string(&value))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bench_rejects_empty_sizes() {
        assert!(run_bench(&[], 0, 1).is_err());
        assert!(run_bench(&[0], 0, 1).is_err());
    }

    #[test]
    fn bench_rows_and_ratio() {
        let rows = run_bench(&[8, 16, 20], 1, 2).unwrap();
        assert_eq!(rows.len(), 3);
        assert!(rows[0].ratio.is_none());
        assert!(rows[1].ratio.is_some());
        assert!(rows[2].ratio.is_none());
        let csv = bench_csv(&rows);
        assert_eq!(csv.lines().count(), 4);
        assert!(csv.starts_with("n,mean_ms,p95_ms,ratio\n"));
    }

    #[test]
    fn oracle_small_run() {
        let s = oracle_run(50, 9, 3, 4).unwrap();
        assert_eq!(s.mismatches, 0);
        assert_eq!(s.infeasible_pairs, 0);
        assert!(oracle_run(5, 0, 0, 3).is_err());
    }
}
