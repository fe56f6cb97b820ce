//! From raw affinities to a solved instance: Sinkhorn normalization,
//! cost = 1 - S, and biases from each node's strongest affinity.
//!
//! cargo run --example affinity_pipeline

use ndarray::array;
use popa::affinity::{instance_from_affinity, AffinityMatrix, SinkhornConfig};
use popa::solve;

fn main() -> popa::Result<()> {
    let a = AffinityMatrix::new(array![
        [0.9, 0.1, 0.0, 0.2],
        [0.1, 0.8, 0.1, 0.0],
        [0.0, 0.0, 0.05, 0.1],
    ])?;
    let derived = instance_from_affinity(&a, 4.0, 0.4, &SinkhornConfig::default())?;
    let sk = &derived.sinkhorn;
    println!(
        "sinkhorn: {} iterations, residual {:.2e}, converged {}",
        sk.iterations, sk.residual, sk.converged
    );
    let inst = &derived.instance;
    println!("alpha {:.3?}", inst.alpha);
    println!("beta  {:.3?}", inst.beta);

    let report = solve(inst)?;
    println!("pairs {:?}", report.assignment.pairs().collect::<Vec<_>>());
    println!("total cost {:.6}", report.total_cost);
    Ok(())
}
