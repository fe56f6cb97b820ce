//! Solve a small partial matching instance and print the report.
//!
//! cargo run --example solve_partial_matching

use ndarray::array;
use popa::{solve, Instance};

fn main() -> popa::Result<()> {
    let cost = array![[0.1, 0.9, 0.9], [0.9, 0.95, 0.9], [0.9, 0.9, 0.2]];
    let inst = Instance::with_unit_biases(cost, 0.4)?;
    let report = solve(&inst)?;

    println!("matched pairs (source -> target):");
    for (i, j) in report.assignment.pairs() {
        println!("  {i} -> {j}  cost {:.3}", inst.cost[[i, j]]);
    }
    println!("transported cost  {:.6}", report.transported_cost);
    println!("unmatch penalty   {:.6}", report.unmatch_penalty);
    println!("total cost        {:.6}", report.total_cost);
    println!("feasible pairs    {}", report.feasible_pairs);
    Ok(())
}
