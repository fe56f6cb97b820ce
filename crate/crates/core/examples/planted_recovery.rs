//! Plant a matching in background noise and check that the solver recovers it.
//!
//! cargo run --example planted_recovery

use popa::metrics::evaluate;
use popa::solve;
use popa::synth::{planted_instance, PlantSpec};

fn main() -> popa::Result<()> {
    let mut f1_sum = 0.0;
    let seeds = 20;
    for seed in 0..seeds {
        let spec = PlantSpec { m: 8, n: 10, k: 5, noise_sigma: 0.01, seed, ..PlantSpec::default() };
        let inst = planted_instance(&spec)?;
        let truth = inst.ground_truth.clone().expect("planted instances carry ground truth");
        let report = solve(&inst)?;
        let m = evaluate(&report.assignment, &truth, &inst)?;
        println!(
            "seed {seed:2}: matched {}  f1 {:.3}  partiality {:.3}  mismatching {:.3}",
            report.matched(),
            m.f1,
            m.partiality_error,
            m.mismatching_error
        );
        f1_sum += m.f1;
    }
    println!("mean f1 {:.3}", f1_sum / seeds as f64);
    Ok(())
}
