//! Sweep the unmatch penalty scale and watch the number of matches grow.
//!
//! cargo run --example rho_sweep

use popa::synth::{planted_instance, rho_sweep, PlantSpec};

fn main() -> popa::Result<()> {
    let spec = PlantSpec { m: 10, n: 12, k: 6, base_low: 0.3, seed: 7, ..PlantSpec::default() };
    let inst = planted_instance(&spec)?;
    let grid: Vec<f64> = (1..=10).map(|k| 0.05 * k as f64).collect();

    println!("rho,matched,total_cost,unmatched_mass,f1");
    for r in rho_sweep(&inst, &grid)? {
        println!(
            "{:.2},{},{:.4},{:.4},{:.3}",
            r.rho,
            r.matched,
            r.total_cost,
            r.unmatched_mass,
            r.f1.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
