//! Square linear assignment with the shortest augmenting path solver.
//!
//! cargo run --example lap_solver

use ndarray::array;
use popa::oracle::brute_force_lap;
use popa::solve_lap;

fn main() -> popa::Result<()> {
    let cost = array![[4.0, 1.0, 3.0], [2.0, 0.0, 5.0], [3.0, 2.0, 2.0]];
    let (perm, value) = solve_lap(&cost)?;
    println!("assignment {:?}, cost {value}", perm.as_slice());

    let (_, best) = brute_force_lap(&cost)?;
    println!("brute force cost {best}");
    assert!((value - best).abs() < 1e-12);
    Ok(())
}
