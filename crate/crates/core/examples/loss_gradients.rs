//! Partial matching loss, its analytic gradients, and a finite-difference check.
//!
//! cargo run --example loss_gradients

use ndarray::array;
use popa::loss::{finite_difference_check, loss_gradients, LossInputs};
use popa::PartialAssignment;

fn main() -> popa::Result<()> {
    let inputs = LossInputs {
        cost: array![[0.2, 0.7, 0.9], [0.6, 0.3, 0.85]],
        alpha: vec![0.9, 0.6],
        beta: vec![0.8, 0.7, 0.3],
        rho: 0.4,
        truth: PartialAssignment::from_pairs(2, 3, [(0, 0), (1, 1)])?,
        lambda: 0.5,
    };
    let r = loss_gradients(&inputs)?;
    println!("L_cost {:.6}  L_bias {:.6}  total {:.6}", r.l_cost, r.l_bias, r.l_total);
    println!("active pairs {}", r.active_pairs);
    println!("dL/dC\n{:.4}", r.grad_cost);
    println!("dL/dalpha {:.4?}", r.grad_alpha);
    println!("dL/dbeta  {:.4?}", r.grad_beta);

    let err = finite_difference_check(&inputs, 1e-6)?;
    println!("max relative finite-difference error {err:.2e}");
    Ok(())
}
