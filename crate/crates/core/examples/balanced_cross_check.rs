//! Solve the same instance through the padded and the balanced embedding
//! and compare the optima.
//!
//! cargo run --example balanced_cross_check

use popa::synth::random_instance;
use popa::balanced_cross_check;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn main() -> popa::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..10 {
        let inst = random_instance(&mut rng, 4, 6, 0.5)?;
        let c = balanced_cross_check(&inst)?;
        println!("padded {:.9}  balanced {:.9}  ok {}", c.lhs, c.rhs, c.ok);
    }
    Ok(())
}
