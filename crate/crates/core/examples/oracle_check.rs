//! Compare the exact solver with brute-force enumeration on random instances.
//!
//! cargo run --release --example oracle_check -- [count] [seed]

use popa::cli::oracle_run;

fn main() -> popa::Result<()> {
    let mut args = std::env::args().skip(1);
    let count = args.next().and_then(|s| s.parse().ok()).unwrap_or(500);
    let seed = args.next().and_then(|s| s.parse().ok()).unwrap_or(0);

    let s = oracle_run(count, seed, 4, 5)?;
    println!(
        "{} instances, {} mismatches, {} infeasible pairs, max |diff| {:.2e}",
        s.instances, s.mismatches, s.infeasible_pairs, s.max_abs_diff
    );
    if s.mismatches > 0 || s.infeasible_pairs > 0 {
        std::process::exit(1);
    }
    Ok(())
}
