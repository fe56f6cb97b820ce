//! Write a planted instance to JSON, read it back, and print the solve report
//! in the same format as `popa solve`.
//!
//! cargo run --example instance_files

use popa::io::{InstanceFile, ReportFile};
use popa::metrics::evaluate;
use popa::solve;
use popa::synth::{planted_instance, PlantSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let inst = planted_instance(&PlantSpec { m: 3, n: 4, k: 2, seed: 1, ..PlantSpec::default() })?;
    let text = InstanceFile::from_instance(&inst).to_canonical_json();
    let dir = std::env::temp_dir().join("popa-example");
    std::fs::create_dir_all(&dir)?;
    let path = dir.join("planted.json");
    std::fs::write(&path, &text)?;
    println!("wrote {}", path.display());

    let loaded = InstanceFile::from_json(&std::fs::read_to_string(&path)?)?.load(None)?;
    let inst = loaded.instance;
    let report = solve(&inst)?;
    let metrics = match &inst.ground_truth {
        Some(t) => Some(evaluate(&report.assignment, t, &inst)?),
        None => None,
    };
    print!("{}", ReportFile::new(&inst, &report, metrics.as_ref(), None).to_canonical_json());
    Ok(())
}
