//! Seeded multi-trial experiments written to `results.csv` and `meta.json`.
//!
//! Runs the same configuration twice into one directory; the second run
//! finds every cell already on disk and leaves the file untouched.

use robust_gd::bench::{read_results, run_experiment, ExperimentConfig, RunOptions};
use robust_gd::synth::risk_stats;
use robust_gd::Result;

const CONFIG: &str = r#"{
    "name": "lognormal-quadratic",
    "trials": 4,
    "task": {
        "kind": "controlled", "n": 200, "d": 2, "iterations": 40,
        "noise": {"kind": "lognormal", "log_location": 0.0, "log_scale": 1.75}
    },
    "methods": [
        {"method": "oracle"},
        {"method": "erm"},
        {"method": "rgdmult"},
        {"method": "mom", "k": 8}
    ]
}"#;

pub fn run_example() -> Result<()> {
    let config = ExperimentConfig::from_json(CONFIG)?;
    let dir = tempfile::tempdir()?;
    let opts = RunOptions {
        out_dir: dir.path().to_path_buf(),
        seed: 2024,
        threads: 2,
    };
    let first = run_experiment(&config, &opts)?;
    let csv = std::fs::read(dir.path().join("results.csv"))?;
    let again = run_experiment(&config, &opts)?;
    assert_eq!(csv, std::fs::read(dir.path().join("results.csv"))?);
    println!("first run computed {} cells, second resumed {}", first.cells_computed, again.cells_resumed);

    let records = read_results(&dir.path().join("results.csv"))?;
    for method in ["oracle", "erm", "rgdmult", "mom"] {
        let mine: Vec<_> = records.iter().filter(|r| r.method == method).cloned().collect();
        let stats = risk_stats(&mine)?;
        let risk = stats.excess_true_risk.expect("controlled runs report true risk");
        let last = risk.mean.len() - 1;
        println!("{method:<8} final excess risk mean {:.4e}  var {:.4e}", risk.mean[last], risk.variance[last]);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
