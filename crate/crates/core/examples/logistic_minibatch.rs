//! Multiclass logistic regression from a CSV file with mini-batch robust
//! gradient descent.
//!
//! A small three-class dataset is written to a temporary file, loaded with
//! min-max scaling and split into balanced train and test sets.

use std::io::Write;

use rand::Rng;
use robust_gd::bench::{balanced_subsample, load_csv_dataset, DatasetSchema};
use robust_gd::rgd::{self, Budget, RgdConfig, StepSchedule};
use robust_gd::{seeding, Result};

fn write_blobs(path: &std::path::Path) -> std::io::Result<()> {
    let mut rng = seeding::rng(3);
    let centers = [[0.0, 0.0, 1.0], [4.0, 1.0, 0.0], [1.0, 5.0, 3.0]];
    let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(f, "x1,x2,x3,class")?;
    for i in 0..300 {
        let c = i % 3;
        let row: Vec<String> = centers[c].iter().map(|m| format!("{:.4}", m + rng.random_range(-1.5..1.5))).collect();
        writeln!(f, "{},{c}", row.join(","))?;
    }
    Ok(())
}

pub fn run_example() -> Result<()> {
    let dir = tempfile::tempdir()?;
    let path = dir.path().join("blobs.csv");
    write_blobs(&path)?;

    let data = load_csv_dataset(&path, &DatasetSchema::new("class"))?;
    let split = balanced_subsample(&data, 40, 30, 9)?;
    let train = data.logistic_task(&split.train, 0.001)?;
    let test = data.logistic_task(&split.test, 0.001)?;
    println!("{} features, classes {:?}, {} train / {} test", data.num_features(), data.classes(), split.train.len(), split.test.len());

    let w0 = rgd::init_uniform_box(robust_gd::models::LossModel::dim(&train), 0.05, 1);
    for batch in [None, Some(16)] {
        let mut config = RgdConfig::new(0.01, StepSchedule::constant(5.0)?, Budget::evaluations(200 * split.train.len()));
        config.minibatch = batch;
        config.seed = 5;
        let traj = rgd::rgd_run(&train, &config, &w0)?;
        println!(
            "minibatch {:>4}: {:>4} steps, test error {:.3}",
            batch.map_or("all".into(), |b| b.to_string()),
            traj.num_steps(),
            test.error_rate(traj.final_iterate())
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> Result<()> {
    run_example()
}
