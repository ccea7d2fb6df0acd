//! Trains the 784-400-10 non-leaky network on MNIST.
//!
//! Expects the IDX files under `$TTFS_DATA_DIR/mnist` (default `data/mnist`).
//! Usage: `cargo run --release --example train_mnist -- [train_subset] [epochs] [gamma2]`

use std::time::Instant;

use ttfs_snn::config::RunConfig;
use ttfs_snn::experiments::{run_training, RunData};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mut cfg = RunConfig::default();
    cfg.data.train_subset = args.first().map(|s| s.parse()).transpose()?;
    cfg.train.epochs = args.get(1).map_or(Ok(1), |s| s.parse())?;
    cfg.cost.gamma2 = args.get(2).map_or(Ok(0.0), |s| s.parse())?;
    cfg.validate()?;

    let data = RunData::load(&cfg)?;
    println!("{} training / {} test samples", data.train.samples.len(), data.test.samples.len());
    let mut start = Instant::now();
    run_training(&cfg, &data, |row, _| {
        println!(
            "epoch {}: cost {:.4}, accuracy {:.4}, sparsity {:?} ({:.1}s)",
            row.epoch,
            row.train_cost,
            row.test_accuracy,
            row.layer_sparsity,
            start.elapsed().as_secs_f64()
        );
        start = Instant::now();
        Ok(())
    })?;
    Ok(())
}
