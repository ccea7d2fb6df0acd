//! Sparsity/accuracy tradeoff on Iris over the membrane-term strength.
//! Writes per-job metrics and `sweep.csv` under a temporary directory.

use ttfs_snn::config::{DatasetId, RunConfig, SweepConfig, SweepParameter};
use ttfs_snn::experiments::cmd_sweep;
use ttfs_snn::neuron::NeuronVariant;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = RunConfig::default();
    cfg.out_dir = Some(std::env::temp_dir().join("ttfs-sweep-example"));
    cfg.data.dataset = DatasetId::Iris;
    cfg.network.architecture = "5-20-3".into();
    cfg.network.variant = NeuronVariant::CurrentSynapse;
    cfg.network.tau = 5.0;
    cfg.cost.t_ref = 10.0;
    cfg.train.batch_size = 16;
    cfg.train.eta = 1e-3;
    cfg.train.epochs = 30;
    cfg.sweep = Some(SweepConfig {
        parameter: SweepParameter::Gamma2,
        values: vec![0.0, 1e-3, 1e-2],
        seeds: vec![0, 1],
    });
    cfg.validate()?;

    for p in cmd_sweep(&cfg, 1)? {
        println!(
            "gamma2 {:<6} seed {}: accuracy {:.3}, hidden sparsity {:.3}",
            p.value, p.seed, p.accuracy, p.mean_sparsity
        );
    }
    println!("CSV files in {}", cfg.out_dir.unwrap().display());
    Ok(())
}
