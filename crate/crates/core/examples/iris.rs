//! Trains a 5-10-10-3 network on the embedded Iris data.

use ttfs_snn::config::{DatasetId, RunConfig};
use ttfs_snn::experiments::{run_training, RunData};
use ttfs_snn::neuron::NeuronVariant;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = RunConfig::default();
    cfg.data.dataset = DatasetId::Iris;
    cfg.network.architecture = "5-10-10-3".into();
    cfg.network.variant = NeuronVariant::CurrentSynapse;
    cfg.network.tau = 5.0;
    cfg.cost.t_ref = 10.0;
    cfg.train.batch_size = 16;
    cfg.train.eta = 1e-3;
    cfg.train.epochs = 60;
    cfg.validate()?;

    let data = RunData::load(&cfg)?;
    run_training(&cfg, &data, |row, _| {
        if row.epoch % 10 == 0 {
            println!(
                "epoch {:>3}: cost {:.4} accuracy {:.3} sparsity {:?}",
                row.epoch, row.train_cost, row.test_accuracy, row.layer_sparsity
            );
        }
        Ok(())
    })?;
    Ok(())
}
