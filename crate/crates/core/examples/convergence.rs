//! Gradient gap between the integral and limit membrane terms on Iris, per
//! hidden layer, for a range of `v_hat` and grid sizes.

use ttfs_snn::config::{DatasetId, RunConfig};
use ttfs_snn::data::Split;
use ttfs_snn::experiments::gradient_error;
use ttfs_snn::neuron::NeuronVariant;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = RunConfig::default();
    cfg.data.dataset = DatasetId::Iris;
    cfg.network.architecture = "5-10-10-3".into();
    cfg.network.variant = NeuronVariant::AlphaSynapse;
    cfg.network.tau = 5.0;
    cfg.cost.t_ref = 10.0;
    cfg.validate()?;

    let data = cfg.load_encoded(Split::Train)?;
    let net = cfg.init_network(cfg.network.spec(data.shape)?);
    let v_hats = [0.5, 0.9, 0.99, 0.999, 0.9999];
    let rows = gradient_error(&net, &data.samples, &v_hats, &[10_000, 1_000_000, 10_000_000], &cfg.cost)?;
    println!("{:>10} {:>8} {:>6} {:>10}", "n_steps", "v_hat", "layer", "error");
    for r in rows {
        println!("{:>10} {:>8} {:>6} {:>10.3e}", r.n_steps, r.v_hat, r.layer, r.error);
    }
    Ok(())
}
