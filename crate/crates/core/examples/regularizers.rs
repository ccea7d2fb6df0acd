//! Values of the membrane-potential and firing-condition regularizers on a
//! small random network, and how the integral form approaches the limit
//! form as `v_hat` nears the threshold.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use ttfs_snn::network::{Network, NetworkSpec, Shape3};
use ttfs_snn::neuron::{NeuronModel, SpikeVector};
use ttfs_snn::objectives::{f_ssr, integral_membrane_loss, m_ssr, CostConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let spec = NetworkSpec::from_architecture("12-16-16-4", Shape3::flat(12), 0, NeuronModel::current_synapse(5.0, 1.0))?;
    let net = Network::init(spec, 10.0, &mut rng);
    let x = SpikeVector::from_times(&(0..12).map(|_| rng.gen_range(0.0..5.0)).collect::<Vec<_>>())?;
    let cfg = CostConfig { t_ref: 10.0, ..CostConfig::default() };
    let trace = net.forward(&x, cfg.horizon())?;

    let limit = m_ssr(&net, &trace, &cfg);
    println!("M-SSR per hidden layer: {:?}", limit.layer_values);
    println!("F-SSR per hidden layer: {:?}", f_ssr(&net, &trace, &cfg).layer_values);

    let flat = |g: &ttfs_snn::backprop::GradientSet| g.layers[0].clone();
    let reference = flat(&limit.weight_grads);
    for v_hat in [0.5, 0.9, 0.99, 0.999] {
        let c = CostConfig { v_hat, dt_integral: Some(1e-6), ..cfg };
        let g = flat(&integral_membrane_loss(&net, &trace, &c).weight_grads);
        let (mut err, mut n) = (0.0, 0);
        for (a, b) in g.iter().zip(&reference).filter(|(a, _)| a.abs() > 0.0) {
            err += (a - b).abs() / a.abs();
            n += 1;
        }
        println!("v_hat {v_hat}: mean relative gradient gap {:.3e} over {n} weights", err / n.max(1) as f64);
    }
    Ok(())
}
