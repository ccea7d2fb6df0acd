//! Closed-form first-spike times for the three neuron models, checked
//! against forward-Euler integration of the membrane ODE.

use ttfs_snn::neuron::{ode_oracle_firing_time, solve_firing_time, NeuronModel, SpikeVector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let inputs = SpikeVector::from_times(&[0.1, 0.3, 0.5, 2.0])?;
    let weights = [1.5, 0.8, -0.4, 0.9];
    let models = [
        NeuronModel::non_leaky(1.0),
        NeuronModel::current_synapse(2.0, 1.0),
        NeuronModel::alpha_synapse(2.0, 1.0),
    ];
    for m in models {
        let s = solve_firing_time(&m, &weights, &inputs, 16.0)?;
        let ode = ode_oracle_firing_time(&m, &weights, &inputs, 1e-5, 16.0)?;
        match (s.time, ode) {
            (Some(t), Some(o)) => println!(
                "{:<16} t = {t:.6} (ODE {o:.6}), causal inputs {:?}",
                m.variant.name(),
                s.causal_set
            ),
            _ => println!("{:<16} silent (ODE {:?})", m.variant.name(), ode),
        }
    }
    Ok(())
}
