//! Analytic spike-time partials against central finite differences.

use ttfs_snn::backprop::firing_time_partials;
use ttfs_snn::neuron::{solve_firing_time, NeuronModel, SpikeVector};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let h = 1e-6;
    let times = [0.1, 0.3, 0.5];
    let w = [1.5, 0.8, 0.9];
    let x = SpikeVector::from_times(&times)?;
    let fire = |m: &NeuronModel, w: &[f64], t: &[f64]| -> Result<f64, Box<dyn std::error::Error>> {
        let s = solve_firing_time(m, w, &SpikeVector::from_times(t)?, 16.0)?;
        s.time.ok_or_else(|| "neuron went silent".into())
    };
    for m in [
        NeuronModel::non_leaky(1.0),
        NeuronModel::current_synapse(1.0, 1.0),
        NeuronModel::alpha_synapse(1.0, 1.0),
    ] {
        let s = solve_firing_time(&m, &w, &x, 16.0)?;
        let p = firing_time_partials(&m, &s, &x, &w)?;
        println!("{} fires at {:.6}", m.variant.name(), s.time.unwrap_or(f64::NAN));
        for (k, &j) in p.causal_set.iter().enumerate() {
            let (mut wp, mut wm) = (w, w);
            wp[j] += h;
            wm[j] -= h;
            let fd_w = (fire(&m, &wp, &times)? - fire(&m, &wm, &times)?) / (2.0 * h);
            let (mut tp, mut tm) = (times, times);
            tp[j] += h;
            tm[j] -= h;
            let fd_t = (fire(&m, &w, &tp)? - fire(&m, &w, &tm)?) / (2.0 * h);
            println!(
                "  input {j}: dt/dw {:+.6} (fd {fd_w:+.6})  dt/dt_j {:+.6} (fd {fd_t:+.6})",
                p.d_time_d_weight[k], p.d_time_d_input[k]
            );
        }
    }
    Ok(())
}
