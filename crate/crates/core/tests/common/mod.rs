#![allow(dead_code)]

use rand::Rng;
use ttfs_snn::network::{Network, NetworkSpec, Shape3};
use ttfs_snn::neuron::{solve_firing_time, FiringSolution, NeuronModel, NeuronVariant, SpikeVector};

pub const HORIZON: f64 = 16.0;

pub fn model(variant: NeuronVariant, tau: f64) -> NeuronModel {
    NeuronModel::new(variant, if variant == NeuronVariant::NonLeaky { f64::INFINITY } else { tau }, 1.0)
        .unwrap()
}

/// Up to `max_spikes` inputs with times in `[0, 4)` and weights in `[-1, 2]`.
pub fn random_instance<R: Rng>(rng: &mut R, max_spikes: usize) -> (Vec<f64>, SpikeVector) {
    let n = rng.gen_range(1..=max_spikes);
    let w = (0..n).map(|_| rng.gen_range(-1.0..=2.0)).collect();
    let t: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..4.0)).collect();
    (w, SpikeVector::from_times(&t).unwrap())
}

pub fn shift_input(x: &SpikeVector, j: usize, h: f64) -> SpikeVector {
    let mut v = x.clone().into_inner();
    v[j] = v[j].map(|t| t + h);
    SpikeVector::new(v).unwrap()
}

fn sorted(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v
}

/// True when the perturbed solution is fired with the same causal set.
pub fn same_regime(a: &FiringSolution, b: &FiringSolution) -> bool {
    a.fired() && b.fired() && sorted(a.causal_set.clone()) == sorted(b.causal_set.clone())
}

/// Central differences of the firing time over every causal weight and input
/// time, or `None` if some perturbation changes the causal set.
pub fn fd_partials(
    m: &NeuronModel,
    w: &[f64],
    x: &SpikeVector,
    s: &FiringSolution,
    h: f64,
) -> Option<(Vec<f64>, Vec<f64>)> {
    let mut dw = Vec::new();
    let mut dt = Vec::new();
    for &j in &s.causal_set {
        let mut wp = w.to_vec();
        wp[j] += h;
        let mut wm = w.to_vec();
        wm[j] -= h;
        let sp = solve_firing_time(m, &wp, x, HORIZON).unwrap();
        let sm = solve_firing_time(m, &wm, x, HORIZON).unwrap();
        if !same_regime(s, &sp) || !same_regime(s, &sm) {
            return None;
        }
        dw.push((sp.time.unwrap() - sm.time.unwrap()) / (2.0 * h));
        if x.get(j).unwrap() < h {
            return None;
        }
        let sp = solve_firing_time(m, w, &shift_input(x, j, h), HORIZON).unwrap();
        let sm = solve_firing_time(m, w, &shift_input(x, j, -h), HORIZON).unwrap();
        if !same_regime(s, &sp) || !same_regime(s, &sm) {
            return None;
        }
        dt.push((sp.time.unwrap() - sm.time.unwrap()) / (2.0 * h));
    }
    Some((dw, dt))
}

/// `|a - b| / max(|a|, |b|)` over whole vectors; zero when both vanish.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    let scale = na.max(nb);
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

/// Dense network with positive-leaning random weights so most neurons fire.
pub fn random_dense_net<R: Rng>(rng: &mut R, m: NeuronModel, sizes: &[usize]) -> Network {
    let arch = sizes.iter().map(usize::to_string).collect::<Vec<_>>().join("-");
    let spec = NetworkSpec::from_architecture(&arch, Shape3::flat(sizes[0]), 0, m).unwrap();
    let weights = spec
        .layers
        .iter()
        .map(|l| {
            let fan_in = l.input_len() as f64;
            (0..l.param_count()).map(|_| rng.gen_range(-0.5..1.5) * 2.5 / fan_in).collect()
        })
        .collect();
    Network::from_weights(spec, weights).unwrap()
}

pub fn random_input<R: Rng>(rng: &mut R, n: usize) -> SpikeVector {
    SpikeVector::new((0..n).map(|_| rng.gen_bool(0.9).then(|| rng.gen_range(0.0..5.0))).collect()).unwrap()
}
