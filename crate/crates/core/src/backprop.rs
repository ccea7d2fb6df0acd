//! Exact firing-time gradients and the backward sweep through the layers.
//! Causal sets and pooling routes are frozen while differentiating.

use crate::error::{Error, Result};
use crate::network::{
    for_each_conv_neuron, for_each_dense_neuron, for_each_neuron, ConvSpec, ConvTrace, DenseSpec,
    DenseTrace, ForwardTrace, LayerSpec, LayerTrace, Network, NeuronRef, PoolTrace,
};
use crate::neuron::{Firing, FiringSolution, NeuronModel, NeuronVariant, SpikeVector};

/// `d t_i / d w_ij` and `d t_i / d t_j` for every `j` in the causal set.
#[derive(Clone, Debug, PartialEq)]
pub struct TimingPartials {
    pub causal_set: Vec<usize>,
    pub d_time_d_weight: Vec<f64>,
    pub d_time_d_input: Vec<f64>,
}

/// Per-neuron constants shared by all causal inputs of one fired neuron.
#[derive(Clone, Copy, Debug)]
pub(crate) enum PartialsCtx {
    NonLeaky { time: f64, inv_sum: f64 },
    Current { tau: f64, inv_a: f64, drift: f64 },
    Alpha { tau: f64, u: f64, inv_root: f64 },
}

impl PartialsCtx {
    /// `None` when the neuron did not fire.
    pub(crate) fn new(model: &NeuronModel, firing: &Firing) -> Option<Self> {
        let time = firing.time?;
        let v_th = model.v_threshold;
        Some(match model.variant {
            NeuronVariant::NonLeaky => PartialsCtx::NonLeaky {
                time,
                inv_sum: 1.0 / firing.sum_w,
            },
            NeuronVariant::CurrentSynapse => PartialsCtx::Current {
                tau: model.tau,
                inv_a: 1.0 / firing.a,
                drift: model.tau / (firing.sum_w - v_th / model.tau),
            },
            NeuronVariant::AlphaSynapse => {
                let root = (firing.b * firing.b - 2.0 * firing.a * v_th / model.tau)
                    .max(0.0)
                    .sqrt();
                PartialsCtx::Alpha {
                    tau: model.tau,
                    u: (firing.b + root) / (2.0 * firing.a),
                    inv_root: 1.0 / root,
                }
            }
        })
    }

    /// `(d t / d w_j, d t / d t_j)` for a causal input of weight `w` at `t_j`.
    #[inline]
    pub(crate) fn at(&self, w: f64, t_j: f64) -> (f64, f64) {
        match *self {
            PartialsCtx::NonLeaky { time, inv_sum } => ((t_j - time) * inv_sum, w * inv_sum),
            PartialsCtx::Current { tau, inv_a, drift } => {
                let e = (t_j / tau).exp();
                (tau * e * inv_a - drift, w * e * inv_a)
            }
            PartialsCtx::Alpha { tau, u, inv_root } => {
                let e2 = (t_j / (2.0 * tau)).exp();
                let e1 = e2 * e2;
                (
                    2.0 * tau * (u * e1 - e2) * inv_root,
                    w * (2.0 * u * e1 - e2) * inv_root,
                )
            }
        }
    }
}

pub fn firing_time_partials(
    model: &NeuronModel,
    solution: &FiringSolution,
    inputs: &SpikeVector,
    weights: &[f64],
) -> Result<TimingPartials> {
    if weights.len() != inputs.len() {
        return Err(Error::contract("weights and inputs differ in length"));
    }
    let firing = Firing {
        time: solution.time,
        causal_len: solution.causal_set.len(),
        sum_w: solution.sum_w,
        sum_wt: solution.sum_wt,
        a: solution.a,
        b: solution.b,
        alpha: solution.alpha,
    };
    let ctx = PartialsCtx::new(model, &firing)
        .ok_or_else(|| Error::contract("partials requested for a neuron that did not fire"))?;
    let mut d_w = Vec::with_capacity(solution.causal_set.len());
    let mut d_t = Vec::with_capacity(solution.causal_set.len());
    for &j in &solution.causal_set {
        let t_j = inputs
            .get(j)
            .ok_or_else(|| Error::contract(format!("causal input {j} has no spike")))?;
        let (dw, dt) = ctx.at(weights[j], t_j);
        d_w.push(dw);
        d_t.push(dt);
    }
    Ok(TimingPartials {
        causal_set: solution.causal_set.clone(),
        d_time_d_weight: d_w,
        d_time_d_input: d_t,
    })
}

/// One weight block per layer, shaped like `Network::weights`.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientSet {
    pub layers: Vec<Vec<f64>>,
}

impl GradientSet {
    pub fn zeros_like(net: &Network) -> Self {
        GradientSet {
            layers: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
        }
    }

    pub fn fill_zero(&mut self) {
        self.layers.iter_mut().for_each(|l| l.fill(0.0));
    }

    pub fn add_assign(&mut self, other: &GradientSet) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.iter_mut().zip(b).for_each(|(x, y)| *x += y);
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.layers.iter_mut().flatten().for_each(|x| *x *= k);
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers.iter().flatten().copied()
    }

    pub fn is_finite(&self) -> bool {
        self.iter().all(f64::is_finite)
    }
}

/// Chain rule for one neuron: `upstream[i]` is `dC/dt_i`; unfired neurons
/// and zero upstream entries are skipped.
fn chain_neuron<'a>(
    model: &'a NeuronModel,
    upstream: &'a [f64],
    grad_w: &'a mut [f64],
    mut grad_in: Option<&'a mut [f64]>,
) -> impl FnMut(NeuronRef<'_>) + 'a {
    move |n| {
        let g = upstream[n.index];
        if g == 0.0 {
            return;
        }
        let Some(ctx) = PartialsCtx::new(model, n.firing) else {
            return;
        };
        for (slot, input, w, t_j) in n.causal() {
            let (dw, dt) = ctx.at(w, t_j);
            grad_w[n.row_offset + slot] += g * dw;
            if let Some(gi) = grad_in.as_deref_mut() {
                gi[input] += g * dt;
            }
        }
    }
}

fn check_lengths(what: &str, pairs: &[(usize, usize)]) -> Result<()> {
    for &(got, want) in pairs {
        if got != want {
            return Err(Error::contract(format!("{what}: length {got}, expected {want}")));
        }
    }
    Ok(())
}

/// Adds into `grad_w` (fan_out x fan_in) and `grad_in` (fan_in).
pub fn backward_dense(
    spec: &DenseSpec,
    weights: &[f64],
    model: &NeuronModel,
    trace: &DenseTrace,
    upstream: &[f64],
    grad_w: &mut [f64],
    grad_in: &mut [f64],
) -> Result<()> {
    check_lengths(
        "backward_dense",
        &[
            (weights.len(), spec.param_count()),
            (grad_w.len(), spec.param_count()),
            (upstream.len(), spec.outputs),
            (grad_in.len(), spec.inputs),
            (trace.firings.len(), spec.outputs),
        ],
    )?;
    for_each_dense_neuron(spec, weights, trace, chain_neuron(model, upstream, grad_w, Some(grad_in)));
    Ok(())
}

/// Shared-kernel accumulation over every output position.
pub fn backward_conv(
    spec: &ConvSpec,
    weights: &[f64],
    model: &NeuronModel,
    trace: &ConvTrace,
    upstream: &[f64],
    grad_w: &mut [f64],
    grad_in: &mut [f64],
) -> Result<()> {
    check_lengths(
        "backward_conv",
        &[
            (weights.len(), spec.param_count()),
            (grad_w.len(), spec.param_count()),
            (upstream.len(), spec.output().len()),
            (grad_in.len(), spec.input.len()),
            (trace.firings.len(), spec.output().len()),
        ],
    )?;
    for_each_conv_neuron(spec, weights, trace, chain_neuron(model, upstream, grad_w, Some(grad_in)));
    Ok(())
}

/// Routes each upstream entry to the input that won its pooling window.
pub fn backward_pool(trace: &PoolTrace, upstream: &[f64], grad_in: &mut [f64]) -> Result<()> {
    check_lengths("backward_pool", &[(upstream.len(), trace.routing.len())])?;
    for (route, &g) in trace.routing.iter().zip(upstream) {
        if let Some(idx) = route {
            let slot = grad_in
                .get_mut(*idx)
                .ok_or_else(|| Error::contract("pool route outside input"))?;
            *slot += g;
        }
    }
    Ok(())
}

/// Full backward sweep. `output_grad` is `dC/dt` for the output layer;
/// `input_seeds[l]`, when non-empty, holds extra `dC/dt` terms for the spikes
/// entering layer `l` (regularizer contributions). Adds into `grads`.
pub fn network_backward(
    net: &Network,
    trace: &ForwardTrace,
    output_grad: &[f64],
    input_seeds: &[Vec<f64>],
    grads: &mut GradientSet,
) -> Result<()> {
    let layers = &net.spec.layers;
    check_lengths(
        "network_backward",
        &[
            (trace.layers.len(), layers.len()),
            (grads.layers.len(), layers.len()),
            (output_grad.len(), net.spec.output_len()),
        ],
    )?;
    let mut upstream = output_grad.to_vec();
    for l in (0..layers.len()).rev() {
        let need_input = l > 0;
        let mut d_in = if need_input {
            vec![0.0; layers[l].input_len()]
        } else {
            Vec::new()
        };
        if upstream.iter().any(|&g| g != 0.0) {
            match (&layers[l], &trace.layers[l]) {
                (LayerSpec::Pool(_), LayerTrace::Pool(p)) => {
                    if need_input {
                        backward_pool(p, &upstream, &mut d_in)?;
                    }
                }
                (spec, layer_trace) => for_each_neuron(
                    spec,
                    &net.weights[l],
                    layer_trace,
                    chain_neuron(
                        &net.spec.model,
                        &upstream,
                        &mut grads.layers[l],
                        need_input.then_some(d_in.as_mut_slice()),
                    ),
                ),
            }
        }
        if !need_input {
            break;
        }
        if let Some(seed) = input_seeds.get(l).filter(|s| !s.is_empty()) {
            check_lengths("input seed", &[(seed.len(), d_in.len())])?;
            d_in.iter_mut().zip(seed).for_each(|(d, s)| *d += s);
        }
        upstream = d_in;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuron::solve_firing_time;
    use approx::assert_relative_eq;

    #[test]
    fn non_leaky_single_spike_partials() {
        let m = NeuronModel::non_leaky(1.0);
        let x = SpikeVector::from_times(&[0.0]).unwrap();
        let s = solve_firing_time(&m, &[2.0], &x, 16.0).unwrap();
        let p = firing_time_partials(&m, &s, &x, &[2.0]).unwrap();
        assert_relative_eq!(p.d_time_d_weight[0], -0.25);
        assert_relative_eq!(p.d_time_d_input[0], 1.0);
    }

    #[test]
    fn finite_difference_examples() {
        let h = 1e-6;
        let x = SpikeVector::from_times(&[0.1, 0.3, 0.5]).unwrap();
        let w = [1.5, 0.8, 0.9];
        for model in [
            NeuronModel::non_leaky(1.0),
            NeuronModel::current_synapse(1.0, 1.0),
            NeuronModel::alpha_synapse(1.0, 1.0),
        ] {
            let s = solve_firing_time(&model, &w, &x, 16.0).unwrap();
            let p = firing_time_partials(&model, &s, &x, &w).unwrap();
            for (k, &j) in p.causal_set.iter().enumerate() {
                let mut wp = w;
                wp[j] += h;
                let mut wm = w;
                wm[j] -= h;
                let tp = solve_firing_time(&model, &wp, &x, 16.0).unwrap().time.unwrap();
                let tm = solve_firing_time(&model, &wm, &x, 16.0).unwrap().time.unwrap();
                assert_relative_eq!(p.d_time_d_weight[k], (tp - tm) / (2.0 * h), max_relative = 1e-5);
                let mut xp = x.clone().into_inner();
                let mut xm = xp.clone();
                xp[j] = xp[j].map(|t| t + h);
                xm[j] = xm[j].map(|t| t - h);
                let tp = solve_firing_time(&model, &w, &SpikeVector::new(xp).unwrap(), 16.0)
                    .unwrap()
                    .time
                    .unwrap();
                let tm = solve_firing_time(&model, &w, &SpikeVector::new(xm).unwrap(), 16.0)
                    .unwrap()
                    .time
                    .unwrap();
                assert_relative_eq!(p.d_time_d_input[k], (tp - tm) / (2.0 * h), max_relative = 1e-5);
            }
        }
    }

    #[test]
    fn unfired_partials_are_an_error() {
        let m = NeuronModel::current_synapse(1.0, 1.0);
        let x = SpikeVector::from_times(&[0.0]).unwrap();
        let s = solve_firing_time(&m, &[0.5], &x, 16.0).unwrap();
        assert!(firing_time_partials(&m, &s, &x, &[0.5]).is_err());
    }

    #[test]
    fn pool_backward_routes() {
        let trace = PoolTrace {
            routing: vec![Some(2)],
            output: SpikeVector::from_times(&[2.0]).unwrap(),
        };
        let mut g = vec![0.0; 4];
        backward_pool(&trace, &[1.0], &mut g).unwrap();
        assert_eq!(g, vec![0.0, 0.0, 1.0, 0.0]);
        let trace = PoolTrace {
            routing: vec![None],
            output: SpikeVector::silent(1),
        };
        let mut g = vec![0.0; 4];
        backward_pool(&trace, &[1.0], &mut g).unwrap();
        assert_eq!(g, vec![0.0; 4]);
    }

    #[test]
    fn non_causal_input_gets_no_gradient() {
        let spec = DenseSpec { inputs: 2, outputs: 1 };
        let m = NeuronModel::non_leaky(1.0);
        let x = SpikeVector::from_times(&[0.0, 3.0]).unwrap();
        let w = [2.0, 1.0];
        let t = crate::network::forward_dense(&spec, &w, &m, &x, 16.0).unwrap();
        let mut gw = vec![0.0; 2];
        let mut gi = vec![0.0; 2];
        backward_dense(&spec, &w, &m, &t, &[1.0], &mut gw, &mut gi).unwrap();
        assert_eq!((gw[1], gi[1]), (0.0, 0.0));
        assert!(gw[0] != 0.0);
        let mut gw = vec![0.0; 2];
        let mut gi = vec![0.0; 2];
        backward_dense(&spec, &w, &m, &t, &[0.0], &mut gw, &mut gi).unwrap();
        assert_eq!((gw, gi), (vec![0.0; 2], vec![0.0; 2]));
    }
}
