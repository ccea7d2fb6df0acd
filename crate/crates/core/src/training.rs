//! Adam, the mini-batch loop, evaluation and the sparsity metric.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::backprop::GradientSet;
use crate::data::EncodedSample;
use crate::error::{Error, Result};
use crate::network::{ForwardTrace, Network, NetworkSpec};
use crate::objectives::{predict, total_cost, CostConfig};

/// Samples per parallel work unit. Fixed so the reduction order, and hence
/// every logged number, does not depend on the thread count.
const CHUNK: usize = 8;

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub eta: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(net: &Network, eta: f64) -> Self {
        let zeros: Vec<Vec<f64>> = net.weights.iter().map(|w| vec![0.0; w.len()]).collect();
        AdamState {
            eta,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    pub fn first_moment(&self) -> &[Vec<f64>] {
        &self.m
    }

    pub fn second_moment(&self) -> &[Vec<f64>] {
        &self.v
    }
}

/// One bias-corrected Adam update of `params` in place.
pub fn adam_step(state: &mut AdamState, params: &mut [Vec<f64>], grads: &GradientSet) -> Result<()> {
    let shapes_match = params.len() == grads.layers.len()
        && params.len() == state.m.len()
        && params
            .iter()
            .zip(&grads.layers)
            .zip(&state.m)
            .all(|((p, g), m)| p.len() == g.len() && p.len() == m.len());
    if !shapes_match {
        return Err(Error::contract("parameter, gradient and moment shapes differ"));
    }
    state.step += 1;
    let (b1, b2) = (state.beta1, state.beta2);
    let c1 = 1.0 - b1.powi(state.step as i32);
    let c2 = 1.0 - b2.powi(state.step as i32);
    for (l, p) in params.iter_mut().enumerate() {
        let (m, v, g) = (&mut state.m[l], &mut state.v[l], &grads.layers[l]);
        for i in 0..p.len() {
            m[i] = b1 * m[i] + (1.0 - b1) * g[i];
            v[i] = b2 * v[i] + (1.0 - b2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= state.eta * m_hat / (v_hat.sqrt() + state.eps);
        }
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub eta: f64,
    pub shuffle: bool,
    #[serde(skip)]
    pub cost: CostConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 128,
            epochs: 20,
            seed: 0,
            eta: 1e-4,
            shuffle: true,
            cost: CostConfig::default(),
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, net: &Network) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.eta >= 0.0 && self.eta.is_finite()) {
            return Err(Error::Config(format!("eta must be finite and nonnegative, got {}", self.eta)));
        }
        self.cost.validate(&net.spec.model)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricsRow {
    pub epoch: usize,
    pub train_cost: f64,
    pub test_accuracy: f64,
    pub layer_sparsity: Vec<f64>,
    pub mean_sparsity: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    /// One entry per hidden spiking layer.
    pub layer_sparsity: Vec<f64>,
    pub mean_sparsity: f64,
}

/// Fraction of neurons firing strictly before `t_ref`, per hidden spiking
/// layer, over a batch of traces.
pub fn sparsity(spec: &NetworkSpec, traces: &[ForwardTrace], t_ref: f64) -> Vec<f64> {
    let layers = spec.hidden_spiking_layers();
    let mut counts = vec![0usize; layers.len()];
    for trace in traces {
        add_counts(&layers, trace, t_ref, &mut counts);
    }
    normalise_counts(spec, &layers, &counts, traces.len())
}

fn add_counts(layers: &[usize], trace: &ForwardTrace, t_ref: f64, counts: &mut [usize]) {
    for (k, &l) in layers.iter().enumerate() {
        counts[k] += trace.layers[l].output().iter().flatten().filter(|&t| t < t_ref).count();
    }
}

fn normalise_counts(spec: &NetworkSpec, layers: &[usize], counts: &[usize], samples: usize) -> Vec<f64> {
    layers
        .iter()
        .zip(counts)
        .map(|(&l, &c)| c as f64 / (spec.layers[l].output_len() * samples.max(1)) as f64)
        .collect()
}

/// Unweighted average over hidden layers.
pub fn mean_sparsity(layer_sparsity: &[f64]) -> f64 {
    if layer_sparsity.is_empty() {
        0.0
    } else {
        layer_sparsity.iter().sum::<f64>() / layer_sparsity.len() as f64
    }
}

/// Accuracy (earliest output spike) and hidden-layer sparsity.
pub fn evaluate(net: &Network, data: &[EncodedSample], cost: &CostConfig) -> Result<Evaluation> {
    if data.is_empty() {
        return Err(Error::Dataset("evaluation set is empty".into()));
    }
    let layers = net.spec.hidden_spiking_layers();
    let (correct, counts) = data
        .par_iter()
        .map(|s| -> Result<(usize, Vec<usize>)> {
            let trace = net.forward(&s.input, cost.horizon())?;
            let mut counts = vec![0; layers.len()];
            add_counts(&layers, &trace, cost.t_ref, &mut counts);
            Ok(((predict(&trace, cost.t_max()) == s.label) as usize, counts))
        })
        .try_reduce(
            || (0, vec![0; layers.len()]),
            |(a, mut ca), (b, cb)| {
                ca.iter_mut().zip(cb).for_each(|(x, y)| *x += y);
                Ok((a + b, ca))
            },
        )?;
    let layer_sparsity = normalise_counts(&net.spec, &layers, &counts, data.len());
    Ok(Evaluation {
        accuracy: correct as f64 / data.len() as f64,
        mean_sparsity: mean_sparsity(&layer_sparsity),
        layer_sparsity,
    })
}

/// Mean cost and gradient over a batch.
pub fn batch_gradient(
    net: &Network,
    batch: &[&EncodedSample],
    cost: &CostConfig,
) -> Result<(f64, GradientSet)> {
    let partials: Vec<(f64, GradientSet)> = batch
        .par_chunks(CHUNK)
        .map(|chunk| -> Result<(f64, GradientSet)> {
            let mut g = GradientSet::zeros_like(net);
            let mut c = 0.0;
            for s in chunk {
                let trace = net.forward(&s.input, cost.horizon())?;
                c += total_cost(net, &trace, s.label, cost, Some(&mut g))?.c;
            }
            Ok((c, g))
        })
        .collect::<Result<_>>()?;
    let mut total = GradientSet::zeros_like(net);
    let mut c = 0.0;
    for (pc, pg) in &partials {
        c += pc;
        total.add_assign(pg);
    }
    let n = batch.len().max(1) as f64;
    total.scale(1.0 / n);
    Ok((c / n, total))
}

/// Stateful training loop; one call to [`Trainer::run_epoch`] per epoch.
pub struct Trainer {
    pub net: Network,
    pub adam: AdamState,
    pub config: TrainConfig,
    pub epoch: usize,
    rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(net: Network, config: TrainConfig) -> Result<Self> {
        config.validate(&net)?;
        Ok(Trainer {
            adam: AdamState::new(&net, config.eta),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            net,
            config,
            epoch: 0,
        })
    }

    /// One pass over `data`; returns the mean training cost.
    pub fn run_epoch(&mut self, data: &[EncodedSample]) -> Result<f64> {
        if data.is_empty() {
            return Err(Error::Dataset("training set is empty".into()));
        }
        let mut order: Vec<usize> = (0..data.len()).collect();
        if self.config.shuffle {
            order.shuffle(&mut self.rng);
        }
        let mut cost_sum = 0.0;
        for idx in order.chunks(self.config.batch_size) {
            let batch: Vec<&EncodedSample> = idx.iter().map(|&i| &data[i]).collect();
            let (c, g) = batch_gradient(&self.net, &batch, &self.config.cost)?;
            cost_sum += c * batch.len() as f64;
            adam_step(&mut self.adam, &mut self.net.weights, &g)?;
        }
        self.epoch += 1;
        Ok(cost_sum / data.len() as f64)
    }

    pub fn evaluate(&self, data: &[EncodedSample]) -> Result<Evaluation> {
        evaluate(&self.net, data, &self.config.cost)
    }

    /// Runs one epoch and evaluates on `test`.
    pub fn step(&mut self, train: &[EncodedSample], test: &[EncodedSample]) -> Result<MetricsRow> {
        let train_cost = self.run_epoch(train)?;
        let eval = self.evaluate(test)?;
        Ok(MetricsRow {
            epoch: self.epoch,
            train_cost,
            test_accuracy: eval.accuracy,
            layer_sparsity: eval.layer_sparsity,
            mean_sparsity: eval.mean_sparsity,
        })
    }
}

/// Trains for `config.epochs` epochs, calling `on_epoch` after each.
pub fn train(
    net: Network,
    train_set: &[EncodedSample],
    test_set: &[EncodedSample],
    config: TrainConfig,
    mut on_epoch: impl FnMut(&MetricsRow),
) -> Result<(Network, Vec<MetricsRow>)> {
    let mut trainer = Trainer::new(net, config)?;
    let mut rows = Vec::with_capacity(config.epochs);
    for _ in 0..config.epochs {
        let row = trainer.step(train_set, test_set)?;
        on_epoch(&row);
        rows.push(row);
    }
    Ok((trainer.net, rows))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::Shape3;
    use crate::neuron::{NeuronModel, SpikeVector};
    use approx::assert_relative_eq;

    fn tiny_net() -> Network {
        let spec =
            NetworkSpec::from_architecture("2-3-2", Shape3::flat(2), 0, NeuronModel::non_leaky(1.0))
                .unwrap();
        Network::from_weights(spec, vec![vec![0.6, 0.5, 0.4, 0.9, 0.7, 0.3], vec![0.5; 6]]).unwrap()
    }

    #[test]
    fn adam_first_step() {
        let net = tiny_net();
        let mut state = AdamState::new(&net, 1e-4);
        let mut params = net.weights.clone();
        let mut g = GradientSet::zeros_like(&net);
        g.layers.iter_mut().flatten().for_each(|x| *x = 1.0);
        adam_step(&mut state, &mut params, &g).unwrap();
        let expected = -1e-4 / (1.0 + 1e-8);
        for (p, q) in params.iter().flatten().zip(net.weights.iter().flatten()) {
            assert_relative_eq!(p - q, expected, max_relative = 1e-9);
        }
    }

    #[test]
    fn adam_zero_gradient_keeps_params() {
        let net = tiny_net();
        let mut state = AdamState::new(&net, 1e-3);
        let mut params = net.weights.clone();
        let mut g = GradientSet::zeros_like(&net);
        g.layers[0][0] = 1.0;
        adam_step(&mut state, &mut params, &g).unwrap();
        let m0 = state.first_moment()[0][0];
        g.fill_zero();
        let before = params.clone();
        adam_step(&mut state, &mut params, &g).unwrap();
        assert!(state.first_moment()[0][0].abs() < m0.abs());
        assert_eq!(params[1], before[1]);
        assert!(adam_step(&mut state, &mut params[..1], &g).is_err());
    }

    #[test]
    fn zero_learning_rate_changes_nothing() {
        let net = tiny_net();
        let data = vec![EncodedSample {
            input: SpikeVector::from_times(&[0.0, 1.0]).unwrap(),
            label: 1,
        }];
        let cfg = TrainConfig {
            eta: 0.0,
            epochs: 1,
            ..TrainConfig::default()
        };
        let (trained, rows) = train(net.clone(), &data, &data, cfg, |_| {}).unwrap();
        assert_eq!(trained.weights, net.weights);
        assert_eq!(rows.len(), 1);
        assert!(train(net, &[], &data, cfg, |_| {}).is_err());
    }

    #[test]
    fn sparsity_window_is_strict() {
        let net = tiny_net();
        let x = SpikeVector::from_times(&[0.0, 0.0]).unwrap();
        let trace = net.forward(&x, 16.0).unwrap();
        let times: Vec<f64> = trace.layers[0].output().iter().flatten().collect();
        assert_eq!(times.len(), 3);
        let all = sparsity(&net.spec, std::slice::from_ref(&trace), 100.0);
        assert_eq!(all, vec![1.0]);
        let max = times.iter().copied().fold(0.0, f64::max);
        let strict = sparsity(&net.spec, std::slice::from_ref(&trace), max);
        assert!(strict[0] < 1.0);
    }
}
