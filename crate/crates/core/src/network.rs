//! Layered spike-time propagation: dense, convolutional and pooling layers,
//! the architecture grammar and the per-sample forward trace.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::neuron::{
    solve_schedule, Firing, FiringSolution, NeuronModel, NeuronVariant, ScheduledSpike,
    SpikeSchedule, SpikeVector,
};

/// Channel-major tensor shape. Flat vectors are `1 x 1 x n`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape3 {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
}

impl Shape3 {
    pub fn new(channels: usize, height: usize, width: usize) -> Self {
        Shape3 {
            channels,
            height,
            width,
        }
    }

    pub fn flat(n: usize) -> Self {
        Shape3::new(1, 1, n)
    }

    pub fn len(&self) -> usize {
        self.channels * self.height * self.width
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, c: usize, y: usize, x: usize) -> usize {
        (c * self.height + y) * self.width + x
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DenseSpec {
    pub inputs: usize,
    pub outputs: usize,
}

impl DenseSpec {
    pub fn param_count(&self) -> usize {
        self.inputs * self.outputs
    }
}

/// Stride-1 convolution over a channel-major input. Kernels are stored
/// out-channel, in-channel, row, column.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConvSpec {
    pub input: Shape3,
    pub out_channels: usize,
    pub kernel: usize,
    pub padding: usize,
}

impl ConvSpec {
    pub fn output(&self) -> Shape3 {
        let span = |n: usize| (n + 2 * self.padding + 1).saturating_sub(self.kernel);
        Shape3::new(self.out_channels, span(self.input.height), span(self.input.width))
    }

    /// Weights per output neuron (one receptive field).
    pub fn patch_len(&self) -> usize {
        self.input.channels * self.kernel * self.kernel
    }

    pub fn param_count(&self) -> usize {
        self.out_channels * self.patch_len()
    }

    /// Input index seen through kernel slot `slot` from output position
    /// `(oy, ox)`, or `None` when it falls in the padding.
    #[inline]
    pub fn input_index(&self, oy: usize, ox: usize, slot: usize) -> Option<usize> {
        let k2 = self.kernel * self.kernel;
        let (ic, rest) = (slot / k2, slot % k2);
        let (ky, kx) = (rest / self.kernel, rest % self.kernel);
        let iy = (oy + ky).checked_sub(self.padding)?;
        let ix = (ox + kx).checked_sub(self.padding)?;
        (iy < self.input.height && ix < self.input.width).then(|| self.input.index(ic, iy, ix))
    }
}

/// 2x2 window, stride 2. Odd trailing rows/columns are dropped.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct PoolSpec {
    pub input: Shape3,
}

impl PoolSpec {
    pub const KERNEL: usize = 2;
    pub const STRIDE: usize = 2;

    pub fn output(&self) -> Shape3 {
        Shape3::new(self.input.channels, self.input.height / 2, self.input.width / 2)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LayerSpec {
    Dense(DenseSpec),
    Conv(ConvSpec),
    Pool(PoolSpec),
}

impl LayerSpec {
    pub fn input_len(&self) -> usize {
        match self {
            LayerSpec::Dense(d) => d.inputs,
            LayerSpec::Conv(c) => c.input.len(),
            LayerSpec::Pool(p) => p.input.len(),
        }
    }

    pub fn output_shape(&self) -> Shape3 {
        match self {
            LayerSpec::Dense(d) => Shape3::flat(d.outputs),
            LayerSpec::Conv(c) => c.output(),
            LayerSpec::Pool(p) => p.output(),
        }
    }

    pub fn output_len(&self) -> usize {
        self.output_shape().len()
    }

    pub fn param_count(&self) -> usize {
        match self {
            LayerSpec::Dense(d) => d.param_count(),
            LayerSpec::Conv(c) => c.param_count(),
            LayerSpec::Pool(_) => 0,
        }
    }

    pub fn is_spiking(&self) -> bool {
        !matches!(self, LayerSpec::Pool(_))
    }

    pub fn fan_in(&self) -> usize {
        match self {
            LayerSpec::Dense(d) => d.inputs,
            LayerSpec::Conv(c) => c.patch_len(),
            LayerSpec::Pool(_) => 0,
        }
    }
}

/// One token of an architecture string such as
/// `Conv(5,6)-Pool-Conv(5,16)-Pool-400-400-10` or `784-400-10`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ArchItem {
    Conv { kernel: usize, channels: usize },
    Pool,
    Width(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Architecture {
    pub descriptor: String,
    pub items: Vec<ArchItem>,
}

impl std::str::FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let fail = |reason: String| Error::Architecture {
            descriptor: s.to_string(),
            reason,
        };
        let compact: String = s.chars().filter(|c| !c.is_whitespace()).collect();
        let mut items = Vec::new();
        for token in compact.split('-') {
            let item = if token.eq_ignore_ascii_case("pool") {
                ArchItem::Pool
            } else if let Some(args) = token
                .strip_prefix("Conv(")
                .or_else(|| token.strip_prefix("conv("))
                .and_then(|t| t.strip_suffix(')'))
            {
                let nums: Vec<&str> = args.split(',').collect();
                let [kernel, channels] = nums[..] else {
                    return Err(fail(format!("`{token}` needs two arguments")));
                };
                let parse = |n: &str| {
                    n.parse::<usize>()
                        .ok()
                        .filter(|v| *v > 0)
                        .ok_or_else(|| fail(format!("bad number `{n}` in `{token}`")))
                };
                ArchItem::Conv {
                    kernel: parse(kernel)?,
                    channels: parse(channels)?,
                }
            } else {
                match token.parse::<usize>() {
                    Ok(n) if n > 0 => ArchItem::Width(n),
                    _ => return Err(fail(format!("unrecognised token `{token}`"))),
                }
            };
            items.push(item);
        }
        if !matches!(items.last(), Some(ArchItem::Width(_))) {
            return Err(fail("the last layer must be a dense width".into()));
        }
        Ok(Architecture {
            descriptor: s.to_string(),
            items,
        })
    }
}

impl Architecture {
    /// Resolve against an input shape. A leading width names the (flat) input
    /// size and must match it; every later width is a dense layer.
    pub fn build(&self, input: Shape3, padding: usize, model: NeuronModel) -> Result<NetworkSpec> {
        let fail = |reason: String| Error::Architecture {
            descriptor: self.descriptor.clone(),
            reason,
        };
        let mut items = self.items.as_slice();
        if let Some(ArchItem::Width(n)) = items.first() {
            if *n != input.len() {
                return Err(fail(format!("declares {n} inputs but data has {}", input.len())));
            }
            items = &items[1..];
        }
        let mut shape = input;
        let mut layers = Vec::with_capacity(items.len());
        for item in items {
            let layer = match *item {
                ArchItem::Conv { kernel, channels } => {
                    let spec = ConvSpec {
                        input: shape,
                        out_channels: channels,
                        kernel,
                        padding,
                    };
                    if spec.output().is_empty() {
                        return Err(fail(format!("Conv({kernel},{channels}) does not fit {shape:?}")));
                    }
                    LayerSpec::Conv(spec)
                }
                ArchItem::Pool => {
                    let spec = PoolSpec { input: shape };
                    if spec.output().is_empty() {
                        return Err(fail(format!("Pool does not fit {shape:?}")));
                    }
                    LayerSpec::Pool(spec)
                }
                ArchItem::Width(n) => LayerSpec::Dense(DenseSpec {
                    inputs: shape.len(),
                    outputs: n,
                }),
            };
            shape = layer.output_shape();
            layers.push(layer);
        }
        NetworkSpec::new(input, layers, model)
    }
}

/// Serializable description of a network, used by checkpoints.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkDescriptor {
    pub architecture: String,
    pub input: [usize; 3],
    pub padding: usize,
    pub variant: NeuronVariant,
    pub tau: f64,
    pub v_threshold: f64,
}

impl NetworkDescriptor {
    pub fn build(&self) -> Result<NetworkSpec> {
        let model = NeuronModel::new(self.variant, self.tau, self.v_threshold)?;
        let [c, h, w] = self.input;
        let mut spec = self
            .architecture
            .parse::<Architecture>()?
            .build(Shape3::new(c, h, w), self.padding, model)?;
        spec.descriptor = Some(self.clone());
        Ok(spec)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetworkSpec {
    pub input: Shape3,
    pub layers: Vec<LayerSpec>,
    pub model: NeuronModel,
    pub(crate) descriptor: Option<NetworkDescriptor>,
}

impl NetworkSpec {
    pub fn new(input: Shape3, layers: Vec<LayerSpec>, model: NeuronModel) -> Result<Self> {
        let mut len = input.len();
        for (i, layer) in layers.iter().enumerate() {
            if layer.input_len() != len {
                return Err(Error::contract(format!(
                    "layer {i} expects {} inputs but receives {len}",
                    layer.input_len()
                )));
            }
            len = layer.output_len();
        }
        if !matches!(layers.last(), Some(LayerSpec::Dense(_))) {
            return Err(Error::contract("the output layer must be dense"));
        }
        Ok(NetworkSpec {
            input,
            layers,
            model,
            descriptor: None,
        })
    }

    /// Parses a layer string and resolves it against `input`.
    pub fn from_architecture(
        architecture: &str,
        input: Shape3,
        padding: usize,
        model: NeuronModel,
    ) -> Result<Self> {
        NetworkDescriptor {
            architecture: architecture.to_string(),
            input: [input.channels, input.height, input.width],
            padding,
            variant: model.variant,
            tau: model.tau,
            v_threshold: model.v_threshold,
        }
        .build()
    }

    pub fn descriptor(&self) -> Option<&NetworkDescriptor> {
        self.descriptor.as_ref()
    }

    pub fn output_len(&self) -> usize {
        self.layers.last().map_or(0, LayerSpec::output_len)
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(LayerSpec::param_count).sum()
    }

    /// Indices of spiking layers other than the output layer.
    pub fn hidden_spiking_layers(&self) -> Vec<usize> {
        let last = self.layers.len() - 1;
        (0..last).filter(|&l| self.layers[l].is_spiking()).collect()
    }
}

/// Parameters plus structure. `weights[l]` is empty for pooling layers.
#[derive(Clone, Debug, PartialEq)]
pub struct Network {
    pub spec: NetworkSpec,
    pub weights: Vec<Vec<f64>>,
}

impl Network {
    pub fn zeros(spec: NetworkSpec) -> Self {
        let weights = spec.layers.iter().map(|l| vec![0.0; l.param_count()]).collect();
        Network { spec, weights }
    }

    pub fn from_weights(spec: NetworkSpec, weights: Vec<Vec<f64>>) -> Result<Self> {
        if weights.len() != spec.layers.len() {
            return Err(Error::contract("one weight block per layer required"));
        }
        for (l, (layer, w)) in spec.layers.iter().zip(&weights).enumerate() {
            if w.len() != layer.param_count() {
                return Err(Error::contract(format!(
                    "layer {l} needs {} weights, got {}",
                    layer.param_count(),
                    w.len()
                )));
            }
            if w.iter().any(|x| !x.is_finite()) {
                return Err(Error::contract(format!("layer {l} has non-finite weights")));
            }
        }
        Ok(Network { spec, weights })
    }

    /// Normal initialization with standard deviation `sqrt(2 / fan_in)` and
    /// mean `2 V_th / (tau_eff fan_in)`, where `tau_eff` is `tau` for the
    /// leaky models and `t_ref` for the non-leaky one.
    pub fn init<R: Rng + ?Sized>(spec: NetworkSpec, t_ref: f64, rng: &mut R) -> Self {
        Self::init_with(spec, t_ref, WeightInit::default(), rng)
    }

    /// [`Network::init`] with the mean and standard deviation multiplied by
    /// the gains in `init`.
    pub fn init_with<R: Rng + ?Sized>(spec: NetworkSpec, t_ref: f64, init: WeightInit, rng: &mut R) -> Self {
        let model = spec.model;
        let tau_eff = match model.variant {
            NeuronVariant::NonLeaky => t_ref,
            _ => model.tau,
        };
        let weights = spec
            .layers
            .iter()
            .map(|layer| {
                let fan_in = layer.fan_in();
                if fan_in == 0 {
                    return Vec::new();
                }
                let mean = init.mean_gain * 2.0 * model.v_threshold / (tau_eff * fan_in as f64);
                let std = init.std_gain * (2.0 / fan_in as f64).sqrt();
                let normal = Normal::new(mean, std).expect("finite init parameters");
                (0..layer.param_count()).map(|_| normal.sample(rng)).collect()
            })
            .collect();
        Network { spec, weights }
    }

    pub fn forward(&self, input: &SpikeVector, horizon: f64) -> Result<ForwardTrace> {
        network_forward(self, input, horizon)
    }
}

/// Multipliers on the mean and standard deviation of [`Network::init`].
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightInit {
    pub mean_gain: f64,
    pub std_gain: f64,
}

impl Default for WeightInit {
    fn default() -> Self {
        WeightInit {
            mean_gain: 1.0,
            std_gain: 1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenseTrace {
    pub schedule: SpikeSchedule,
    pub firings: Vec<Firing>,
    pub output: SpikeVector,
}

/// `schedules[pos]` lists the receptive field of output position `pos` with
/// kernel slots; `firings` is indexed like the output (channel-major).
#[derive(Clone, Debug, PartialEq)]
pub struct ConvTrace {
    pub schedules: Vec<SpikeSchedule>,
    pub firings: Vec<Firing>,
    pub output: SpikeVector,
}

/// `routing[o]` is the input index whose spike became output `o`.
#[derive(Clone, Debug, PartialEq)]
pub struct PoolTrace {
    pub routing: Vec<Option<usize>>,
    pub output: SpikeVector,
}

#[derive(Clone, Debug, PartialEq)]
pub enum LayerTrace {
    Dense(DenseTrace),
    Conv(ConvTrace),
    Pool(PoolTrace),
}

impl LayerTrace {
    pub fn output(&self) -> &SpikeVector {
        match self {
            LayerTrace::Dense(t) => &t.output,
            LayerTrace::Conv(t) => &t.output,
            LayerTrace::Pool(t) => &t.output,
        }
    }

    pub fn firings(&self) -> Option<&[Firing]> {
        match self {
            LayerTrace::Dense(t) => Some(&t.firings),
            LayerTrace::Conv(t) => Some(&t.firings),
            LayerTrace::Pool(_) => None,
        }
    }
}

/// Everything a backward pass needs about one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct ForwardTrace {
    pub input: SpikeVector,
    pub layers: Vec<LayerTrace>,
    pub horizon: f64,
}

impl ForwardTrace {
    /// Spikes entering layer `l`.
    pub fn layer_input(&self, l: usize) -> &SpikeVector {
        if l == 0 {
            &self.input
        } else {
            self.layers[l - 1].output()
        }
    }

    /// Output-layer spike times `t^(M)`.
    pub fn output_times(&self) -> &SpikeVector {
        self.layers.last().expect("network has layers").output()
    }
}

fn spikes_from_firings(firings: &[Firing]) -> SpikeVector {
    SpikeVector::from_vec_unchecked(firings.iter().map(|f| f.time).collect())
}

pub fn forward_dense(
    spec: &DenseSpec,
    weights: &[f64],
    model: &NeuronModel,
    input: &SpikeVector,
    horizon: f64,
) -> Result<DenseTrace> {
    if input.len() != spec.inputs || weights.len() != spec.param_count() {
        return Err(Error::contract(format!(
            "dense layer {}x{} got {} inputs and {} weights",
            spec.outputs,
            spec.inputs,
            input.len(),
            weights.len()
        )));
    }
    let schedule = SpikeSchedule::from_spikes(input, horizon);
    let firings: Vec<Firing> = weights
        .chunks_exact(spec.inputs)
        .map(|row| solve_schedule(model, row, &schedule, horizon))
        .collect();
    let output = spikes_from_firings(&firings);
    Ok(DenseTrace {
        schedule,
        firings,
        output,
    })
}

pub fn forward_conv(
    spec: &ConvSpec,
    weights: &[f64],
    model: &NeuronModel,
    input: &SpikeVector,
    horizon: f64,
) -> Result<ConvTrace> {
    if input.len() != spec.input.len() || weights.len() != spec.param_count() {
        return Err(Error::contract(format!(
            "conv layer expects {} inputs and {} weights, got {} and {}",
            spec.input.len(),
            spec.param_count(),
            input.len(),
            weights.len()
        )));
    }
    let out = spec.output();
    let positions = out.height * out.width;
    let patch = spec.patch_len();
    let mut schedules = Vec::with_capacity(positions);
    let mut firings = vec![Firing::default(); out.len()];
    for oy in 0..out.height {
        for ox in 0..out.width {
            let schedule = SpikeSchedule::from_slots(
                (0..patch).filter_map(|slot| {
                    let idx = spec.input_index(oy, ox, slot)?;
                    input.get(idx).map(|time| ScheduledSpike { slot, time })
                }),
                horizon,
            );
            let pos = oy * out.width + ox;
            for (oc, kernel) in weights.chunks_exact(patch).enumerate() {
                firings[oc * positions + pos] = solve_schedule(model, kernel, &schedule, horizon);
            }
            schedules.push(schedule);
        }
    }
    let output = spikes_from_firings(&firings);
    Ok(ConvTrace {
        schedules,
        firings,
        output,
    })
}

/// Earliest-spike pooling; ties go to the lowest input index.
pub fn forward_pool(spec: &PoolSpec, input: &SpikeVector) -> Result<PoolTrace> {
    if input.len() != spec.input.len() {
        return Err(Error::contract(format!(
            "pool expects {} inputs, got {}",
            spec.input.len(),
            input.len()
        )));
    }
    let out = spec.output();
    let mut routing = Vec::with_capacity(out.len());
    for c in 0..out.channels {
        for oy in 0..out.height {
            for ox in 0..out.width {
                let mut best: Option<(usize, f64)> = None;
                for dy in 0..PoolSpec::KERNEL {
                    for dx in 0..PoolSpec::KERNEL {
                        let idx = spec.input.index(c, 2 * oy + dy, 2 * ox + dx);
                        if let Some(t) = input.get(idx) {
                            if best.is_none_or(|(_, bt)| t < bt) {
                                best = Some((idx, t));
                            }
                        }
                    }
                }
                routing.push(best.map(|(idx, _)| idx));
            }
        }
    }
    let output =
        SpikeVector::from_vec_unchecked(routing.iter().map(|r| r.and_then(|i| input.get(i))).collect());
    Ok(PoolTrace { routing, output })
}

pub fn network_forward(net: &Network, input: &SpikeVector, horizon: f64) -> Result<ForwardTrace> {
    if input.len() != net.spec.input.len() {
        return Err(Error::contract(format!(
            "network expects {} inputs, got {}",
            net.spec.input.len(),
            input.len()
        )));
    }
    let model = &net.spec.model;
    let mut layers: Vec<LayerTrace> = Vec::with_capacity(net.spec.layers.len());
    for (spec, weights) in net.spec.layers.iter().zip(&net.weights) {
        let x = layers.last().map_or(input, LayerTrace::output);
        let trace = match spec {
            LayerSpec::Dense(d) => LayerTrace::Dense(forward_dense(d, weights, model, x, horizon)?),
            LayerSpec::Conv(c) => LayerTrace::Conv(forward_conv(c, weights, model, x, horizon)?),
            LayerSpec::Pool(p) => LayerTrace::Pool(forward_pool(p, x)?),
        };
        layers.push(trace);
    }
    Ok(ForwardTrace {
        input: input.clone(),
        layers,
        horizon,
    })
}

/// Maps a neuron's schedule slots to indices of the layer input.
#[derive(Clone, Copy, Debug)]
pub enum SlotMap<'a> {
    Identity,
    Conv { spec: &'a ConvSpec, oy: usize, ox: usize },
}

impl SlotMap<'_> {
    #[inline]
    pub fn input_index(&self, slot: usize) -> usize {
        match self {
            SlotMap::Identity => slot,
            SlotMap::Conv { spec, oy, ox } => spec
                .input_index(*oy, *ox, slot)
                .expect("scheduled slots lie inside the input"),
        }
    }
}

/// One spiking neuron of a traced layer, with its weight row.
#[derive(Clone, Copy, Debug)]
pub struct NeuronRef<'a> {
    /// Position in the layer output.
    pub index: usize,
    pub firing: &'a Firing,
    pub schedule: &'a SpikeSchedule,
    pub row: &'a [f64],
    /// Offset of `row` inside the layer's weight block.
    pub row_offset: usize,
    pub map: SlotMap<'a>,
}

impl NeuronRef<'_> {
    /// Causal inputs as `(slot, input index, weight, time)`.
    pub fn causal(&self) -> impl Iterator<Item = (usize, usize, f64, f64)> + '_ {
        self.schedule.entries()[..self.firing.causal_len]
            .iter()
            .map(move |s| (s.slot, self.map.input_index(s.slot), self.row[s.slot], s.time))
    }

    /// Every presynaptic slot of the neuron as `(slot, weight)`, fired or not.
    pub fn presynaptic(&self) -> Vec<(usize, f64)> {
        match self.map {
            SlotMap::Identity => self.row.iter().copied().enumerate().collect(),
            SlotMap::Conv { spec, oy, ox } => (0..spec.patch_len())
                .filter(|&slot| spec.input_index(oy, ox, slot).is_some())
                .map(|slot| (slot, self.row[slot]))
                .collect(),
        }
    }

    pub fn solution(&self) -> FiringSolution {
        let mut s = FiringSolution::from_firing(self.firing, self.schedule);
        for slot in &mut s.causal_set {
            *slot = self.map.input_index(*slot);
        }
        s
    }
}

/// Visits every neuron of spiking layer `spec`; a no-op for pooling.
pub fn for_each_neuron<'a>(
    spec: &'a LayerSpec,
    weights: &'a [f64],
    trace: &'a LayerTrace,
    f: impl FnMut(NeuronRef<'a>),
) {
    match (spec, trace) {
        (LayerSpec::Dense(d), LayerTrace::Dense(t)) => for_each_dense_neuron(d, weights, t, f),
        (LayerSpec::Conv(c), LayerTrace::Conv(t)) => for_each_conv_neuron(c, weights, t, f),
        _ => {}
    }
}

pub fn for_each_dense_neuron<'a>(
    spec: &'a DenseSpec,
    weights: &'a [f64],
    trace: &'a DenseTrace,
    mut f: impl FnMut(NeuronRef<'a>),
) {
    for (i, firing) in trace.firings.iter().enumerate() {
        let row_offset = i * spec.inputs;
        f(NeuronRef {
            index: i,
            firing,
            schedule: &trace.schedule,
            row: &weights[row_offset..row_offset + spec.inputs],
            row_offset,
            map: SlotMap::Identity,
        });
    }
}

pub fn for_each_conv_neuron<'a>(
    spec: &'a ConvSpec,
    weights: &'a [f64],
    trace: &'a ConvTrace,
    mut f: impl FnMut(NeuronRef<'a>),
) {
    let out = spec.output();
    let positions = out.height * out.width;
    let patch = spec.patch_len();
    for (i, firing) in trace.firings.iter().enumerate() {
        let (oc, pos) = (i / positions, i % positions);
        let row_offset = oc * patch;
        f(NeuronRef {
            index: i,
            firing,
            schedule: &trace.schedules[pos],
            row: &weights[row_offset..row_offset + patch],
            row_offset,
            map: SlotMap::Conv {
                spec,
                oy: pos / out.width,
                ox: pos % out.width,
            },
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::neuron::solve_firing_time;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn nl() -> NeuronModel {
        NeuronModel::non_leaky(1.0)
    }

    #[test]
    fn dense_examples() {
        let d = DenseSpec { inputs: 1, outputs: 1 };
        let x = SpikeVector::from_times(&[0.0]).unwrap();
        let t = forward_dense(&d, &[2.0], &nl(), &x, 16.0).unwrap();
        assert_eq!(t.output.get(0), Some(0.5));

        let d = DenseSpec { inputs: 2, outputs: 1 };
        let x = SpikeVector::from_times(&[0.0, 0.2]).unwrap();
        let t = forward_dense(&d, &[2.0, -0.5], &nl(), &x, 16.0).unwrap();
        assert!((t.output.get(0).unwrap() - 0.6).abs() < 1e-12);

        let m = NeuronModel::current_synapse(1.0, 1.0);
        let t = forward_dense(&d, &[0.4, 0.3], &m, &x, 16.0).unwrap();
        assert_eq!(t.output.get(0), None);

        assert!(forward_dense(&d, &[1.0], &nl(), &x, 16.0).is_err());
    }

    #[test]
    fn pool_picks_earliest_and_routes() {
        let p = PoolSpec {
            input: Shape3::new(1, 2, 2),
        };
        let x = SpikeVector::new(vec![Some(3.0), Some(5.0), Some(2.0), None]).unwrap();
        let t = forward_pool(&p, &x).unwrap();
        assert_eq!(t.output.get(0), Some(2.0));
        assert_eq!(t.routing, vec![Some(2)]);

        let t = forward_pool(&p, &SpikeVector::silent(4)).unwrap();
        assert_eq!(t.output.get(0), None);
        assert_eq!(t.routing, vec![None]);

        let x = SpikeVector::from_times(&[1.5; 4]).unwrap();
        let t = forward_pool(&p, &x).unwrap();
        assert_eq!(t.output.get(0), Some(1.5));
        assert_eq!(t.routing, vec![Some(0)]);
    }

    #[test]
    fn pool_truncates_odd_dims() {
        let p = PoolSpec {
            input: Shape3::new(6, 24, 24),
        };
        assert_eq!(p.output(), Shape3::new(6, 12, 12));
        let p = PoolSpec {
            input: Shape3::new(1, 5, 3),
        };
        assert_eq!(p.output(), Shape3::new(1, 2, 1));
    }

    #[test]
    fn conv_output_shapes() {
        let c = ConvSpec {
            input: Shape3::new(1, 28, 28),
            out_channels: 6,
            kernel: 5,
            padding: 0,
        };
        assert_eq!(c.output(), Shape3::new(6, 24, 24));
        let c = ConvSpec {
            input: Shape3::new(6, 32, 32),
            out_channels: 24,
            kernel: 3,
            padding: 1,
        };
        assert_eq!(c.output(), Shape3::new(24, 32, 32));
    }

    #[test]
    fn one_by_one_conv_is_pointwise_dense() {
        let c = ConvSpec {
            input: Shape3::new(1, 3, 3),
            out_channels: 1,
            kernel: 1,
            padding: 0,
        };
        let times: Vec<f64> = (0..9).map(|i| 0.1 * i as f64).collect();
        let x = SpikeVector::from_times(&times).unwrap();
        let t = forward_conv(&c, &[1.7], &nl(), &x, 16.0).unwrap();
        for (i, &tj) in times.iter().enumerate() {
            let single = SpikeVector::from_times(&[tj]).unwrap();
            let d = forward_dense(&DenseSpec { inputs: 1, outputs: 1 }, &[1.7], &nl(), &single, 16.0)
                .unwrap();
            assert_eq!(t.output.get(i), d.output.get(0));
        }
    }

    #[test]
    fn patch_fully_in_padding_is_silent() {
        // 1x1 input, 3x3 kernel, padding 2: the corner outputs only see padding.
        let c = ConvSpec {
            input: Shape3::new(1, 1, 1),
            out_channels: 1,
            kernel: 3,
            padding: 2,
        };
        assert_eq!(c.output(), Shape3::new(1, 3, 3));
        let x = SpikeVector::from_times(&[0.0]).unwrap();
        let t = forward_conv(&c, &[5.0; 9], &nl(), &x, 16.0).unwrap();
        assert_eq!(t.output.get(0), Some(0.2));
        let t = forward_conv(
            &ConvSpec { padding: 2, ..c },
            &[5.0; 9],
            &nl(),
            &SpikeVector::silent(1),
            16.0,
        )
        .unwrap();
        assert_eq!(t.output.fired_count(), 0);
        // Corner (0,0) reaches the input only through slot 8 (bottom right).
        assert_eq!(c.input_index(0, 0, 8), Some(0));
        assert!((0..8).all(|s| c.input_index(0, 0, s).is_none()));
    }

    #[test]
    fn architecture_parsing() {
        let a: Architecture = "Conv(5, 6)-Pool-Conv(5,16)-Pool-400-400-10".parse().unwrap();
        assert_eq!(a.items.len(), 7);
        let spec = a.build(Shape3::new(1, 28, 28), 0, nl()).unwrap();
        let shapes: Vec<Shape3> = spec.layers.iter().map(LayerSpec::output_shape).collect();
        assert_eq!(shapes[0], Shape3::new(6, 24, 24));
        assert_eq!(shapes[1], Shape3::new(6, 12, 12));
        assert_eq!(shapes[2], Shape3::new(16, 8, 8));
        assert_eq!(shapes[3], Shape3::new(16, 4, 4));
        assert_eq!(spec.layers[4], LayerSpec::Dense(DenseSpec { inputs: 256, outputs: 400 }));
        assert_eq!(spec.hidden_spiking_layers(), vec![0, 2, 4, 5]);

        let spec = NetworkSpec::from_architecture("784-400-10", Shape3::new(1, 28, 28), 0, nl())
            .unwrap();
        assert_eq!(spec.layers.len(), 2);
        assert_eq!(spec.param_count(), 784 * 400 + 400 * 10);

        assert!("784-400-Pool".parse::<Architecture>().is_err());
        assert!("Conv(5)-10".parse::<Architecture>().is_err());
        assert!("abc-10".parse::<Architecture>().is_err());
        assert!(NetworkSpec::from_architecture("100-10", Shape3::flat(5), 0, nl()).is_err());
    }

    #[test]
    fn cifar_table_architecture() {
        let spec = NetworkSpec::from_architecture(
            "Conv(3,24)-Pool-Conv(3,48)-Pool-Conv(3,96)-Pool-600-10",
            Shape3::new(6, 32, 32),
            1,
            nl(),
        )
        .unwrap();
        assert_eq!(spec.layers[6], LayerSpec::Dense(DenseSpec { inputs: 1536, outputs: 600 }));
    }

    #[test]
    fn zero_weights_never_fire() {
        let spec = NetworkSpec::from_architecture("4-6-5-3", Shape3::flat(4), 0, nl()).unwrap();
        let net = Network::zeros(spec);
        let x = SpikeVector::from_times(&[0.0, 1.0, 2.0, 3.0]).unwrap();
        let trace = net.forward(&x, 16.0).unwrap();
        assert!(trace.layers.iter().all(|l| l.output().fired_count() == 0));
    }

    #[test]
    fn single_layer_network_is_forward_dense() {
        let spec = NetworkSpec::from_architecture("3-2", Shape3::flat(3), 0, nl()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let net = Network::init(spec, 8.0, &mut rng);
        let x = SpikeVector::from_times(&[0.5, 1.0, 0.1]).unwrap();
        let trace = net.forward(&x, 16.0).unwrap();
        let d = DenseSpec { inputs: 3, outputs: 2 };
        let direct = forward_dense(&d, &net.weights[0], &nl(), &x, 16.0).unwrap();
        assert_eq!(trace.layers[0], LayerTrace::Dense(direct));
    }

    #[test]
    fn neuron_refs_match_standalone_solver() {
        let spec = NetworkSpec::from_architecture(
            "Conv(3,2)-Pool-4",
            Shape3::new(1, 6, 6),
            1,
            NeuronModel::alpha_synapse(1.0, 1.0),
        )
        .unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut net = Network::init(spec, 8.0, &mut rng);
        for w in &mut net.weights[0] {
            *w = w.abs() + 0.3;
        }
        let times: Vec<f64> = (0..36).map(|i| (i % 7) as f64 * 0.3).collect();
        let x = SpikeVector::from_times(&times).unwrap();
        let trace = net.forward(&x, 16.0).unwrap();
        let LayerSpec::Conv(c) = net.spec.layers[0] else { unreachable!() };
        let mut seen = 0;
        for_each_neuron(&net.spec.layers[0], &net.weights[0], &trace.layers[0], |n| {
            // Materialise the full 36-input row of this neuron.
            let mut row = vec![0.0; 36];
            let mut mask = vec![None; 36];
            let SlotMap::Conv { oy, ox, .. } = n.map else { unreachable!() };
            for slot in 0..c.patch_len() {
                if let Some(idx) = c.input_index(oy, ox, slot) {
                    row[idx] = n.row[slot];
                    mask[idx] = x.get(idx);
                }
            }
            let sub = SpikeVector::new(mask).unwrap();
            let s = solve_firing_time(&net.spec.model, &row, &sub, 16.0).unwrap();
            assert_eq!(s.time, n.firing.time);
            let mut got = n.solution().causal_set;
            got.sort_unstable();
            let mut want = s.causal_set.clone();
            want.sort_unstable();
            assert_eq!(got, want);
            seen += 1;
        });
        assert_eq!(seen, 2 * 36);
    }
}
