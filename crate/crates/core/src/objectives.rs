//! Timing loss, temporal penalty and the hidden-layer firing regularizers,
//! each returning values together with gradient contributions.

use serde::{Deserialize, Serialize};

use crate::backprop::{network_backward, GradientSet};
use crate::error::{Error, Result};
use crate::network::{for_each_neuron, ForwardTrace, Network, NeuronRef};
use crate::neuron::{NeuronModel, NeuronVariant};

/// Orientation of the softmax in the timing loss `L`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TimingLoss {
    /// [`earliest_ce`]: the label should fire before every other output.
    #[default]
    Earliest,
    /// [`softmax_ce`]: `ln S_label` over `softmax(t / tau_soft)`.
    LogSoftmax,
}

impl TimingLoss {
    pub fn eval(self, times: &[f64], label: usize, tau_soft: f64) -> Result<(f64, Vec<f64>)> {
        match self {
            TimingLoss::Earliest => earliest_ce(times, label, tau_soft),
            TimingLoss::LogSoftmax => softmax_ce(times, label, tau_soft),
        }
    }
}

/// Which membrane-potential term `V` is used.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MembraneForm {
    /// The spike-timing limit form (M-SSR).
    #[default]
    Limit,
    /// Riemann sum of the supra-`v_hat` excursion.
    Integral,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CostConfig {
    pub gamma1: f64,
    pub gamma2: f64,
    pub gamma3: f64,
    pub xi: f64,
    pub tau_soft: f64,
    pub timing_loss: TimingLoss,
    pub t_ref: f64,
    /// Regularization window `T`; `None` means `t_ref`.
    pub window: Option<f64>,
    pub membrane: MembraneForm,
    pub v_hat: f64,
    pub dt_integral: Option<f64>,
    /// Replace the `Q` term by the firing-promotion term on silent neurons.
    pub promotion: bool,
    /// Simulation horizon; `None` means `2 t_ref`.
    pub horizon: Option<f64>,
}

impl Default for CostConfig {
    fn default() -> Self {
        CostConfig {
            gamma1: 1e-4,
            gamma2: 0.0,
            gamma3: 0.0,
            xi: 1.0,
            tau_soft: 0.9,
            timing_loss: TimingLoss::Earliest,
            t_ref: 8.0,
            window: None,
            membrane: MembraneForm::Limit,
            v_hat: 0.99,
            dt_integral: None,
            promotion: false,
            horizon: None,
        }
    }
}

impl CostConfig {
    pub fn window(&self) -> f64 {
        self.window.unwrap_or(self.t_ref)
    }

    /// Integration step, `t_ref / 1000` unless set.
    pub fn dt_integral(&self) -> f64 {
        self.dt_integral.unwrap_or(self.t_ref / 1000.0)
    }

    /// Simulation horizon; nothing after it influences any term.
    pub fn horizon(&self) -> f64 {
        self.horizon.unwrap_or(2.0 * self.t_ref)
    }

    /// Surrogate time of a silent output neuron: the horizon.
    pub fn t_max(&self) -> f64 {
        self.horizon()
    }

    pub fn validate(&self, model: &NeuronModel) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        let finite = [self.gamma1, self.gamma2, self.gamma3, self.xi, self.v_hat];
        if finite.iter().any(|x| !x.is_finite()) {
            return bad("cost coefficients must be finite".into());
        }
        if !(self.tau_soft > 0.0 && self.tau_soft.is_finite()) {
            return bad(format!("tau_soft must be positive, got {}", self.tau_soft));
        }
        if !(self.t_ref > 0.0 && self.t_ref.is_finite()) {
            return bad(format!("t_ref must be positive, got {}", self.t_ref));
        }
        if !(self.window() > 0.0 && self.window().is_finite()) {
            return bad(format!("window must be positive, got {}", self.window()));
        }
        if !(self.horizon() >= self.window() && self.horizon().is_finite()) {
            return bad(format!(
                "horizon must be finite and no shorter than the window, got {}",
                self.horizon()
            ));
        }
        if !(self.xi > 0.0) {
            return bad(format!("xi must be positive, got {}", self.xi));
        }
        if self.membrane == MembraneForm::Integral {
            if !(self.v_hat > 0.0 && self.v_hat < model.v_threshold) {
                return bad(format!(
                    "v_hat must lie in (0, {}), got {}",
                    model.v_threshold, self.v_hat
                ));
            }
            let dt = self.dt_integral();
            if !(dt > 0.0 && dt.is_finite()) {
                return bad(format!("dt_integral must be positive, got {dt}"));
            }
        }
        Ok(())
    }
}

/// `L = ln S_label` with `S_i = exp(t_i / tau_soft) / sum_j exp(t_j / tau_soft)`,
/// and `dL/dt_i = (1{i = label} - S_i) / tau_soft`.
pub fn softmax_ce(times: &[f64], label: usize, tau_soft: f64) -> Result<(f64, Vec<f64>)> {
    log_softmax(times, label, tau_soft, 1.0)
}

/// `L = -ln S_label` with `S_i = exp(-t_i / tau_soft) / sum_j exp(-t_j / tau_soft)`:
/// cross-entropy that rewards the label for firing first. The gradient has
/// the same form, `(1{i = label} - S_i) / tau_soft`.
pub fn earliest_ce(times: &[f64], label: usize, tau_soft: f64) -> Result<(f64, Vec<f64>)> {
    log_softmax(times, label, tau_soft, -1.0)
}

/// `sign * ln softmax(sign * t / tau_soft)[label]` and its gradient.
fn log_softmax(times: &[f64], label: usize, tau_soft: f64, sign: f64) -> Result<(f64, Vec<f64>)> {
    if label >= times.len() {
        return Err(Error::contract(format!(
            "label {label} out of range for {} outputs",
            times.len()
        )));
    }
    let max = times.iter().map(|t| sign * t).fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = times.iter().map(|t| ((sign * t - max) / tau_soft).exp()).collect();
    let total: f64 = exps.iter().sum();
    let value = sign * ((sign * times[label] - max) / tau_soft - total.ln());
    let grad = exps
        .iter()
        .enumerate()
        .map(|(i, e)| ((i == label) as u8 as f64 - e / total) / tau_soft)
        .collect();
    Ok((value, grad))
}

/// `sum_i (t_i - t_ref)^2` and its gradient.
pub fn temporal_penalty(times: &[f64], t_ref: f64) -> (f64, Vec<f64>) {
    let value = times.iter().map(|t| (t - t_ref).powi(2)).sum();
    let grad = times.iter().map(|t| 2.0 * (t - t_ref)).collect();
    (value, grad)
}

/// Gradient of one neuron's term: `(slot, input index, d/dw, d/dt_j)`.
type Emit<'e> = &'e mut dyn FnMut(usize, usize, f64, f64);

/// Limit form of the membrane term for one neuron. The normaliser and the
/// firing-time factors are held fixed, so the gradient is
/// `c * dv(t_i)/d(theta)` evaluated at the frozen firing time.
pub(crate) fn m_ssr_neuron(model: &NeuronModel, n: &NeuronRef, window: f64, emit: Emit) -> f64 {
    let Some(t_i) = n.firing.time.filter(|&t| t < window) else {
        return 0.0;
    };
    let f = n.firing;
    let v_th = model.v_threshold;
    let tau = model.tau;
    match model.variant {
        NeuronVariant::NonLeaky => {
            let c = 1.0 / f.sum_w;
            for (slot, input, w, t_j) in n.causal() {
                emit(slot, input, c * (t_i - t_j), -c * w);
            }
            c * (t_i * f.sum_w - f.sum_wt)
        }
        NeuronVariant::CurrentSynapse => {
            let c = 1.0 / (f.sum_w - v_th / tau);
            let mut value = 0.0;
            for (slot, input, w, t_j) in n.causal() {
                let q = ((t_j - t_i) / tau).exp();
                value += w * tau * (1.0 - q);
                emit(slot, input, c * tau * (1.0 - q), -c * w * q);
            }
            c * value
        }
        NeuronVariant::AlphaSynapse => {
            let c = f.alpha;
            let mut value = 0.0;
            for (slot, input, w, t_j) in n.causal() {
                let p = ((t_j - t_i) / (2.0 * tau)).exp();
                value += w * 2.0 * tau * (p - p * p);
                emit(slot, input, c * 2.0 * tau * (p - p * p), c * w * (p - 2.0 * p * p));
            }
            c * value
        }
    }
}

/// `Q_i = sum over the causal set of w_ij` for neurons firing before `window`.
pub(crate) fn f_ssr_neuron(n: &NeuronRef, window: f64, emit: Emit) -> f64 {
    if !n.firing.time.is_some_and(|t| t < window) {
        return 0.0;
    }
    let mut q = 0.0;
    for (slot, input, w, _) in n.causal() {
        q += w;
        emit(slot, input, 1.0, 0.0);
    }
    q
}

/// Full presynaptic row sum for silent neurons.
pub(crate) fn promotion_neuron(n: &NeuronRef, emit: Emit) -> f64 {
    if n.firing.fired() {
        return 0.0;
    }
    let mut q = 0.0;
    for (slot, w) in n.presynaptic() {
        q += w;
        emit(slot, usize::MAX, 1.0, 0.0);
    }
    q
}

/// Open interval of `t` on which the potential, with the current causal sums
/// held fixed, exceeds `v_hat`. The potential on such a segment is
/// `S t - P` (non-leaky), `tau S - tau a e^{-t/tau}` (current synapse) or
/// `2 tau (b u - a u^2)` with `u = e^{-t/2tau}` (alpha synapse).
fn active_interval(model: &NeuronModel, s: &SegmentState, v_hat: f64) -> Option<(f64, f64)> {
    let inf = f64::INFINITY;
    let tau = model.tau;
    match model.variant {
        NeuronVariant::NonLeaky => {
            if s.sum_w > 0.0 {
                Some(((v_hat + s.sum_wt) / s.sum_w, inf))
            } else if s.sum_w < 0.0 {
                Some((-inf, (v_hat + s.sum_wt) / s.sum_w))
            } else {
                (-s.sum_wt > v_hat).then_some((-inf, inf))
            }
        }
        NeuronVariant::CurrentSynapse => {
            // a e^{-t/tau} < r
            let r = s.sum_w - v_hat / tau;
            if s.a > 0.0 {
                (r > 0.0).then(|| (tau * (s.a / r).ln(), inf))
            } else if s.a < 0.0 {
                if r >= 0.0 {
                    Some((-inf, inf))
                } else {
                    Some((-inf, tau * (s.a / r).ln()))
                }
            } else {
                (r > 0.0).then_some((-inf, inf))
            }
        }
        NeuronVariant::AlphaSynapse => {
            // a u^2 - b u + c0 < 0 for u > 0
            let c0 = v_hat / (2.0 * tau);
            let to_t = |u: f64| -2.0 * tau * u.ln();
            if s.a > 0.0 {
                let disc = s.b * s.b - 4.0 * s.a * c0;
                if disc <= 0.0 {
                    return None;
                }
                let root = disc.sqrt();
                let hi = (s.b + root) / (2.0 * s.a);
                if hi <= 0.0 {
                    return None;
                }
                // Product of roots is c0 / a > 0, so the lower root is positive too.
                let lo = c0 / (s.a * hi);
                Some((to_t(hi), to_t(lo)))
            } else if s.a < 0.0 {
                let root = (s.b * s.b - 4.0 * s.a * c0).sqrt();
                let u_pos = (s.b - root) / (2.0 * s.a);
                Some((-inf, to_t(u_pos)))
            } else if s.b > 0.0 {
                Some((-inf, to_t(c0 / s.b)))
            } else {
                None
            }
        }
    }
}

#[derive(Clone, Copy, Debug, Default)]
struct SegmentState {
    sum_w: f64,
    sum_wt: f64,
    a: f64,
    b: f64,
}

/// Sums over the active grid points of one inter-arrival segment.
#[derive(Clone, Copy, Debug, Default)]
struct GridSums {
    count: f64,
    sum_t: f64,
    /// `sum e^{-t_k / tau}`
    e1: f64,
    /// `sum e^{-t_k / 2tau}`
    e2: f64,
}

impl GridSums {
    fn over(k0: i64, k1: i64, dt: f64, tau: f64) -> Self {
        if k1 < k0 {
            return GridSums::default();
        }
        let n = (k1 - k0 + 1) as f64;
        let geometric = |scale: f64| {
            if !scale.is_finite() {
                return 0.0;
            }
            let c = dt / scale;
            (-c * k0 as f64).exp() * (-c * n).exp_m1() / (-c).exp_m1()
        };
        GridSums {
            count: n,
            sum_t: dt * (k0 + k1) as f64 * n / 2.0,
            e1: geometric(tau),
            e2: geometric(2.0 * tau),
        }
    }

    fn add(&mut self, o: &GridSums) {
        self.count += o.count;
        self.sum_t += o.sum_t;
        self.e1 += o.e1;
        self.e2 += o.e2;
    }
}

/// Integral form of the membrane term for one neuron: the Riemann sum of
/// `(v(t_k) - v_hat) / (V_th - v_hat)` times `dt` over grid points
/// `t_k = k dt` in `[0, min(t_i, T)]` where `v(t_k) > v_hat`. Evaluated per
/// inter-arrival segment in closed form; the indicator is frozen when
/// differentiating.
pub(crate) fn integral_neuron(
    model: &NeuronModel,
    n: &NeuronRef,
    window: f64,
    v_hat: f64,
    dt: f64,
    emit: Emit,
) -> f64 {
    let Some(t_i) = n.firing.time else {
        return 0.0;
    };
    let t_end = t_i.min(window);
    let k_last = (t_end / dt).floor() as i64;
    let tau = model.tau;
    let causal: Vec<(usize, usize, f64, f64)> = n.causal().collect();

    // Group boundaries (equal arrival times enter together).
    let mut groups: Vec<(usize, usize)> = Vec::new();
    let mut start = 0;
    while start < causal.len() {
        let mut end = start + 1;
        while end < causal.len() && causal[end].3 == causal[start].3 {
            end += 1;
        }
        groups.push((start, end));
        start = end;
    }

    let mut state = SegmentState::default();
    let mut segments = Vec::with_capacity(groups.len());
    let mut total = 0.0;
    for (g, &(lo_idx, hi_idx)) in groups.iter().enumerate() {
        for &(_, _, w, t_j) in &causal[lo_idx..hi_idx] {
            state.sum_w += w;
            state.sum_wt += w * t_j;
            match model.variant {
                NeuronVariant::NonLeaky => {}
                NeuronVariant::CurrentSynapse => state.a += w * (t_j / tau).exp(),
                NeuronVariant::AlphaSynapse => {
                    let e = (t_j / (2.0 * tau)).exp();
                    state.b += w * e;
                    state.a += w * e * e;
                }
            }
        }
        let seg_lo = causal[lo_idx].3;
        let mut k0 = (seg_lo / dt).ceil() as i64;
        let mut k1 = match groups.get(g + 1) {
            Some(&(next, _)) => ((causal[next].3 / dt).ceil() as i64 - 1).min(k_last),
            None => k_last,
        };
        let sums = match active_interval(model, &state, v_hat) {
            Some((l, r)) => {
                if l.is_finite() {
                    k0 = k0.max((l / dt).floor() as i64 + 1);
                }
                if r.is_finite() {
                    k1 = k1.min((r / dt).ceil() as i64 - 1);
                }
                GridSums::over(k0.max(0), k1, dt, tau)
            }
            None => GridSums::default(),
        };
        total += match model.variant {
            NeuronVariant::NonLeaky => state.sum_w * sums.sum_t - state.sum_wt * sums.count,
            NeuronVariant::CurrentSynapse => tau * (state.sum_w * sums.count - state.a * sums.e1),
            NeuronVariant::AlphaSynapse => 2.0 * tau * (state.b * sums.e2 - state.a * sums.e1),
        } - v_hat * sums.count;
        segments.push(sums);
    }

    let scale = dt / (model.v_threshold - v_hat);
    let mut suffix = GridSums::default();
    for (g, &(lo_idx, hi_idx)) in groups.iter().enumerate().rev() {
        suffix.add(&segments[g]);
        if suffix.count == 0.0 {
            continue;
        }
        for &(slot, input, w, t_j) in &causal[lo_idx..hi_idx] {
            let (dw, dt_j) = match model.variant {
                NeuronVariant::NonLeaky => (suffix.sum_t - t_j * suffix.count, -w * suffix.count),
                NeuronVariant::CurrentSynapse => {
                    let x = (t_j / tau).exp() * suffix.e1;
                    (tau * (suffix.count - x), -w * x)
                }
                NeuronVariant::AlphaSynapse => {
                    let x2 = (t_j / (2.0 * tau)).exp() * suffix.e2;
                    let x1 = (t_j / tau).exp() * suffix.e1;
                    (2.0 * tau * (x2 - x1), w * (x2 - 2.0 * x1))
                }
            };
            emit(slot, input, scale * dw, scale * dt_j);
        }
    }
    scale * total
}

/// Values per hidden spiking layer plus unscaled gradient contributions.
#[derive(Clone, Debug, PartialEq)]
pub struct RegularizerOutput {
    /// One entry per hidden spiking layer, in network order.
    pub layer_values: Vec<f64>,
    pub weight_grads: GradientSet,
    /// `time_grads[l]` is the gradient w.r.t. the spikes entering layer `l`
    /// (empty when no contribution).
    pub time_grads: Vec<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Term {
    Membrane,
    Firing,
    Promotion,
}

/// Evaluates `term` on each hidden spiking layer, adding `scales[k]` times its
/// gradient into `grads` and `seeds`. Returns the unscaled layer values.
fn accumulate(
    net: &Network,
    trace: &ForwardTrace,
    cfg: &CostConfig,
    term: Term,
    scales: &[f64],
    grads: Option<&mut GradientSet>,
    seeds: &mut [Vec<f64>],
) -> Vec<f64> {
    let model = &net.spec.model;
    let window = cfg.window();
    let hidden = net.spec.hidden_spiking_layers();
    let mut values = Vec::with_capacity(hidden.len());
    let mut grads = grads;
    for (k, &l) in hidden.iter().enumerate() {
        let scale = scales.get(k).copied().unwrap_or(0.0);
        let want_grad = grads.is_some() && scale != 0.0;
        let mut gw = grads.as_deref_mut().map(|g| &mut g.layers[l]);
        let seed = &mut seeds[l];
        if want_grad && term == Term::Membrane && l > 0 && seed.is_empty() {
            *seed = vec![0.0; net.spec.layers[l].input_len()];
        }
        let mut value = 0.0;
        for_each_neuron(&net.spec.layers[l], &net.weights[l], &trace.layers[l], |n| {
            let mut emit = |slot: usize, input: usize, dw: f64, dt: f64| {
                if !want_grad {
                    return;
                }
                if let Some(g) = gw.as_deref_mut() {
                    g[n.row_offset + slot] += scale * dw;
                }
                if dt != 0.0 && !seed.is_empty() {
                    seed[input] += scale * dt;
                }
            };
            value += match term {
                Term::Membrane => match cfg.membrane {
                    MembraneForm::Limit => m_ssr_neuron(model, &n, window, &mut emit),
                    MembraneForm::Integral => integral_neuron(
                        model,
                        &n,
                        window,
                        cfg.v_hat,
                        cfg.dt_integral(),
                        &mut emit,
                    ),
                },
                Term::Firing => f_ssr_neuron(&n, window, &mut emit),
                Term::Promotion => promotion_neuron(&n, &mut emit),
            };
        });
        values.push(value);
    }
    values
}

fn standalone(net: &Network, trace: &ForwardTrace, cfg: &CostConfig, term: Term) -> RegularizerOutput {
    let hidden = net.spec.hidden_spiking_layers().len();
    let mut grads = GradientSet::zeros_like(net);
    let mut seeds = vec![Vec::new(); net.spec.layers.len()];
    let layer_values = accumulate(net, trace, cfg, term, &vec![1.0; hidden], Some(&mut grads), &mut seeds);
    RegularizerOutput {
        layer_values,
        weight_grads: grads,
        time_grads: seeds,
    }
}

/// Limit-form membrane term per hidden layer.
pub fn m_ssr(net: &Network, trace: &ForwardTrace, cfg: &CostConfig) -> RegularizerOutput {
    standalone(net, trace, &CostConfig { membrane: MembraneForm::Limit, ..*cfg }, Term::Membrane)
}

/// Causal weight sums of hidden neurons firing inside the window. Weight
/// gradients only.
pub fn f_ssr(net: &Network, trace: &ForwardTrace, cfg: &CostConfig) -> RegularizerOutput {
    standalone(net, trace, cfg, Term::Firing)
}

pub fn integral_membrane_loss(net: &Network, trace: &ForwardTrace, cfg: &CostConfig) -> RegularizerOutput {
    standalone(net, trace, &CostConfig { membrane: MembraneForm::Integral, ..*cfg }, Term::Membrane)
}

pub fn firing_promotion(net: &Network, trace: &ForwardTrace, cfg: &CostConfig) -> RegularizerOutput {
    standalone(net, trace, cfg, Term::Promotion)
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct LossReport {
    pub l: f64,
    pub t_penalty: f64,
    /// `sum_l xi^l V^(l)`
    pub v: f64,
    /// `sum_l xi^l Q^(l)` (the promotion term when promotion is on)
    pub q: f64,
    pub c: f64,
    pub layer_v: Vec<f64>,
    pub layer_q: Vec<f64>,
}

/// Output times with silent neurons replaced by `t_max`, plus a fired mask.
pub fn output_times_with_surrogate(trace: &ForwardTrace, t_max: f64) -> (Vec<f64>, Vec<bool>) {
    trace
        .output_times()
        .iter()
        .map(|t| (t.unwrap_or(t_max), t.is_some()))
        .unzip()
}

/// Index of the earliest output spike; silent outputs count as `t_max` and
/// ties go to the lowest index.
pub fn predict(trace: &ForwardTrace, t_max: f64) -> usize {
    let (times, _) = output_times_with_surrogate(trace, t_max);
    let mut best = 0;
    for (i, &t) in times.iter().enumerate() {
        if t < times[best] {
            best = i;
        }
    }
    best
}

/// `C = L + gamma1 T + gamma2 V + gamma3 Q`. When `grads` is given, the full
/// gradient of `C` is added into it.
pub fn total_cost(
    net: &Network,
    trace: &ForwardTrace,
    label: usize,
    cfg: &CostConfig,
    grads: Option<&mut GradientSet>,
) -> Result<LossReport> {
    let (times, fired) = output_times_with_surrogate(trace, cfg.t_max());
    let (l, dl) = cfg.timing_loss.eval(&times, label, cfg.tau_soft)?;
    let (t_penalty, dt) = temporal_penalty(&times, cfg.t_ref);

    let hidden = net.spec.hidden_spiking_layers().len();
    let xi_pow: Vec<f64> = (1..=hidden).map(|k| cfg.xi.powi(k as i32)).collect();
    let v_scales: Vec<f64> = xi_pow.iter().map(|x| cfg.gamma2 * x).collect();
    let q_scales: Vec<f64> = xi_pow.iter().map(|x| cfg.gamma3 * x).collect();
    let q_term = if cfg.promotion { Term::Promotion } else { Term::Firing };

    let mut seeds = vec![Vec::new(); net.spec.layers.len()];
    let mut grads = grads;
    let layer_v = accumulate(net, trace, cfg, Term::Membrane, &v_scales, grads.as_deref_mut(), &mut seeds);
    let layer_q = accumulate(net, trace, cfg, q_term, &q_scales, grads.as_deref_mut(), &mut seeds);
    let weighted = |vals: &[f64]| vals.iter().zip(&xi_pow).map(|(v, x)| v * x).sum::<f64>();
    let v = weighted(&layer_v);
    let q = weighted(&layer_q);

    if let Some(g) = grads {
        let out_grad: Vec<f64> = dl
            .iter()
            .zip(&dt)
            .zip(&fired)
            .map(|((a, b), &f)| if f { a + cfg.gamma1 * b } else { 0.0 })
            .collect();
        network_backward(net, trace, &out_grad, &seeds, g)?;
    }
    Ok(LossReport {
        l,
        t_penalty,
        v,
        q,
        c: l + cfg.gamma1 * t_penalty + cfg.gamma2 * v + cfg.gamma3 * q,
        layer_v,
        layer_q,
    })
}

/// Gradient of `gamma2 * V` alone (no timing loss), for comparing membrane
/// forms. Returns the weighted value.
pub fn membrane_term_gradient(
    net: &Network,
    trace: &ForwardTrace,
    cfg: &CostConfig,
    grads: &mut GradientSet,
) -> Result<f64> {
    let hidden = net.spec.hidden_spiking_layers().len();
    let scales: Vec<f64> = (1..=hidden).map(|k| cfg.gamma2 * cfg.xi.powi(k as i32)).collect();
    let mut seeds = vec![Vec::new(); net.spec.layers.len()];
    let values = accumulate(net, trace, cfg, Term::Membrane, &scales, Some(grads), &mut seeds);
    let zero = vec![0.0; net.spec.output_len()];
    network_backward(net, trace, &zero, &seeds, grads)?;
    Ok(values.iter().zip(&scales).map(|(v, s)| v * s).sum())
}
