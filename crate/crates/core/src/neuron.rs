//! Single-neuron dynamics: the analytic membrane potential, the event-driven
//! firing-time solver, and a time-stepped reference integrator.
//!
//! Three synapse/membrane combinations are supported, identified by the pair
//! of time constants `(tau_v, tau_i)`:
//!
//! | variant            | `(tau_v, tau_i)` | kernel `k(s)`                          |
//! |--------------------|------------------|----------------------------------------|
//! | [`NonLeaky`]       | `(inf, inf)`     | `s`                                    |
//! | [`CurrentSynapse`] | `(inf, tau)`     | `tau (1 - exp(-s/tau))`                |
//! | [`AlphaSynapse`]   | `(2 tau, tau)`   | `2 tau (exp(-s/2tau) - exp(-s/tau))`   |
//!
//! A neuron receiving spikes `t_j` through weights `w_j` has the free
//! trajectory `v(t) = sum_j w_j k(t - t_j)` and fires once, at the first time
//! `v` reaches the threshold.
//!
//! [`NonLeaky`]: NeuronVariant::NonLeaky
//! [`CurrentSynapse`]: NeuronVariant::CurrentSynapse
//! [`AlphaSynapse`]: NeuronVariant::AlphaSynapse

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NeuronVariant {
    NonLeaky,
    CurrentSynapse,
    AlphaSynapse,
}

impl NeuronVariant {
    pub const ALL: [NeuronVariant; 3] = [
        NeuronVariant::NonLeaky,
        NeuronVariant::CurrentSynapse,
        NeuronVariant::AlphaSynapse,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NeuronVariant::NonLeaky => "non-leaky",
            NeuronVariant::CurrentSynapse => "current-synapse",
            NeuronVariant::AlphaSynapse => "alpha-synapse",
        }
    }
}

impl std::str::FromStr for NeuronVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        NeuronVariant::ALL
            .into_iter()
            .find(|v| v.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown neuron variant `{s}`")))
    }
}

/// Neuron dynamics shared by every spiking layer of a network.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NeuronModel {
    pub variant: NeuronVariant,
    /// Synaptic time constant; ignored by [`NeuronVariant::NonLeaky`].
    pub tau: f64,
    pub v_threshold: f64,
}

impl NeuronModel {
    pub fn new(variant: NeuronVariant, tau: f64, v_threshold: f64) -> Result<Self> {
        if !(v_threshold > 0.0 && v_threshold.is_finite()) {
            return Err(Error::contract(format!(
                "threshold must be positive and finite, got {v_threshold}"
            )));
        }
        if variant != NeuronVariant::NonLeaky && !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::contract(format!(
                "tau must be positive and finite for {}, got {tau}",
                variant.name()
            )));
        }
        Ok(NeuronModel {
            variant,
            tau,
            v_threshold,
        })
    }

    pub fn non_leaky(v_threshold: f64) -> Self {
        NeuronModel {
            variant: NeuronVariant::NonLeaky,
            tau: f64::INFINITY,
            v_threshold,
        }
    }

    pub fn current_synapse(tau: f64, v_threshold: f64) -> Self {
        NeuronModel {
            variant: NeuronVariant::CurrentSynapse,
            tau,
            v_threshold,
        }
    }

    pub fn alpha_synapse(tau: f64, v_threshold: f64) -> Self {
        NeuronModel {
            variant: NeuronVariant::AlphaSynapse,
            tau,
            v_threshold,
        }
    }

    /// `(tau_v, tau_i)`; `f64::INFINITY` stands for an absent leak.
    pub fn time_constants(&self) -> (f64, f64) {
        match self.variant {
            NeuronVariant::NonLeaky => (f64::INFINITY, f64::INFINITY),
            NeuronVariant::CurrentSynapse => (f64::INFINITY, self.tau),
            NeuronVariant::AlphaSynapse => (2.0 * self.tau, self.tau),
        }
    }

    /// Postsynaptic potential kernel for a unit weight, `s` time units after
    /// the presynaptic spike. Zero for `s < 0`.
    #[inline]
    pub fn kernel(&self, s: f64) -> f64 {
        if s < 0.0 {
            return 0.0;
        }
        let tau = self.tau;
        match self.variant {
            NeuronVariant::NonLeaky => s,
            NeuronVariant::CurrentSynapse => -tau * (-s / tau).exp_m1(),
            NeuronVariant::AlphaSynapse => 2.0 * tau * ((-s / (2.0 * tau)).exp() - (-s / tau).exp()),
        }
    }

    /// `d kernel / ds`, zero for `s < 0`.
    #[inline]
    pub fn kernel_slope(&self, s: f64) -> f64 {
        if s < 0.0 {
            return 0.0;
        }
        let tau = self.tau;
        match self.variant {
            NeuronVariant::NonLeaky => 1.0,
            NeuronVariant::CurrentSynapse => (-s / tau).exp(),
            NeuronVariant::AlphaSynapse => 2.0 * (-s / tau).exp() - (-s / (2.0 * tau)).exp(),
        }
    }
}

/// Per-neuron first spike times. `None` means the neuron never fired.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SpikeVector {
    times: Vec<Option<f64>>,
}

impl SpikeVector {
    pub fn new(times: Vec<Option<f64>>) -> Result<Self> {
        if let Some((i, t)) = times
            .iter()
            .enumerate()
            .find_map(|(i, t)| t.filter(|t| !(t.is_finite() && *t >= 0.0)).map(|t| (i, t)))
        {
            return Err(Error::contract(format!(
                "spike time at index {i} must be finite and nonnegative, got {t}"
            )));
        }
        Ok(SpikeVector { times })
    }

    /// Every neuron fired, at the given times.
    pub fn from_times(times: &[f64]) -> Result<Self> {
        SpikeVector::new(times.iter().copied().map(Some).collect())
    }

    /// `n` neurons, none of which fired.
    pub fn silent(n: usize) -> Self {
        SpikeVector {
            times: vec![None; n],
        }
    }

    pub(crate) fn from_vec_unchecked(times: Vec<Option<f64>>) -> Self {
        debug_assert!(times.iter().flatten().all(|t| t.is_finite() && *t >= 0.0));
        SpikeVector { times }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    #[inline]
    pub fn get(&self, i: usize) -> Option<f64> {
        self.times[i]
    }

    pub fn as_slice(&self) -> &[Option<f64>] {
        &self.times
    }

    pub fn iter(&self) -> impl Iterator<Item = Option<f64>> + '_ {
        self.times.iter().copied()
    }

    pub fn fired_count(&self) -> usize {
        self.times.iter().filter(|t| t.is_some()).count()
    }

    /// Drops the spike at `i`.
    pub fn remove_spike(&mut self, i: usize) {
        self.times[i] = None;
    }

    pub fn into_inner(self) -> Vec<Option<f64>> {
        self.times
    }
}

/// One entry of a [`SpikeSchedule`]: a presynaptic spike and the weight slot
/// it is delivered through.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScheduledSpike {
    pub slot: usize,
    pub time: f64,
}

/// Present input spikes sorted by arrival (ties by slot), dropping any that
/// arrive after the horizon. Shared by every neuron that sees the same inputs.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SpikeSchedule {
    entries: Vec<ScheduledSpike>,
}

impl SpikeSchedule {
    pub fn from_spikes(inputs: &SpikeVector, horizon: f64) -> Self {
        Self::from_slots(
            inputs
                .iter()
                .enumerate()
                .filter_map(|(slot, t)| t.map(|time| ScheduledSpike { slot, time })),
            horizon,
        )
    }

    pub fn from_slots(spikes: impl IntoIterator<Item = ScheduledSpike>, horizon: f64) -> Self {
        let mut entries: Vec<ScheduledSpike> =
            spikes.into_iter().filter(|s| s.time <= horizon).collect();
        entries.sort_unstable_by(|x, y| match x.time.total_cmp(&y.time) {
            Ordering::Equal => x.slot.cmp(&y.slot),
            o => o,
        });
        SpikeSchedule { entries }
    }

    pub fn entries(&self) -> &[ScheduledSpike] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

/// Compact result of solving one neuron against a [`SpikeSchedule`]: the
/// causal set is the first `causal_len` schedule entries.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Firing {
    pub time: Option<f64>,
    pub causal_len: usize,
    pub sum_w: f64,
    pub sum_wt: f64,
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
}

impl Firing {
    #[inline]
    pub fn fired(&self) -> bool {
        self.time.is_some()
    }
}

/// Firing time of one neuron together with its causal set and the sums over
/// that set that the gradients and regularizers reuse.
///
/// `sum_w`/`sum_wt` are filled for the non-leaky model, `sum_w`/`a` for the
/// current-synapse model and `a`/`b`/`alpha` for the alpha-synapse model; the
/// rest stay zero.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FiringSolution {
    pub time: Option<f64>,
    /// Input indices that arrived no later than the firing time. For a silent
    /// neuron: every input that arrived before the horizon.
    pub causal_set: Vec<usize>,
    pub sum_w: f64,
    pub sum_wt: f64,
    pub a: f64,
    pub b: f64,
    pub alpha: f64,
}

impl FiringSolution {
    pub fn fired(&self) -> bool {
        self.time.is_some()
    }

    pub fn from_firing(firing: &Firing, schedule: &SpikeSchedule) -> Self {
        FiringSolution {
            time: firing.time,
            causal_set: schedule.entries()[..firing.causal_len]
                .iter()
                .map(|s| s.slot)
                .collect(),
            sum_w: firing.sum_w,
            sum_wt: firing.sum_wt,
            a: firing.a,
            b: firing.b,
            alpha: firing.alpha,
        }
    }
}

#[derive(Default)]
struct CausalSums {
    sum_w: f64,
    sum_wt: f64,
    a: f64,
    b: f64,
}

impl CausalSums {
    #[inline]
    fn add(&mut self, model: &NeuronModel, w: f64, t: f64) {
        match model.variant {
            NeuronVariant::NonLeaky => {
                self.sum_w += w;
                self.sum_wt += w * t;
            }
            NeuronVariant::CurrentSynapse => {
                self.sum_w += w;
                self.a += w * (t / model.tau).exp();
            }
            NeuronVariant::AlphaSynapse => {
                let e = (t / (2.0 * model.tau)).exp();
                self.b += w * e;
                self.a += w * e * e;
            }
        }
    }

    /// Threshold crossing assuming the current causal set stays fixed, and the
    /// `alpha` factor for the alpha-synapse model.
    #[inline]
    fn candidate(&self, model: &NeuronModel) -> Option<(f64, f64)> {
        let v_th = model.v_threshold;
        match model.variant {
            NeuronVariant::NonLeaky => {
                (self.sum_w > 0.0).then(|| ((v_th + self.sum_wt) / self.sum_w, 0.0))
            }
            NeuronVariant::CurrentSynapse => {
                let excess = self.sum_w - v_th / model.tau;
                (excess > 0.0 && self.a > 0.0)
                    .then(|| (model.tau * (self.a.ln() - excess.ln()), 0.0))
            }
            NeuronVariant::AlphaSynapse => {
                if self.a <= 0.0 {
                    return None;
                }
                let disc = self.b * self.b - 2.0 * self.a * v_th / model.tau;
                if disc < 0.0 {
                    return None;
                }
                let root = disc.sqrt();
                let upper = self.b + root;
                if upper <= 0.0 {
                    return None;
                }
                let u = upper / (2.0 * self.a);
                let alpha = 2.0 * self.a / (upper * root);
                Some((-2.0 * model.tau * u.ln(), alpha))
            }
        }
    }
}

/// Event-driven sweep over a sorted schedule. `weights[slot]` is the weight
/// of each scheduled spike.
pub fn solve_schedule(
    model: &NeuronModel,
    weights: &[f64],
    schedule: &SpikeSchedule,
    horizon: f64,
) -> Firing {
    let entries = schedule.entries();
    let mut sums = CausalSums::default();
    let mut i = 0;
    while i < entries.len() {
        let group_time = entries[i].time;
        let mut end = i;
        while end < entries.len() && entries[end].time == group_time {
            let spike = entries[end];
            sums.add(model, weights[spike.slot], spike.time);
            end += 1;
        }
        let next_arrival = entries.get(end).map_or(horizon, |s| s.time.min(horizon));
        if let Some((t, alpha)) = sums.candidate(model) {
            if t >= group_time && t <= next_arrival {
                return Firing {
                    time: Some(t),
                    causal_len: end,
                    sum_w: sums.sum_w,
                    sum_wt: sums.sum_wt,
                    a: sums.a,
                    b: sums.b,
                    alpha,
                };
            }
        }
        i = end;
    }
    Firing {
        time: None,
        causal_len: entries.len(),
        sum_w: sums.sum_w,
        sum_wt: sums.sum_wt,
        a: sums.a,
        b: sums.b,
        alpha: 0.0,
    }
}

fn check_lengths(weights: &[f64], inputs: &SpikeVector) -> Result<()> {
    if weights.len() != inputs.len() {
        return Err(Error::contract(format!(
            "{} weights for {} inputs",
            weights.len(),
            inputs.len()
        )));
    }
    Ok(())
}

/// Free membrane trajectory at time `t`; the post-firing reset is ignored.
pub fn membrane_potential_at(
    model: &NeuronModel,
    weights: &[f64],
    inputs: &SpikeVector,
    t: f64,
) -> Result<f64> {
    check_lengths(weights, inputs)?;
    if !t.is_finite() {
        return Err(Error::contract(format!("evaluation time must be finite, got {t}")));
    }
    Ok(weights
        .iter()
        .zip(inputs.iter())
        .filter_map(|(w, tj)| tj.filter(|tj| *tj <= t).map(|tj| w * model.kernel(t - tj)))
        .sum())
}

/// First threshold crossing of one neuron, searching up to `horizon`.
pub fn solve_firing_time(
    model: &NeuronModel,
    weights: &[f64],
    inputs: &SpikeVector,
    horizon: f64,
) -> Result<FiringSolution> {
    check_lengths(weights, inputs)?;
    if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
        return Err(Error::contract(format!("non-finite weight {w}")));
    }
    if !(horizon > 0.0) {
        return Err(Error::contract(format!("horizon must be positive, got {horizon}")));
    }
    let schedule = SpikeSchedule::from_spikes(inputs, horizon);
    let firing = solve_schedule(model, weights, &schedule, horizon);
    Ok(FiringSolution::from_firing(&firing, &schedule))
}

/// Sampled membrane potential from [`ode_oracle_simulate`].
#[derive(Clone, Debug, PartialEq)]
pub struct MembraneTrace {
    pub dt: f64,
    pub sample_times: Vec<f64>,
    pub values: Vec<f64>,
}

/// Forward-Euler integration of the two-variable neuron ODE. Spikes add their
/// weight to the synaptic current at their exact arrival time (the step is
/// split there). Reports the first crossing by linear interpolation.
///
/// Only meant as a reference for the closed forms.
pub fn ode_oracle_simulate(
    model: &NeuronModel,
    weights: &[f64],
    inputs: &SpikeVector,
    dt: f64,
    horizon: f64,
) -> Result<(MembraneTrace, Option<f64>)> {
    let mut trace = MembraneTrace {
        dt,
        sample_times: vec![0.0],
        values: vec![0.0],
    };
    let crossing = euler_integrate(model, weights, inputs, dt, horizon, |t, v| {
        trace.sample_times.push(t);
        trace.values.push(v);
    })?;
    Ok((trace, crossing))
}

/// [`ode_oracle_simulate`] without storing the trace.
pub fn ode_oracle_firing_time(
    model: &NeuronModel,
    weights: &[f64],
    inputs: &SpikeVector,
    dt: f64,
    horizon: f64,
) -> Result<Option<f64>> {
    euler_integrate(model, weights, inputs, dt, horizon, |_, _| {})
}

fn euler_integrate(
    model: &NeuronModel,
    weights: &[f64],
    inputs: &SpikeVector,
    dt: f64,
    horizon: f64,
    mut record: impl FnMut(f64, f64),
) -> Result<Option<f64>> {
    check_lengths(weights, inputs)?;
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::contract(format!("dt must be positive, got {dt}")));
    }
    let (tau_v, tau_i) = model.time_constants();
    let (leak_v, leak_i) = (1.0 / tau_v, 1.0 / tau_i);
    let v_th = model.v_threshold;
    let schedule = SpikeSchedule::from_spikes(inputs, horizon);
    let pending = schedule.entries();
    let mut next = 0;

    let (mut v, mut current) = (0.0f64, 0.0f64);
    let (mut last_t, mut last_v) = (0.0f64, 0.0f64);
    let mut crossing = None;
    let steps = (horizon / dt).ceil() as usize;

    let advance = |v: &mut f64, current: &mut f64, h: f64| {
        let dv = -*v * leak_v + *current;
        *current -= h * *current * leak_i;
        *v += h * dv;
    };

    for step in 1..=steps {
        let t_end = step as f64 * dt;
        let mut t = t_end - dt;
        while next < pending.len() && pending[next].time < t_end {
            let arrival = pending[next].time.max(t);
            advance(&mut v, &mut current, arrival - t);
            t = arrival;
            current += weights[pending[next].slot];
            next += 1;
        }
        advance(&mut v, &mut current, t_end - t);
        if crossing.is_none() && v >= v_th {
            let frac = (v_th - last_v) / (v - last_v);
            crossing = Some(last_t + frac * (t_end - last_t));
        }
        record(t_end, v);
        if crossing.is_some() {
            break;
        }
        last_t = t_end;
        last_v = v;
    }
    Ok(crossing)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn spikes(times: &[f64]) -> SpikeVector {
        SpikeVector::from_times(times).unwrap()
    }

    /// Dense-grid threshold search on the analytic trajectory.
    fn grid_first_crossing(
        model: &NeuronModel,
        weights: &[f64],
        inputs: &SpikeVector,
        horizon: f64,
        step: f64,
    ) -> Option<f64> {
        let n = (horizon / step) as usize;
        (0..=n)
            .map(|k| k as f64 * step)
            .find(|&t| membrane_potential_at(model, weights, inputs, t).unwrap() >= model.v_threshold)
    }

    #[test]
    fn non_leaky_ramp() {
        let m = NeuronModel::non_leaky(1.0);
        let v = membrane_potential_at(&m, &[2.0], &spikes(&[0.0]), 0.25).unwrap();
        assert_relative_eq!(v, 0.5);
    }

    #[test]
    fn potential_is_zero_at_origin() {
        for m in [
            NeuronModel::non_leaky(1.0),
            NeuronModel::current_synapse(1.0, 1.0),
            NeuronModel::alpha_synapse(1.0, 1.0),
        ] {
            let v = membrane_potential_at(&m, &[1.0, -2.0], &spikes(&[0.0, 0.3]), 0.0).unwrap();
            assert_eq!(v, 0.0);
        }
    }

    #[test]
    fn alpha_potential_hits_threshold_at_quadratic_root() {
        let m = NeuronModel::alpha_synapse(1.0, 1.0);
        let u: f64 = (3.0 + 3f64.sqrt()) / 6.0;
        // 2 tau w (u - u^2) = 1 at the larger root
        assert_relative_eq!(6.0 * (u - u * u), 1.0, epsilon = 1e-12);
        let t = -2.0 * u.ln();
        let v = membrane_potential_at(&m, &[3.0], &spikes(&[0.0]), t).unwrap();
        assert_relative_eq!(v, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let m = NeuronModel::non_leaky(1.0);
        assert!(matches!(
            membrane_potential_at(&m, &[1.0], &spikes(&[0.0, 1.0]), 1.0),
            Err(Error::Contract(_))
        ));
        assert!(solve_firing_time(&m, &[1.0, 2.0], &spikes(&[0.0]), 1.0).is_err());
    }

    #[test]
    fn non_leaky_single_spike() {
        let m = NeuronModel::non_leaky(1.0);
        let s = solve_firing_time(&m, &[2.0], &spikes(&[0.0]), 16.0).unwrap();
        assert_relative_eq!(s.time.unwrap(), 0.5);
        assert_eq!(s.causal_set, vec![0]);
    }

    #[test]
    fn non_leaky_rejects_candidate_past_next_arrival() {
        let m = NeuronModel::non_leaky(1.0);
        let (w, x) = ([2.0, -0.5], spikes(&[0.0, 0.2]));
        let oracle = grid_first_crossing(&m, &w, &x, 2.0, 1e-6).unwrap();
        assert_relative_eq!(oracle, 0.6, epsilon = 2e-6);
        let s = solve_firing_time(&m, &w, &x, 16.0).unwrap();
        assert_relative_eq!(s.time.unwrap(), 0.6, epsilon = 1e-12);
        assert_eq!(s.causal_set, vec![0, 1]);
        assert_relative_eq!(s.sum_w, 1.5);
    }

    #[test]
    fn current_synapse_below_firing_condition_stays_silent() {
        let m = NeuronModel::current_synapse(1.0, 1.0);
        let s = solve_firing_time(&m, &[0.5], &spikes(&[0.0]), 16.0).unwrap();
        assert!(!s.fired());
        assert_eq!(s.causal_set, vec![0]);
    }

    #[test]
    fn alpha_single_spike_matches_oracle() {
        let m = NeuronModel::alpha_synapse(1.0, 1.0);
        let x = spikes(&[0.0]);
        let s = solve_firing_time(&m, &[3.0], &x, 16.0).unwrap();
        let expected = -2.0 * ((3.0 + 3f64.sqrt()) / 6.0).ln();
        assert_relative_eq!(s.time.unwrap(), expected, epsilon = 1e-12);
        assert!((expected - 0.474794).abs() < 1e-3);
        let ode = ode_oracle_firing_time(&m, &[3.0], &x, 1e-5, 4.0).unwrap().unwrap();
        assert!((ode - expected).abs() < 1e-3);
        assert!(s.b * s.b - 2.0 * s.a >= 0.0 && s.alpha > 0.0);
    }

    #[test]
    fn empty_input_never_fires() {
        for variant in NeuronVariant::ALL {
            let m = NeuronModel::new(variant, 1.0, 1.0).unwrap();
            let s = solve_firing_time(&m, &[], &SpikeVector::silent(0), 10.0).unwrap();
            assert!(!s.fired());
        }
    }

    #[test]
    fn non_finite_weight_is_rejected() {
        let m = NeuronModel::non_leaky(1.0);
        assert!(solve_firing_time(&m, &[f64::NAN], &spikes(&[0.0]), 1.0).is_err());
    }

    #[test]
    fn simultaneous_spikes_enter_together() {
        // Alone, the first spike would fire at 0.5 < 1.0; the simultaneous
        // inhibitory spike must be included before the candidate is formed.
        let m = NeuronModel::non_leaky(1.0);
        let s = solve_firing_time(&m, &[2.0, -1.5], &spikes(&[0.0, 0.0]), 16.0).unwrap();
        assert_relative_eq!(s.time.unwrap(), 2.0);
        assert_eq!(s.causal_set, vec![0, 1]);
    }

    #[test]
    fn boundary_tie_counts_as_firing_and_excludes_tied_group() {
        let m = NeuronModel::non_leaky(1.0);
        let s = solve_firing_time(&m, &[2.0, -5.0], &spikes(&[0.0, 0.5]), 16.0).unwrap();
        assert_eq!(s.time, Some(0.5));
        assert_eq!(s.causal_set, vec![0]);
    }

    #[test]
    fn late_spikes_beyond_horizon_never_arrive() {
        let m = NeuronModel::non_leaky(1.0);
        let s = solve_firing_time(&m, &[1.0], &spikes(&[5.0]), 4.0).unwrap();
        assert!(!s.fired());
        assert!(s.causal_set.is_empty());
    }

    #[test]
    fn oracle_non_leaky_and_current() {
        let m = NeuronModel::non_leaky(1.0);
        let t = ode_oracle_firing_time(&m, &[2.0], &spikes(&[0.0]), 1e-5, 2.0).unwrap().unwrap();
        assert!((t - 0.5).abs() < 1e-3);

        let m = NeuronModel::current_synapse(1.0, 1.0);
        let t = ode_oracle_firing_time(&m, &[2.0], &spikes(&[0.0]), 1e-5, 4.0).unwrap().unwrap();
        assert!((t - 2f64.ln()).abs() < 1e-3);
    }

    #[test]
    fn oracle_trace_of_zero_weights_is_flat() {
        let m = NeuronModel::alpha_synapse(1.0, 1.0);
        let (trace, t) =
            ode_oracle_simulate(&m, &[0.0, 0.0], &spikes(&[0.1, 0.5]), 1e-3, 2.0).unwrap();
        assert!(t.is_none());
        assert!(trace.values.iter().all(|v| *v == 0.0));
        assert_eq!(trace.sample_times[0], 0.0);
        assert_eq!(trace.values.len(), 2001);
        assert!(ode_oracle_simulate(&m, &[0.0], &spikes(&[0.0]), 0.0, 1.0).is_err());
    }

    #[test]
    fn kernel_slope_matches_finite_difference() {
        for variant in NeuronVariant::ALL {
            let m = NeuronModel::new(variant, 1.3, 1.0).unwrap();
            for s in [0.1, 0.7, 2.5] {
                let h = 1e-6;
                let fd = (m.kernel(s + h) - m.kernel(s - h)) / (2.0 * h);
                assert_relative_eq!(m.kernel_slope(s), fd, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(NeuronModel::new(NeuronVariant::AlphaSynapse, 0.0, 1.0).is_err());
        assert!(NeuronModel::new(NeuronVariant::NonLeaky, f64::INFINITY, 0.0).is_err());
        assert!(NeuronModel::new(NeuronVariant::NonLeaky, f64::INFINITY, 1.0).is_ok());
        assert!(SpikeVector::new(vec![Some(-1.0)]).is_err());
        assert!(SpikeVector::new(vec![Some(f64::INFINITY)]).is_err());
    }
}
