//! The reflex arc: sensory population → interneuron → motor neuron, plus
//! latency-based decoding of reflex strength from motor spike pairs.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Layer, Result};
use crate::neuron::{IzhikevichParams, IzhikevichState, LifParams, LifState};
use crate::sensory::{SensoryConfig, SensoryPopulation};

/// Base of the exponential reflex-strength law.
pub const BETA: f64 = 1.268;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ArcConfig {
    /// Decay constant of the interneuron synaptic current (ms)
    pub tau_i_ms: f64,
    /// Descending-control gain; 1 is the normal state
    pub epsilon: f64,
    /// Upper bound on sensory→interneuron weights
    pub s_max: f64,
    /// Motor depolarisation per interneuron spike (mV)
    pub motor_jump_mv: f64,
    pub interneuron: IzhikevichParams,
    pub motor: LifParams,
}

impl Default for ArcConfig {
    fn default() -> Self {
        Self {
            tau_i_ms: 150.0,
            epsilon: 1.0,
            s_max: 1.0,
            motor_jump_mv: 30.0,
            interneuron: IzhikevichParams::INTRINSICALLY_BURSTING,
            motor: LifParams::default(),
        }
    }
}

/// Bursting interneuron with an exponentially decaying synaptic current.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterneuronState {
    pub izh: IzhikevichState,
    pub current: f64,
    pub tau_i_ms: f64,
    pub epsilon: f64,
}

/// Plastic sensory→interneuron weights, one per sensory neuron.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynapseSet {
    weights: Vec<f64>,
    s_max: f64,
}

impl SynapseSet {
    pub fn new(weights: Vec<f64>, s_max: f64) -> Result<Self> {
        if !(s_max > 0.0 && s_max.is_finite()) {
            return Err(Error::invalid("s_max", format!("{s_max}")));
        }
        if let Some(w) = weights.iter().find(|w| !(0.0..=s_max).contains(*w)) {
            return Err(Error::invalid("weights", format!("{w} outside [0, {s_max}]")));
        }
        Ok(Self { weights, s_max })
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn s_max(&self) -> f64 {
        self.s_max
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn get(&self, idx: usize) -> Result<f64> {
        self.weights.get(idx).copied().ok_or(Error::UnknownSynapse(idx))
    }

    /// Adds `delta` to synapse `idx`, clamping into `[0, s_max]`.
    pub fn nudge(&mut self, idx: usize, delta: f64) -> Result<()> {
        let s_max = self.s_max;
        let w = self.weights.get_mut(idx).ok_or(Error::UnknownSynapse(idx))?;
        *w = (*w + delta).clamp(0.0, s_max);
        Ok(())
    }
}

/// Maps a motor inter-spike interval onto a graded reflex strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflexDecoder {
    pub dt_min_ms: f64,
    pub k_ms: f64,
    #[serde(default = "default_beta")]
    pub beta: f64,
}

fn default_beta() -> f64 {
    BETA
}

impl ReflexDecoder {
    pub fn new(dt_min_ms: f64, k_ms: f64) -> Result<Self> {
        if !(dt_min_ms > 0.0 && dt_min_ms.is_finite()) {
            return Err(Error::invalid("dt_min_ms", format!("{dt_min_ms}")));
        }
        if !(k_ms > 0.0 && k_ms.is_finite()) {
            return Err(Error::invalid("k_ms", format!("{k_ms}")));
        }
        Ok(Self { dt_min_ms, k_ms, beta: BETA })
    }

    pub fn decode(&self, delta_t_ms: f64) -> Result<f64> {
        if delta_t_ms < self.dt_min_ms {
            return Err(Error::CalibrationViolation { delta_t_ms, dt_min_ms: self.dt_min_ms });
        }
        Ok(self.decode_saturating(delta_t_ms))
    }

    /// Like [`decode`](Self::decode) but intervals shorter than `dt_min` saturate at 1.
    pub fn decode_saturating(&self, delta_t_ms: f64) -> f64 {
        let dt = delta_t_ms.max(self.dt_min_ms);
        self.beta.powf((self.dt_min_ms - dt) / self.k_ms)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReflexEventKind {
    MotorSpike,
    ReflexStrength,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReflexEvent {
    pub t_ms: f64,
    pub kind: ReflexEventKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_t_ms: Option<f64>,
    pub source: String,
}

/// Spikes produced by one integration step.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StepOutcome {
    pub interneuron: bool,
    pub motor: bool,
    /// Motor potential after this step's jumps, before relaxation (mV)
    pub motor_peak_mv: f64,
}

pub const NETWORK_SOURCE: &str = "neuromorphic";

#[derive(Debug, Clone, PartialEq)]
pub struct ReflexNetwork {
    cfg: ArcConfig,
    sensory_i_max: f64,
    sensory: SensoryPopulation,
    inter: InterneuronState,
    motor: LifState,
    synapses: SynapseSet,
    decoder: Option<ReflexDecoder>,
    steps: u64,
    dt: f64,
    last_motor_spike_ms: Option<f64>,
}

impl ReflexNetwork {
    pub fn new(sensory: &SensoryConfig, cfg: &ArcConfig, weights: Vec<f64>, dt: f64) -> Result<Self> {
        if !(dt > 0.0 && dt <= 1.0) {
            return Err(Error::invalid("dt", format!("{dt} ms outside (0, 1]")));
        }
        if !(cfg.tau_i_ms > 0.0) {
            return Err(Error::invalid("tau_i_ms", format!("{}", cfg.tau_i_ms)));
        }
        if !(cfg.epsilon >= 0.0) {
            return Err(Error::invalid("epsilon", format!("{} must be non-negative", cfg.epsilon)));
        }
        let pop = SensoryPopulation::new(sensory)?;
        if weights.len() != pop.len() {
            return Err(Error::invalid(
                "weights",
                format!("{} weights for {} sensory neurons", weights.len(), pop.len()),
            ));
        }
        let synapses = SynapseSet::new(weights, cfg.s_max)?;
        Ok(Self {
            cfg: cfg.clone(),
            sensory_i_max: sensory.i_max,
            sensory: pop,
            inter: InterneuronState {
                izh: IzhikevichState::at_rest(cfg.interneuron),
                current: 0.0,
                tau_i_ms: cfg.tau_i_ms,
                epsilon: cfg.epsilon,
            },
            motor: LifState::at_rest(cfg.motor),
            synapses,
            decoder: None,
            steps: 0,
            dt,
            last_motor_spike_ms: None,
        })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn time_ms(&self) -> f64 {
        self.steps as f64 * self.dt
    }

    pub fn config(&self) -> &ArcConfig {
        &self.cfg
    }

    pub fn sensory(&self) -> &SensoryPopulation {
        &self.sensory
    }

    pub fn interneuron(&self) -> &InterneuronState {
        &self.inter
    }

    pub fn motor(&self) -> &LifState {
        &self.motor
    }

    pub fn synapses(&self) -> &SynapseSet {
        &self.synapses
    }

    pub fn synapses_mut(&mut self) -> &mut SynapseSet {
        &mut self.synapses
    }

    pub fn decoder(&self) -> Option<&ReflexDecoder> {
        self.decoder.as_ref()
    }

    pub fn set_decoder(&mut self, decoder: Option<ReflexDecoder>) {
        self.decoder = decoder;
    }

    pub fn epsilon(&self) -> f64 {
        self.inter.epsilon
    }

    pub fn set_descending_control(&mut self, epsilon: f64) -> Result<()> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::invalid("epsilon", format!("{epsilon} must be non-negative")));
        }
        self.inter.epsilon = epsilon;
        self.cfg.epsilon = epsilon;
        Ok(())
    }

    pub fn set_motor_firing(&mut self, enabled: bool) {
        self.motor.firing_enabled = enabled;
    }

    /// Returns all neurons to rest and the clock to zero; weights, gain and decoder are kept.
    pub fn reset(&mut self) {
        self.sensory.reset();
        self.inter.izh = IzhikevichState::at_rest(self.cfg.interneuron);
        self.inter.current = 0.0;
        let firing = self.motor.firing_enabled;
        self.motor = LifState::at_rest(self.cfg.motor);
        self.motor.firing_enabled = firing;
        self.steps = 0;
        self.last_motor_spike_ms = None;
    }

    /// Advances every layer by one step at skin temperature `temp_c`.
    pub fn step(&mut self, temp_c: f64) -> Result<StepOutcome> {
        let dt = self.dt;
        let spiked = self.sensory.step(temp_c, dt)?;

        let gain = self.inter.epsilon * self.sensory_i_max;
        self.inter.current *= (-dt / self.inter.tau_i_ms).exp();
        for (s, w) in spiked.iter().zip(self.synapses.weights()) {
            if *s {
                self.inter.current += gain * w;
            }
        }

        let inter_spike = self.inter.izh.step(self.inter.current, dt, Layer::Interneuron)?;
        if inter_spike {
            self.motor.receive_spike(self.cfg.motor_jump_mv);
        }
        let motor_peak_mv = self.motor.v_m;
        let motor_spike = self.motor.step(dt)?;
        self.steps += 1;
        Ok(StepOutcome { interneuron: inter_spike, motor: motor_spike, motor_peak_mv })
    }

    /// One step, appending motor-spike and reflex-strength events to `events`.
    pub fn step_with_events(&mut self, temp_c: f64, events: &mut Vec<ReflexEvent>) -> Result<StepOutcome> {
        let out = self.step(temp_c)?;
        if out.motor {
            let t = self.time_ms();
            events.push(ReflexEvent {
                t_ms: t,
                kind: ReflexEventKind::MotorSpike,
                g_s: None,
                delta_t_ms: None,
                source: NETWORK_SOURCE.to_string(),
            });
            if let (Some(prev), Some(dec)) = (self.last_motor_spike_ms, self.decoder) {
                let delta = t - prev;
                events.push(ReflexEvent {
                    t_ms: t,
                    kind: ReflexEventKind::ReflexStrength,
                    g_s: Some(dec.decode_saturating(delta)),
                    delta_t_ms: Some(delta),
                    source: NETWORK_SOURCE.to_string(),
                });
            }
            self.last_motor_spike_ms = Some(t);
        }
        Ok(out)
    }

    /// Holds `intensity` for `stim_ms`, then `baseline` for `tail_ms`; returns motor spike times.
    pub fn run_ideal(&mut self, intensity: f64, stim_ms: f64, tail_ms: f64, baseline: f64) -> Result<Vec<f64>> {
        let stim_steps = (stim_ms / self.dt).round() as usize;
        let tail_steps = (tail_ms / self.dt).round() as usize;
        let t0 = self.time_ms();
        let mut spikes = Vec::new();
        for k in 0..stim_steps + tail_steps {
            let temp = if k < stim_steps { intensity } else { baseline };
            if self.step(temp)?.motor {
                spikes.push(self.time_ms() - t0);
            }
        }
        Ok(spikes)
    }

    pub fn to_weights_file(&self) -> WeightsFile {
        let weights = self
            .sensory
            .neurons()
            .iter()
            .zip(self.synapses.weights())
            .map(|(n, w)| (format!("s_{}", n.curve.preferred), *w))
            .collect();
        WeightsFile {
            weights,
            epsilon: self.inter.epsilon,
            decoder: self.decoder.map(|d| DecoderFile { dt_min_ms: d.dt_min_ms, k_ms: d.k_ms }),
        }
    }

    /// Builds a network from persisted weights; the file's epsilon overrides `cfg`.
    pub fn from_weights_file(sensory: &SensoryConfig, cfg: &ArcConfig, file: &WeightsFile, dt: f64) -> Result<Self> {
        let weights = sensory
            .preferred_temps_c
            .iter()
            .map(|ta| {
                let key = format!("s_{ta}");
                file.weights.get(&key).copied().ok_or_else(|| Error::invalid("weights", format!("missing key {key}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut cfg = cfg.clone();
        cfg.epsilon = file.epsilon;
        let mut net = Self::new(sensory, &cfg, weights, dt)?;
        net.decoder = file.decoder.map(|d| ReflexDecoder::new(d.dt_min_ms, d.k_ms)).transpose()?;
        Ok(net)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecoderFile {
    pub dt_min_ms: f64,
    pub k_ms: f64,
}

/// Persisted weights: `{"s_38": .., "s_43": .., "s_50": .., "epsilon": .., "decoder": {..}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightsFile {
    #[serde(flatten)]
    pub weights: BTreeMap<String, f64>,
    pub epsilon: f64,
    pub decoder: Option<DecoderFile>,
}

impl WeightsFile {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("weights serialise")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationConfig {
    pub sweep_from_c: f64,
    pub sweep_to_c: f64,
    pub sweep_step_c: f64,
    /// Ideal-stimulus duration used for latency measurements (ms)
    pub stim_ms: f64,
    /// Baseline period after the stimulus during which spikes still count (ms)
    pub tail_ms: f64,
    pub baseline_c: f64,
    /// Every sweep point strictly above this temperature must yield a motor pair
    pub required_above_c: f64,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            sweep_from_c: 40.0,
            sweep_to_c: 52.0,
            sweep_step_c: 0.5,
            stim_ms: 100.0,
            tail_ms: 100.0,
            baseline_c: 35.0,
            required_above_c: 46.0,
        }
    }
}

impl CalibrationConfig {
    pub fn grid(&self) -> Vec<f64> {
        temperature_grid(self.sweep_from_c, self.sweep_to_c, self.sweep_step_c)
    }
}

/// Inclusive grid `from, from + step, ..., to` built from integer multiples.
pub fn temperature_grid(from: f64, to: f64, step: f64) -> Vec<f64> {
    let n = ((to - from) / step + 1e-9).floor() as usize;
    (0..=n).map(|i| from + i as f64 * step).collect()
}

/// Onset-to-first-motor-spike latency for an ideal stimulus, from a rested copy of `net`.
pub fn response_latency(net: &ReflexNetwork, intensity: f64, cal: &CalibrationConfig) -> Result<Option<f64>> {
    Ok(motor_spikes_for(net, intensity, cal)?.first().copied())
}

/// Motor spike times (relative to stimulus onset) for an ideal stimulus on a rested copy of `net`.
pub fn motor_spikes_for(net: &ReflexNetwork, intensity: f64, cal: &CalibrationConfig) -> Result<Vec<f64>> {
    let mut probe = net.clone();
    probe.reset();
    probe.set_motor_firing(true);
    probe.run_ideal(intensity, cal.stim_ms, cal.tail_ms, cal.baseline_c)
}

/// Fits `dt_min` and `k` on a sweep of ideal stimuli.
///
/// The latency of a sweep point is the time from stimulus onset to the first motor
/// spike. `dt_min` is the shortest latency in the sweep and `k` is the least-squares
/// solution of `(dt_min - Δt_i) / k ≈ T_i - T_top`, so that `ln g_s` rises by `ln β`
/// per °C and the hottest point decodes near 1.
pub fn calibrate_decoder(net: &ReflexNetwork, cal: &CalibrationConfig) -> Result<ReflexDecoder> {
    let grid = cal.grid();
    let top = *grid.last().ok_or_else(|| Error::CalibrationFailure("empty sweep".into()))?;
    let mut points = Vec::new();
    for &temp in &grid {
        let spikes = motor_spikes_for(net, temp, cal)?;
        if spikes.len() < 2 && temp > cal.required_above_c {
            return Err(Error::CalibrationFailure(format!(
                "{} motor spike(s) at {temp} °C; need at least 2",
                spikes.len()
            )));
        }
        if let Some(&first) = spikes.first() {
            points.push((temp, first));
        }
    }
    if points.len() < 2 {
        return Err(Error::CalibrationFailure("fewer than two sweep points produced a motor spike".into()));
    }
    let dt_min = points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(temp, dt) in &points {
        let x = dt_min - dt;
        let y = temp - top;
        sxy += x * y;
        sxx += x * x;
    }
    if !(sxy > 0.0) {
        return Err(Error::CalibrationFailure(format!("motor latency does not shorten with intensity (Σxy = {sxy})")));
    }
    ReflexDecoder::new(dt_min, sxx / sxy)
}
