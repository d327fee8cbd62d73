//! Fixed-threshold comparison detectors: an analog thermistor reflex circuit, a
//! two-perceptron temperature classifier and a feed-forward spiking detector.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detector::{Detector, DetectorEvent, DetectorEventKind};
use crate::error::{Error, Layer, Result};
use crate::neuron::{LifParams, LifState};

pub const KELVIN_OFFSET: f64 = 273.15;

/// Thermistor divider feeding a comparator that latches a timer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ThermistorCircuit {
    /// Thermistor resistance at the reference temperature (Ω)
    pub r0_ohm: f64,
    /// Reference temperature (K)
    pub t0_k: f64,
    /// Material constant (K)
    pub b_k: f64,
    /// Series resistor across which the sense voltage is taken (Ω)
    pub r1_ohm: f64,
    /// Reference divider, upper leg (Ω)
    pub rp1_ohm: f64,
    /// Reference divider, lower leg (Ω)
    pub rp2_ohm: f64,
    /// Release margin below the trigger temperature (°C)
    pub hysteresis_c: f64,
    #[serde(skip)]
    latched: bool,
}

impl Default for ThermistorCircuit {
    fn default() -> Self {
        Self {
            r0_ohm: 1000.0,
            t0_k: 298.15,
            b_k: 3500.0,
            r1_ohm: 500.0,
            rp1_ohm: 10_000.0,
            rp2_ohm: 10_000.0,
            hysteresis_c: 1.0,
            latched: false,
        }
    }
}

impl ThermistorCircuit {
    pub fn resistance(&self, t_k: f64) -> Result<f64> {
        if !(t_k > 0.0) {
            return Err(Error::invalid("temperature", format!("{t_k} K is not physical")));
        }
        Ok(self.r0_ohm * (self.b_k * (1.0 / t_k - 1.0 / self.t0_k)).exp())
    }

    /// Closed-form trigger temperature (°C): `B T0 / (B + T0 ln(R1 Rp1 / (R0 Rp2)))`.
    pub fn threshold_c(&self) -> Result<f64> {
        let ratio = (self.r1_ohm * self.rp1_ohm) / (self.r0_ohm * self.rp2_ohm);
        if !(ratio > 0.0) {
            return Err(Error::invalid("resistor ratio", format!("log argument {ratio} is not positive")));
        }
        let denom = self.b_k + self.t0_k * ratio.ln();
        if !(denom > 0.0) {
            return Err(Error::invalid("resistor ratio", "no positive trigger temperature"));
        }
        Ok(self.b_k * self.t0_k / denom - KELVIN_OFFSET)
    }

    /// Sense voltage minus reference voltage, both as fractions of the supply.
    pub fn divider_margin(&self, temp_c: f64) -> Result<f64> {
        let rt = self.resistance(temp_c + KELVIN_OFFSET)?;
        Ok(self.r1_ohm / (self.r1_ohm + rt) - self.rp2_ohm / (self.rp1_ohm + self.rp2_ohm))
    }

    /// Trigger temperature found by bisecting the divider margin on `[lo_c, hi_c]`.
    pub fn threshold_by_bisection(&self, lo_c: f64, hi_c: f64) -> Result<f64> {
        let (mut lo, mut hi) = (lo_c, hi_c);
        if self.divider_margin(lo)? >= 0.0 || self.divider_margin(hi)? < 0.0 {
            return Err(Error::invalid("bracket", format!("[{lo_c}, {hi_c}] does not contain the crossing")));
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if self.divider_margin(mid)? >= 0.0 {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }

    pub fn latched(&self) -> bool {
        self.latched
    }

    /// Feeds one temperature sample; returns whether the reflex override is active.
    pub fn step(&mut self, temp_c: f64) -> Result<bool> {
        if !self.latched {
            if self.divider_margin(temp_c)? >= 0.0 {
                self.latched = true;
            }
        } else if temp_c <= self.threshold_c()? - self.hysteresis_c {
            self.latched = false;
        }
        Ok(self.latched)
    }

    pub fn reset(&mut self) {
        self.latched = false;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TempClass {
    Cold,
    Room,
    Hot,
}

impl std::fmt::Display for TempClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TempClass::Cold => "cold",
            TempClass::Room => "room",
            TempClass::Hot => "hot",
        })
    }
}

/// Scalar perceptron `w T + b` with a Heaviside output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdUnit {
    pub weight: f64,
    pub bias: f64,
    /// Whether the boundary itself counts as inactive
    pub strict: bool,
}

impl ThresholdUnit {
    pub fn fires(&self, temp_c: f64) -> bool {
        let z = self.weight * temp_c + self.bias;
        if self.strict {
            z > 0.0
        } else {
            z >= 0.0
        }
    }

    pub fn boundary(&self) -> f64 {
        -self.bias / self.weight
    }
}

/// Sum of two threshold units: 0 cold, 1 room, 2 hot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerceptronClassifier {
    pub cold_room: ThresholdUnit,
    pub room_hot: ThresholdUnit,
}

pub const COLD_ROOM_BOUNDARY_C: f64 = 22.5;
pub const ROOM_HOT_BOUNDARY_C: f64 = 107.0 / 3.0;

impl Default for PerceptronClassifier {
    fn default() -> Self {
        Self {
            cold_room: ThresholdUnit { weight: 1.0, bias: -COLD_ROOM_BOUNDARY_C, strict: false },
            room_hot: ThresholdUnit { weight: 1.0, bias: -ROOM_HOT_BOUNDARY_C, strict: true },
        }
    }
}

impl PerceptronClassifier {
    pub fn output(&self, temp_c: f64) -> u8 {
        self.cold_room.fires(temp_c) as u8 + self.room_hot.fires(temp_c) as u8
    }

    pub fn classify(&self, temp_c: f64) -> TempClass {
        match self.output(temp_c) {
            0 => TempClass::Cold,
            1 => TempClass::Room,
            _ => TempClass::Hot,
        }
    }

    pub fn boundaries(&self) -> (f64, f64) {
        (self.cold_room.boundary(), self.room_hot.boundary())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassifierTraining {
    pub epochs: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for ClassifierTraining {
    fn default() -> Self {
        Self { epochs: 20_000, learning_rate: 0.5, seed: 7 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedClassifier {
    pub classifier: PerceptronClassifier,
    pub boundaries_c: (f64, f64),
    pub converged: bool,
}

/// Temperatures drawn uniformly from `[lo, hi]`, labelled by the default boundaries.
pub fn synthetic_class_data(n: usize, lo: f64, hi: f64, seed: u64) -> Vec<(f64, TempClass)> {
    let reference = PerceptronClassifier::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let t = rng.gen_range(lo..=hi);
            (t, reference.classify(t))
        })
        .collect()
}

const MAX_TRAINING_ERROR_RATE: f64 = 0.01;

/// Fits each unit by full-batch logistic-loss gradient descent on standardised
/// temperatures. Single-class data or more than 1 % training errors clear the
/// `converged` flag.
pub fn train_classifier(data: &[(f64, TempClass)], cfg: &ClassifierTraining) -> TrainedClassifier {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let low = fit_unit(data, |c| c != TempClass::Cold, false, cfg, &mut rng);
    let high = fit_unit(data, |c| c == TempClass::Hot, true, cfg, &mut rng);
    let classifier = PerceptronClassifier { cold_room: low.0, room_hot: high.0 };
    TrainedClassifier { boundaries_c: classifier.boundaries(), classifier, converged: low.1 && high.1 }
}

fn fit_unit(
    data: &[(f64, TempClass)],
    positive: impl Fn(TempClass) -> bool,
    strict: bool,
    cfg: &ClassifierTraining,
    rng: &mut ChaCha8Rng,
) -> (ThresholdUnit, bool) {
    let n = data.len().max(1) as f64;
    let mean = data.iter().map(|d| d.0).sum::<f64>() / n;
    let var = data.iter().map(|d| (d.0 - mean).powi(2)).sum::<f64>() / n;
    let scale = if var > 0.0 { var.sqrt() } else { 1.0 };
    let labels: Vec<f64> = data.iter().map(|d| positive(d.1) as u8 as f64).collect();
    let xs: Vec<f64> = data.iter().map(|d| (d.0 - mean) / scale).collect();

    let mut w = rng.gen_range(-0.1..0.1);
    let mut b = rng.gen_range(-0.1..0.1);
    for _ in 0..cfg.epochs {
        let (mut gw, mut gb) = (0.0, 0.0);
        for (x, y) in xs.iter().zip(&labels) {
            let p = 1.0 / (1.0 + (-(w * x + b)).exp());
            gw += (p - y) * x;
            gb += p - y;
        }
        w -= cfg.learning_rate * gw / n;
        b -= cfg.learning_rate * gb / n;
    }
    let unit = ThresholdUnit { weight: w / scale, bias: b - w * mean / scale, strict };
    let both_classes = labels.contains(&1.0) && labels.contains(&0.0);
    let errors = data.iter().zip(&labels).filter(|(d, &y)| unit.fires(d.0) != (y == 1.0)).count();
    let accurate = (errors as f64) <= MAX_TRAINING_ERROR_RATE * n;
    (unit, both_classes && accurate && w.is_finite())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FfSnnConfig {
    pub input: LifParams,
    /// Potential the input neuron returns to after a spike (mV)
    pub input_reset_mv: f64,
    pub output: LifParams,
    /// Output depolarisation per input spike (mV)
    pub synaptic_jump_mv: f64,
    /// Input drive per °C (mV/ms)
    pub gain: f64,
    /// Output silence after which the detector reports innocuous again (ms)
    pub innocuous_after_ms: f64,
    pub dt_ms: f64,
}

impl Default for FfSnnConfig {
    fn default() -> Self {
        Self {
            input: LifParams { v_rest: -70.0, tau_m: 10.0, v_th: -50.0 },
            input_reset_mv: -70.0,
            output: LifParams::default(),
            synaptic_jump_mv: 30.0,
            gain: 0.0,
            innocuous_after_ms: 2000.0,
            dt_ms: 0.1,
        }
    }
}

/// One input LIF driven by a current linear in temperature, feeding one output LIF.
#[derive(Debug, Clone, PartialEq)]
pub struct FeedForwardSnn {
    cfg: FfSnnConfig,
    v_in: f64,
    output: LifState,
    noxious: bool,
    silent_ms: f64,
}

impl FeedForwardSnn {
    pub fn new(cfg: FfSnnConfig) -> Result<Self> {
        if !(cfg.dt_ms > 0.0 && cfg.input.tau_m > 0.0 && cfg.output.tau_m > 0.0) {
            return Err(Error::invalid("ffsnn", "time constants and dt must be positive"));
        }
        if !(cfg.gain >= 0.0 && cfg.gain.is_finite()) {
            return Err(Error::invalid("gain", format!("{}", cfg.gain)));
        }
        let v_in = cfg.input.v_rest;
        let output = LifState::at_rest(cfg.output);
        Ok(Self { cfg, v_in, output, noxious: false, silent_ms: 0.0 })
    }

    pub fn config(&self) -> &FfSnnConfig {
        &self.cfg
    }

    pub fn noxious(&self) -> bool {
        self.noxious
    }

    pub fn reset(&mut self) {
        self.v_in = self.cfg.input.v_rest;
        self.output = LifState::at_rest(self.cfg.output);
        self.noxious = false;
        self.silent_ms = 0.0;
    }

    /// Advances by `dt` ms; returns whether the output neuron spiked.
    pub fn step(&mut self, temp_c: f64, dt: f64) -> Result<bool> {
        if !(temp_c.is_finite() && self.v_in.is_finite()) {
            return Err(Error::IntegrationFault { layer: Layer::Baseline, v: self.v_in, input: temp_c });
        }
        let p = self.cfg.input;
        let v_inf = p.v_rest + p.tau_m * self.cfg.gain * temp_c;
        self.v_in = v_inf + (self.v_in - v_inf) * (-dt / p.tau_m).exp();
        if self.v_in >= p.v_th {
            self.v_in = self.cfg.input_reset_mv;
            self.output.receive_spike(self.cfg.synaptic_jump_mv);
        }
        let spiked = self.output.step(dt)?;
        if spiked {
            self.noxious = true;
            self.silent_ms = 0.0;
        } else {
            self.silent_ms += dt;
            if self.silent_ms >= self.cfg.innocuous_after_ms {
                self.noxious = false;
            }
        }
        Ok(spiked)
    }

    /// Whether holding `temp_c` for `hold_ms` produces at least one output spike.
    pub fn fires_on_hold(&self, temp_c: f64, hold_ms: f64) -> Result<bool> {
        let mut probe = self.clone();
        probe.reset();
        let dt = self.cfg.dt_ms;
        for _ in 0..(hold_ms / dt).round() as usize {
            if probe.step(temp_c, dt)? {
                return Ok(true);
            }
        }
        Ok(false)
    }
}

pub const FFSNN_HOLD_MS: f64 = 10_000.0;
const FFSNN_MAX_ITERATIONS: usize = 60;

/// Bisects the input gain so that a 10 s hold at `target_c` just fires the output
/// and a hold 0.5 °C below does not.
pub fn tune_ffsnn(target_c: f64, base: &FfSnnConfig) -> Result<FeedForwardSnn> {
    if !(40.0..=55.0).contains(&target_c) {
        return Err(Error::invalid("target_c", format!("{target_c} °C outside [40, 55]")));
    }
    let with_gain = |gain: f64| FeedForwardSnn::new(FfSnnConfig { gain, ..base.clone() });
    let (mut lo, mut hi) = (0.0, 1.0);
    if !with_gain(hi)?.fires_on_hold(target_c, FFSNN_HOLD_MS)? {
        return Err(Error::CalibrationFailure("upper gain bracket does not fire".into()));
    }
    for _ in 0..FFSNN_MAX_ITERATIONS {
        let mid = 0.5 * (lo + hi);
        if with_gain(mid)?.fires_on_hold(target_c, FFSNN_HOLD_MS)? {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo <= 1e-12 * hi {
            break;
        }
    }
    let snn = with_gain(hi)?;
    if snn.fires_on_hold(target_c - 0.5, FFSNN_HOLD_MS)? {
        return Err(Error::CalibrationFailure(format!(
            "gain {hi} cannot separate {target_c} °C from {} °C",
            target_c - 0.5
        )));
    }
    Ok(snn)
}

/// Analog circuit as a detector: trigger on latch, release on un-latch.
#[derive(Debug, Clone)]
pub struct AnalogDetector {
    pub circuit: ThermistorCircuit,
}

impl Detector for AnalogDetector {
    fn name(&self) -> &'static str {
        "analog"
    }

    fn step(&mut self, t_s: f64, temp_c: f64) -> Result<Vec<DetectorEvent>> {
        let before = self.circuit.latched();
        let after = self.circuit.step(temp_c)?;
        Ok(match (before, after) {
            (false, true) => vec![DetectorEvent::new(t_s, self.name(), DetectorEventKind::Trigger, temp_c)],
            (true, false) => vec![DetectorEvent::new(t_s, self.name(), DetectorEventKind::Release, temp_c)],
            _ => vec![],
        })
    }

    fn output(&self) -> String {
        (self.circuit.latched() as u8).to_string()
    }

    fn reset(&mut self) {
        self.circuit.reset();
    }
}

#[derive(Debug, Clone)]
pub struct ClassifierDetector {
    pub classifier: PerceptronClassifier,
    last: Option<TempClass>,
}

impl ClassifierDetector {
    pub fn new(classifier: PerceptronClassifier) -> Self {
        Self { classifier, last: None }
    }
}

impl Detector for ClassifierDetector {
    fn name(&self) -> &'static str {
        "classifier"
    }

    fn step(&mut self, t_s: f64, temp_c: f64) -> Result<Vec<DetectorEvent>> {
        let class = self.classifier.classify(temp_c);
        let changed = self.last.is_some_and(|c| c != class);
        self.last = Some(class);
        Ok(if changed {
            let mut ev = DetectorEvent::new(t_s, self.name(), DetectorEventKind::ClassChange, temp_c);
            ev.class = Some(class);
            vec![ev]
        } else {
            vec![]
        })
    }

    fn output(&self) -> String {
        self.last.map_or_else(String::new, |c| c.to_string())
    }

    fn reset(&mut self) {
        self.last = None;
    }
}

/// Feed-forward detector stepped at its own dt across each sample period.
#[derive(Debug, Clone)]
pub struct FfSnnDetector {
    pub snn: FeedForwardSnn,
    pub sample_period_ms: f64,
}

impl Detector for FfSnnDetector {
    fn name(&self) -> &'static str {
        "ffsnn"
    }

    fn step(&mut self, t_s: f64, temp_c: f64) -> Result<Vec<DetectorEvent>> {
        let dt = self.snn.config().dt_ms;
        let steps = (self.sample_period_ms / dt).round() as usize;
        let was = self.snn.noxious();
        let mut events = Vec::new();
        for k in 0..steps {
            if self.snn.step(temp_c, dt)? {
                let t = t_s + (k + 1) as f64 * dt / 1000.0;
                events.push(DetectorEvent::new(t, self.name(), DetectorEventKind::Spike, temp_c));
            }
        }
        match (was, self.snn.noxious()) {
            (false, true) => events.push(DetectorEvent::new(t_s, self.name(), DetectorEventKind::Trigger, temp_c)),
            (true, false) => events.push(DetectorEvent::new(t_s, self.name(), DetectorEventKind::Release, temp_c)),
            _ => {}
        }
        Ok(events)
    }

    fn output(&self) -> String {
        (self.snn.noxious() as u8).to_string()
    }

    fn reset(&mut self) {
        self.snn.reset();
    }
}
