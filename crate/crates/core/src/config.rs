//! Run configuration: every tunable of every experiment in one serialisable document.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arc::{ArcConfig, CalibrationConfig, ReflexNetwork, WeightsFile};
use crate::baselines::{ClassifierTraining, FfSnnConfig, PerceptronClassifier, ThermistorCircuit};
use crate::error::{Error, Result};
use crate::learning::{LearningParams, ReflexTarget, TrainerConfig};
use crate::sensory::SensoryConfig;
use crate::stimulus::DEFAULT_SAMPLE_RATE_HZ;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CurveConfig {
    pub from_c: f64,
    pub to_c: f64,
    pub step_c: f64,
    /// Allowed relative deviation of the fitted log-slope from `ln β`
    pub slope_tolerance: f64,
    /// Allowed deviation of the hottest decoded strength from 1
    pub anchor_tolerance: f64,
}

impl Default for CurveConfig {
    fn default() -> Self {
        Self { from_c: 44.0, to_c: 52.0, step_c: 0.5, slope_tolerance: 0.2, anchor_tolerance: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SsConfig {
    pub epsilon: f64,
    /// Ceiling applied to the trace for the clipped run (°C)
    pub clip_c: f64,
    /// The hottest sensory neuron must stay silent while the trace is at or below this (°C)
    pub silent_at_or_below_c: f64,
    /// Samples within this distance of the trace peak form the peak region (°C)
    pub peak_region_c: f64,
}

impl Default for SsConfig {
    fn default() -> Self {
        Self { epsilon: 0.8, clip_c: 44.0, silent_at_or_below_c: 45.0, peak_region_c: 1.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TsConfig {
    pub pulse_ms: f64,
    pub period_ms: f64,
    pub count: usize,
    /// Train peak is this far below the single-pulse threshold (°C)
    pub below_threshold_c: f64,
    /// Baseline time appended after the last pulse (ms)
    pub tail_ms: f64,
    pub search_from_c: f64,
    pub search_to_c: f64,
    /// Thresholds are located on a lattice of this spacing (°C)
    pub resolution_c: f64,
    /// Period at which pulses must no longer summate (ms)
    pub decayed_period_ms: f64,
    pub sweep_periods_ms: Vec<f64>,
}

impl Default for TsConfig {
    fn default() -> Self {
        Self {
            pulse_ms: 40.0,
            period_ms: 250.0,
            count: 3,
            below_threshold_c: 1.0,
            tail_ms: 500.0,
            search_from_c: 36.0,
            search_to_c: 60.0,
            resolution_c: 0.1,
            decayed_period_ms: 2000.0,
            sweep_periods_ms: vec![150.0, 250.0, 500.0, 1000.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub thermistor: ThermistorCircuit,
    pub classifier: PerceptronClassifier,
    pub classifier_training: ClassifierTraining,
    pub ffsnn: FfSnnConfig,
    pub ffsnn_target_c: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            thermistor: ThermistorCircuit::default(),
            classifier: PerceptronClassifier::default(),
            classifier_training: ClassifierTraining::default(),
            ffsnn: FfSnnConfig::default(),
            ffsnn_target_c: 46.8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CompareConfig {
    pub analog_tolerance_c: f64,
    pub ffsnn_tolerance_c: f64,
    pub classifier_tolerance_c: f64,
    /// Shortest constant stretch counted as a plateau (ms)
    pub plateau_min_ms: f64,
    /// Plateaus below this are not super-threshold (°C)
    pub plateau_min_c: f64,
    /// Start of a plateau excluded from its summary (ms)
    pub plateau_settle_ms: f64,
    pub min_strength_difference: f64,
}

impl Default for CompareConfig {
    fn default() -> Self {
        Self {
            analog_tolerance_c: 0.2,
            ffsnn_tolerance_c: 0.5,
            classifier_tolerance_c: 0.1,
            plateau_min_ms: 1000.0,
            plateau_min_c: 44.0,
            plateau_settle_ms: 200.0,
            min_strength_difference: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StreamConfig {
    /// Samples buffered between the reader and the simulation
    pub queue_capacity: usize,
    /// Simulated time between heartbeat objects (s)
    pub heartbeat_s: f64,
    /// Wall-clock silence after which a stall event is emitted (ms)
    pub stall_timeout_ms: u64,
}

impl Default for StreamConfig {
    fn default() -> Self {
        Self { queue_capacity: 100, heartbeat_s: 1.0, stall_timeout_ms: 1000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub rng_seed: u64,
    pub dt_ms: f64,
    pub sample_rate_hz: f64,
    pub baseline_c: f64,
    pub sensory: SensoryConfig,
    pub arc: ArcConfig,
    pub learning: LearningParams,
    pub trainer: TrainerConfig,
    pub target: ReflexTarget,
    pub calibration: CalibrationConfig,
    pub curve: CurveConfig,
    pub ss: SsConfig,
    pub ts: TsConfig,
    pub baselines: BaselineConfig,
    pub compare: CompareConfig,
    pub stream: StreamConfig,
    /// Directory receiving reports, CSVs and weights
    pub out_dir: String,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            rng_seed: 1,
            dt_ms: 0.1,
            sample_rate_hz: DEFAULT_SAMPLE_RATE_HZ,
            baseline_c: 35.0,
            sensory: SensoryConfig::default(),
            arc: ArcConfig::default(),
            learning: LearningParams::default(),
            trainer: TrainerConfig::default(),
            target: ReflexTarget::default(),
            calibration: CalibrationConfig::default(),
            curve: CurveConfig::default(),
            ss: SsConfig::default(),
            ts: TsConfig::default(),
            baselines: BaselineConfig::default(),
            compare: CompareConfig::default(),
            stream: StreamConfig::default(),
            out_dir: "out".into(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    /// Trainer settings with the run seed applied.
    pub fn trainer(&self) -> TrainerConfig {
        TrainerConfig { rng_seed: self.rng_seed, ..self.trainer.clone() }
    }

    pub fn sample_period_ms(&self) -> f64 {
        1000.0 / self.sample_rate_hz
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt_ms > 0.0 && self.dt_ms.is_finite()) {
            return Err(Error::invalid("dt_ms", format!("{}", self.dt_ms)));
        }
        if !(self.sample_rate_hz > 0.0) {
            return Err(Error::invalid("sample_rate_hz", format!("{}", self.sample_rate_hz)));
        }
        let steps = self.sample_period_ms() / self.dt_ms;
        if (steps - steps.round()).abs() > 1e-9 {
            return Err(Error::invalid("dt_ms", "sample period must be a whole number of steps"));
        }
        if self.arc.tau_i_ms <= 0.0 {
            return Err(Error::invalid("arc.tau_i_ms", "must be positive"));
        }
        self.trainer.validate()?;
        if self.ts.count == 0 || self.ts.resolution_c <= 0.0 || self.ts.period_ms < self.ts.pulse_ms {
            return Err(Error::invalid("ts", "invalid pulse geometry"));
        }
        Ok(())
    }

    /// Network with the given persisted weights; the file's gain replaces `arc.epsilon`.
    pub fn network_from(&self, weights: &WeightsFile) -> Result<ReflexNetwork> {
        ReflexNetwork::from_weights_file(&self.sensory, &self.arc, weights, self.dt_ms)
    }

    pub fn network_with(&self, weights: Vec<f64>) -> Result<ReflexNetwork> {
        ReflexNetwork::new(&self.sensory, &self.arc, weights, self.dt_ms)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip() {
        let cfg = RunConfig::default();
        let back = RunConfig::from_json(&cfg.to_json()).unwrap();
        assert_eq!(cfg, back);
    }

    #[test]
    fn partial_documents_fill_defaults() {
        let cfg = RunConfig::from_json(r#"{"rng_seed": 9, "arc": {"tau_i_ms": 80}}"#).unwrap();
        assert_eq!(cfg.rng_seed, 9);
        assert_eq!(cfg.arc.tau_i_ms, 80.0);
        assert_eq!(cfg.arc.motor_jump_mv, 30.0);
        assert_eq!(cfg.trainer().rng_seed, 9);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::from_json(r#"{"trainer": {"episodes": 0}}"#).is_err());
        assert!(RunConfig::from_json(r#"{"dt_ms": 0.3}"#).is_err());
        assert!(RunConfig::from_json(r#"{"dt_ms": "fast"}"#).is_err());
    }
}
