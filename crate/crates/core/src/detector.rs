//! Common interface for everything that turns a temperature stream into reflex events.

use serde::{Deserialize, Serialize};

use crate::arc::{ReflexEventKind, ReflexNetwork};
use crate::baselines::TempClass;
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DetectorEventKind {
    Trigger,
    Release,
    ClassChange,
    Spike,
    Strength,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorEvent {
    pub t_s: f64,
    pub detector: String,
    pub kind: DetectorEventKind,
    /// Temperature of the sample that produced the event (°C)
    pub temp_c: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class: Option<TempClass>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_s: Option<f64>,
}

impl DetectorEvent {
    pub fn new(t_s: f64, detector: &str, kind: DetectorEventKind, temp_c: f64) -> Self {
        Self { t_s, detector: detector.to_string(), kind, temp_c, class: None, g_s: None }
    }
}

pub trait Detector {
    fn name(&self) -> &'static str;

    /// Consumes one sample taken at `t_s`, held until the next sample.
    fn step(&mut self, t_s: f64, temp_c: f64) -> Result<Vec<DetectorEvent>>;

    /// Current output rendered for a timeline column.
    fn output(&self) -> String;

    fn reset(&mut self);
}

/// The reflex network sampled like the baselines.
#[derive(Debug, Clone)]
pub struct NeuromorphicDetector {
    pub net: ReflexNetwork,
    pub sample_period_ms: f64,
    last_g_s: Option<f64>,
}

impl NeuromorphicDetector {
    pub fn new(net: ReflexNetwork, sample_period_ms: f64) -> Self {
        Self { net, sample_period_ms, last_g_s: None }
    }

    pub fn last_strength(&self) -> Option<f64> {
        self.last_g_s
    }
}

impl Detector for NeuromorphicDetector {
    fn name(&self) -> &'static str {
        "neuromorphic"
    }

    fn step(&mut self, t_s: f64, temp_c: f64) -> Result<Vec<DetectorEvent>> {
        let steps = (self.sample_period_ms / self.net.dt()).round() as usize;
        let t0_ms = self.net.time_ms();
        let mut raw = Vec::new();
        for _ in 0..steps {
            self.net.step_with_events(temp_c, &mut raw)?;
        }
        Ok(raw
            .into_iter()
            .map(|e| {
                let t = t_s + (e.t_ms - t0_ms) / 1000.0;
                match e.kind {
                    ReflexEventKind::MotorSpike => DetectorEvent::new(t, self.name(), DetectorEventKind::Spike, temp_c),
                    ReflexEventKind::ReflexStrength => {
                        self.last_g_s = e.g_s;
                        let mut ev = DetectorEvent::new(t, self.name(), DetectorEventKind::Strength, temp_c);
                        ev.g_s = e.g_s;
                        ev
                    }
                }
            })
            .collect())
    }

    fn output(&self) -> String {
        self.last_g_s.map_or_else(String::new, |g| format!("{g:.6}"))
    }

    fn reset(&mut self) {
        self.net.reset();
        self.last_g_s = None;
    }
}
