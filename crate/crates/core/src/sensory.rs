//! Population encoding of skin temperature into heat-sensitive sensory neurons.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Layer, Result};
use crate::neuron::{IzhikevichParams, IzhikevichState};

/// Preferred temperatures of the three heat-sensitive populations (°C).
pub const PREFERRED_TEMPS_C: [f64; 3] = [38.0, 43.0, 50.0];
/// Saturation temperature of every tuning curve (°C).
pub const T_MAX_C: f64 = 52.0;

/// Half-Gaussian tuning curve saturating at `t_max`, with width `t_max - preferred`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TuningCurve {
    pub preferred: f64,
    pub t_max: f64,
    pub i_max: f64,
}

impl TuningCurve {
    pub fn new(preferred: f64, t_max: f64, i_max: f64) -> Result<Self> {
        if !(t_max - preferred > 0.0) {
            return Err(Error::invalid("preferred", format!("{preferred} must lie below t_max {t_max}")));
        }
        if !(i_max.is_finite() && i_max >= 0.0) {
            return Err(Error::invalid("i_max", format!("{i_max}")));
        }
        Ok(Self { preferred, t_max, i_max })
    }

    pub fn sigma(&self) -> f64 {
        self.t_max - self.preferred
    }

    pub fn current(&self, temp_c: f64) -> f64 {
        if temp_c >= self.t_max {
            return self.i_max;
        }
        let z = (self.t_max - temp_c) / self.sigma();
        (-0.5 * z * z).exp() * self.i_max
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SensoryConfig {
    pub preferred_temps_c: Vec<f64>,
    pub t_max_c: f64,
    /// Shared maximal drive current (model units)
    pub i_max: f64,
    /// Temperature whose equilibrium the neurons start from after a reset (°C)
    pub resting_temp_c: f64,
    pub neuron: IzhikevichParams,
}

impl Default for SensoryConfig {
    fn default() -> Self {
        Self {
            preferred_temps_c: PREFERRED_TEMPS_C.to_vec(),
            t_max_c: T_MAX_C,
            i_max: 7.0,
            resting_temp_c: 35.0,
            neuron: IzhikevichParams::INTRINSICALLY_BURSTING,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensoryNeuron {
    pub curve: TuningCurve,
    pub state: IzhikevichState,
}

/// Ordered sensory neurons; index 0 prefers 38 °C, index 2 prefers 50 °C.
#[derive(Debug, Clone, PartialEq)]
pub struct SensoryPopulation {
    neurons: Vec<SensoryNeuron>,
    spiked: Vec<bool>,
    resting_temp_c: f64,
}

impl SensoryPopulation {
    pub fn new(cfg: &SensoryConfig) -> Result<Self> {
        if cfg.preferred_temps_c.is_empty() {
            return Err(Error::invalid("preferred_temps_c", "at least one sensory neuron required"));
        }
        let neurons = cfg
            .preferred_temps_c
            .iter()
            .map(|&ta| {
                let curve = TuningCurve::new(ta, cfg.t_max_c, cfg.i_max)?;
                Ok(SensoryNeuron { curve, state: resting_state(&curve, cfg.neuron, cfg.resting_temp_c) })
            })
            .collect::<Result<Vec<_>>>()?;
        let n = neurons.len();
        Ok(Self { neurons, spiked: vec![false; n], resting_temp_c: cfg.resting_temp_c })
    }

    pub fn len(&self) -> usize {
        self.neurons.len()
    }

    pub fn is_empty(&self) -> bool {
        self.neurons.is_empty()
    }

    pub fn neurons(&self) -> &[SensoryNeuron] {
        &self.neurons
    }

    /// Drives each neuron with its tuning current for `temp_c` and advances it by `dt`.
    pub fn step(&mut self, temp_c: f64, dt: f64) -> Result<&[bool]> {
        for (i, (n, s)) in self.neurons.iter_mut().zip(self.spiked.iter_mut()).enumerate() {
            let current = n.curve.current(temp_c);
            *s = n.state.step(current, dt, Layer::Sensory(i))?;
        }
        Ok(&self.spiked)
    }

    /// Spike flags of the most recent step.
    pub fn spiked(&self) -> &[bool] {
        &self.spiked
    }

    pub fn reset(&mut self) {
        for n in &mut self.neurons {
            n.state = resting_state(&n.curve, n.state.params, self.resting_temp_c);
        }
        self.spiked.iter_mut().for_each(|s| *s = false);
    }
}

fn resting_state(curve: &TuningCurve, params: IzhikevichParams, temp_c: f64) -> IzhikevichState {
    IzhikevichState::at_equilibrium(params, curve.current(temp_c)).unwrap_or_else(|| IzhikevichState::at_rest(params))
}
