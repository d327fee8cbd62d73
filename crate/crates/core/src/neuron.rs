//! Fixed-timestep neuron integrators.
//!
//! ```text
//! bursting:  v' = 0.04v² + 5v + 140 - u + I,  u' = a(bv - u),  v >= 30 => v = c, u += d  (RK4)
//! LIF:       v' = (v0 - v) / tau,             v >= v_th (firing enabled) => v = v0  (exact decay)
//! ```

use serde::{Deserialize, Serialize};

use crate::error::{Error, Layer, Result};

/// Peak cutoff of the bursting model (mV).
pub const SPIKE_PEAK_MV: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IzhikevichParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub d: f64,
}

impl IzhikevichParams {
    /// Intrinsically bursting regime: an initial burst followed by slower tonic firing.
    pub const INTRINSICALLY_BURSTING: Self = Self { a: 0.02, b: 0.2, c: -55.0, d: 4.0 };
}

impl Default for IzhikevichParams {
    fn default() -> Self {
        Self::INTRINSICALLY_BURSTING
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IzhikevichState {
    /// Membrane potential (mV)
    pub v: f64,
    /// Recovery variable
    pub u: f64,
    pub params: IzhikevichParams,
    /// Input current applied on the most recent step
    pub input: f64,
    #[serde(default)]
    spike_phase: f64,
}

impl IzhikevichState {
    pub fn new(params: IzhikevichParams, v: f64, u: f64) -> Self {
        Self { v, u, params, input: 0.0, spike_phase: 0.0 }
    }

    /// Stable fixed point without input.
    pub fn at_rest(params: IzhikevichParams) -> Self {
        Self::at_equilibrium(params, 0.0).unwrap_or(Self {
            v: -65.0,
            u: params.b * -65.0,
            params,
            input: 0.0,
            spike_phase: 0.0,
        })
    }

    /// Stable fixed point under constant drive `current`, if one exists
    /// (below rheobase): the lower root of `0.04v² + (5 - b)v + 140 + I = 0`.
    pub fn at_equilibrium(params: IzhikevichParams, current: f64) -> Option<Self> {
        let disc = (5.0 - params.b).powi(2) - 0.16 * (140.0 + current);
        if disc < 0.0 {
            return None;
        }
        let v = (-(5.0 - params.b) - disc.sqrt()) / 0.08;
        Some(Self { v, u: params.b * v, params, input: current, spike_phase: 0.0 })
    }

    /// Advances by `dt` ms with input held constant. Returns whether the neuron spiked.
    ///
    /// The subthreshold flow is integrated with classical RK4. When the step would
    /// carry `v` past the peak, the crossing instant is located by bisection on the
    /// step fraction, the reset is applied there and the rest of the step is
    /// integrated from the reset state. The crossing fraction is kept in
    /// [`spike_phase`](Self::spike_phase).
    pub fn step(&mut self, i_ext: f64, dt: f64, layer: Layer) -> Result<bool> {
        if !(self.v.is_finite() && self.u.is_finite() && i_ext.is_finite()) {
            return Err(Error::IntegrationFault { layer, v: self.v, input: i_ext });
        }
        self.input = i_ext;
        let p = self.params;
        if self.v >= SPIKE_PEAK_MV {
            self.spike_phase = 0.0;
            let (v, u) = rk4(p, p.c, self.u + p.d, i_ext, dt);
            return self.commit(v, u, layer, true);
        }
        let (v, u) = rk4(p, self.v, self.u, i_ext, dt);
        if v < SPIKE_PEAK_MV && v.is_finite() {
            return self.commit(v, u, layer, false);
        }
        let (mut lo, mut hi) = (0.0, 1.0);
        for _ in 0..CROSSING_ITERATIONS {
            let mid = 0.5 * (lo + hi);
            let (vm, _) = rk4(p, self.v, self.u, i_ext, mid * dt);
            if vm >= SPIKE_PEAK_MV || !vm.is_finite() {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let (_, u_cross) = rk4(p, self.v, self.u, i_ext, hi * dt);
        self.spike_phase = hi;
        let (v, u) = rk4(p, p.c, u_cross + p.d, i_ext, (1.0 - hi) * dt);
        self.commit(v, u, layer, true)
    }

    /// Fraction of the most recent spiking step at which the peak was crossed.
    pub fn spike_phase(&self) -> f64 {
        self.spike_phase
    }

    fn commit(&mut self, v: f64, u: f64, layer: Layer, spiked: bool) -> Result<bool> {
        if !(v.is_finite() && u.is_finite()) {
            return Err(Error::IntegrationFault { layer, v, input: self.input });
        }
        self.v = v;
        self.u = u;
        Ok(spiked)
    }
}

const CROSSING_ITERATIONS: usize = 30;

fn derivative(p: IzhikevichParams, v: f64, u: f64, i: f64) -> (f64, f64) {
    (0.04 * v * v + 5.0 * v + 140.0 - u + i, p.a * (p.b * v - u))
}

fn rk4(p: IzhikevichParams, v: f64, u: f64, i: f64, h: f64) -> (f64, f64) {
    let (a1, b1) = derivative(p, v, u, i);
    let (a2, b2) = derivative(p, v + 0.5 * h * a1, u + 0.5 * h * b1, i);
    let (a3, b3) = derivative(p, v + 0.5 * h * a2, u + 0.5 * h * b2, i);
    let (a4, b4) = derivative(p, v + h * a3, u + h * b3, i);
    (v + h / 6.0 * (a1 + 2.0 * a2 + 2.0 * a3 + a4), u + h / 6.0 * (b1 + 2.0 * b2 + 2.0 * b3 + b4))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LifParams {
    /// Resting potential (mV)
    pub v_rest: f64,
    /// Membrane time constant (ms)
    pub tau_m: f64,
    /// Firing threshold (mV)
    pub v_th: f64,
}

impl Default for LifParams {
    fn default() -> Self {
        Self { v_rest: -70.0, tau_m: 50.0, v_th: -20.0 }
    }
}

/// Leaky integrate-and-fire membrane driven by instantaneous voltage jumps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LifState {
    pub v_m: f64,
    pub params: LifParams,
    pub firing_enabled: bool,
}

impl LifState {
    pub fn at_rest(params: LifParams) -> Self {
        Self { v_m: params.v_rest, params, firing_enabled: true }
    }

    /// Relaxes toward rest over `dt` ms. The threshold is tested against the
    /// potential at step entry; a spiking step ends exactly at rest.
    pub fn step(&mut self, dt: f64) -> Result<bool> {
        if !self.v_m.is_finite() {
            return Err(Error::IntegrationFault { layer: Layer::Motor, v: self.v_m, input: 0.0 });
        }
        let LifParams { v_rest, tau_m, v_th } = self.params;
        if self.firing_enabled && self.v_m >= v_th {
            self.v_m = v_rest;
            return Ok(true);
        }
        self.v_m = v_rest + (self.v_m - v_rest) * (-dt / tau_m).exp();
        Ok(false)
    }

    /// Adds a presynaptic voltage jump; the threshold is checked on the next step.
    pub fn receive_spike(&mut self, jump_mv: f64) {
        self.v_m += jump_mv;
    }
}
