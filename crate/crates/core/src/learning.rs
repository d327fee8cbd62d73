//! Reward-modulated STDP for the sensory→interneuron synapses.
//!
//! Spike pairs feed a decaying eligibility trace per synapse; a shared dopamine
//! level, injected once per episode from the gap between the target reflex
//! strength and the motor activation, converts eligibility into weight change.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::arc::{ReflexNetwork, SynapseSet, BETA};
use crate::error::{Error, Result};
use crate::sensory::T_MAX_C;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StdpParams {
    pub a_plus: f64,
    pub a_minus: f64,
    pub tau_plus_ms: f64,
    pub tau_minus_ms: f64,
}

impl Default for StdpParams {
    fn default() -> Self {
        Self { a_plus: 0.01, a_minus: -0.0105, tau_plus_ms: 20.0, tau_minus_ms: 20.0 }
    }
}

impl StdpParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.a_plus > 0.0) {
            return Err(Error::invalid("a_plus", "must be positive"));
        }
        if !(self.a_minus < 0.0) {
            return Err(Error::invalid("a_minus", "must be negative"));
        }
        if !(self.tau_plus_ms > 0.0 && self.tau_minus_ms > 0.0) {
            return Err(Error::invalid("tau_plus_ms/tau_minus_ms", "must be positive"));
        }
        Ok(())
    }

    /// Weight-change contribution of one pair; `delta_t = t_pre - t_post`.
    pub fn window(&self, delta_t_ms: f64) -> f64 {
        if delta_t_ms < 0.0 {
            self.a_plus * (delta_t_ms / self.tau_plus_ms).exp()
        } else {
            self.a_minus * (-delta_t_ms / self.tau_minus_ms).exp()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LearningParams {
    pub stdp: StdpParams,
    pub tau_c_ms: f64,
    pub tau_e_ms: f64,
    pub tau_s_ms: f64,
}

impl Default for LearningParams {
    fn default() -> Self {
        Self { stdp: StdpParams::default(), tau_c_ms: 200.0, tau_e_ms: 500.0, tau_s_ms: 1000.0 }
    }
}

/// Eligibility traces, shared dopamine level, and the pre/post spike traces that
/// accumulate the STDP window over all spike pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct LearningState {
    pub params: LearningParams,
    pub eligibility: Vec<f64>,
    pub dopamine: f64,
    pre_trace: Vec<f64>,
    post_trace: f64,
}

impl LearningState {
    pub fn new(params: LearningParams, synapses: usize) -> Result<Self> {
        params.stdp.validate()?;
        for (name, tau) in [("tau_c_ms", params.tau_c_ms), ("tau_e_ms", params.tau_e_ms), ("tau_s_ms", params.tau_s_ms)]
        {
            if !(tau > 0.0) {
                return Err(Error::invalid(name, "must be positive"));
            }
        }
        Ok(Self {
            params,
            eligibility: vec![0.0; synapses],
            dopamine: 0.0,
            pre_trace: vec![0.0; synapses],
            post_trace: 0.0,
        })
    }

    /// Adds one pair's window value to the eligibility of `synapse`.
    pub fn eligibility_on_pair(&mut self, synapse: usize, delta_t_ms: f64) -> Result<()> {
        let w = self.params.stdp.window(delta_t_ms);
        let e = self.eligibility.get_mut(synapse).ok_or(Error::UnknownSynapse(synapse))?;
        *e += w;
        Ok(())
    }

    /// Accumulates eligibility from this step's spikes via exponential pair traces.
    /// Coincident pre and post spikes count as `delta_t = 0` (depression).
    pub fn observe_spikes(&mut self, pre: &[bool], post: bool, dt: f64) {
        let p = self.params.stdp;
        let pre_decay = (-dt / p.tau_plus_ms).exp();
        let post_decay = (-dt / p.tau_minus_ms).exp();
        self.post_trace *= post_decay;
        if post {
            self.post_trace += 1.0;
        }
        for ((x, e), &fired) in self.pre_trace.iter_mut().zip(self.eligibility.iter_mut()).zip(pre) {
            *x *= pre_decay;
            if fired {
                *e += p.a_minus * self.post_trace;
            }
            if post {
                *e += p.a_plus * *x;
            }
            if fired {
                *x += 1.0;
            }
        }
    }

    /// Integrates weights by `dt·C·e/τ_s` (clamped) and decays `C` and `e`.
    pub fn learning_step(&mut self, weights: &mut SynapseSet, dt: f64) -> Result<()> {
        let LearningParams { tau_c_ms, tau_e_ms, tau_s_ms, .. } = self.params;
        for (i, e) in self.eligibility.iter().enumerate() {
            let delta = dt * self.dopamine * e / tau_s_ms;
            if delta != 0.0 {
                weights.nudge(i, delta)?;
            }
        }
        self.dopamine *= (-dt / tau_c_ms).exp();
        let e_decay = (-dt / tau_e_ms).exp();
        self.eligibility.iter_mut().for_each(|e| *e *= e_decay);
        Ok(())
    }

    pub fn inject_reward(&mut self, reward: f64) {
        self.dopamine += reward;
    }
}

/// Target reflex strength normalised to 1 at the saturation temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReflexTarget {
    pub beta: f64,
    pub t_max_c: f64,
}

impl Default for ReflexTarget {
    fn default() -> Self {
        Self { beta: BETA, t_max_c: T_MAX_C }
    }
}

impl ReflexTarget {
    pub fn normalized_strength(&self, temp_c: f64) -> f64 {
        self.beta.powf(temp_c - self.t_max_c)
    }
}

/// `(v_m - v_rest) / k_m`: 0 at rest, 1 at `v_rest + k_m`.
pub fn normalize_membrane(v_m: f64, v_rest: f64, k_m: f64) -> f64 {
    (v_m - v_rest) / k_m
}

/// Reward at the end of a stimulation phase: positive when the motor under-responds.
pub fn reward(target_strength: f64, activation: f64) -> f64 {
    target_strength - activation
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainerConfig {
    pub episodes: usize,
    pub intensity_range_c: [f64; 2],
    pub stim_ms: f64,
    pub cooling_ms: f64,
    pub cooling_c: f64,
    /// Membrane normalisation scale (mV)
    pub k_m_mv: f64,
    pub initial_weight: f64,
    pub initial_jitter: f64,
    pub rng_seed: u64,
}

impl Default for TrainerConfig {
    fn default() -> Self {
        Self {
            episodes: 5000,
            intensity_range_c: [38.0, 52.0],
            stim_ms: 100.0,
            cooling_ms: 2000.0,
            cooling_c: 35.0,
            k_m_mv: 200.0,
            initial_weight: 0.25,
            initial_jitter: 0.05,
            rng_seed: 1,
        }
    }
}

impl TrainerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.episodes == 0 {
            return Err(Error::invalid("episodes", "at least one episode required"));
        }
        let [lo, hi] = self.intensity_range_c;
        if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
            return Err(Error::invalid("intensity_range_c", format!("[{lo}, {hi}]")));
        }
        if !(self.stim_ms > 0.0 && self.cooling_ms > 0.0) {
            return Err(Error::invalid("stim_ms/cooling_ms", "must be positive"));
        }
        if !(self.k_m_mv > 0.0) {
            return Err(Error::invalid("k_m_mv", "must be positive"));
        }
        Ok(())
    }

    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.rng_seed)
    }

    /// Seeded initial weights `initial_weight ± initial_jitter`.
    pub fn initial_weights(&self, n: usize, rng: &mut impl Rng) -> Vec<f64> {
        (0..n)
            .map(|_| self.initial_weight + self.initial_jitter * (2.0 * rng.gen::<f64>() - 1.0))
            .map(|w| w.max(0.0))
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub episode: usize,
    pub intensity_c: f64,
    pub activation: f64,
    pub reward: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainingLog {
    pub episodes: Vec<EpisodeRecord>,
    pub weight_history: Vec<Vec<f64>>,
    pub converged: bool,
    pub pinned_synapses: Vec<usize>,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("episode,intensity_C,activation,reward\n");
        for r in &self.episodes {
            out.push_str(&format!("{},{},{},{}\n", r.episode, r.intensity_c, r.activation, r.reward));
        }
        out
    }
}

/// Peak normalised motor potential for one ideal stimulus, with firing disabled.
pub fn stimulus_activation(net: &mut ReflexNetwork, intensity: f64, cfg: &TrainerConfig) -> Result<f64> {
    let steps = (cfg.stim_ms / net.dt()).round() as usize;
    let v_rest = net.motor().params.v_rest;
    let mut peak = f64::NEG_INFINITY;
    for _ in 0..steps {
        let out = net.step(intensity)?;
        peak = peak.max(out.motor_peak_mv);
    }
    Ok(normalize_membrane(peak, v_rest, cfg.k_m_mv))
}

/// One stimulation + cooling episode; returns `(reward, activation)`.
pub fn run_episode(
    net: &mut ReflexNetwork,
    cfg: &TrainerConfig,
    state: &mut LearningState,
    target: &ReflexTarget,
    intensity: f64,
) -> Result<(f64, f64)> {
    if net.motor().firing_enabled {
        return Err(Error::ContractViolation("motor neuron must not fire during training".into()));
    }
    let dt = net.dt();
    let v_rest = net.motor().params.v_rest;
    let stim_steps = (cfg.stim_ms / dt).round() as usize;
    let cool_steps = (cfg.cooling_ms / dt).round() as usize;
    let mut peak = f64::NEG_INFINITY;
    for k in 0..stim_steps + cool_steps {
        let stim = k < stim_steps;
        let out = net.step(if stim { intensity } else { cfg.cooling_c })?;
        if stim {
            peak = peak.max(out.motor_peak_mv);
        }
        state.observe_spikes(net.sensory().spiked(), out.interneuron, dt);
        if k + 1 == stim_steps {
            let activation = normalize_membrane(peak, v_rest, cfg.k_m_mv);
            state.inject_reward(reward(target.normalized_strength(intensity), activation));
        }
        state.learning_step(net.synapses_mut(), dt)?;
    }
    let activation = normalize_membrane(peak, v_rest, cfg.k_m_mv);
    Ok((reward(target.normalized_strength(intensity), activation), activation))
}

/// Repeats episodes at seeded uniform random intensities. The network's motor
/// firing is disabled for the duration and restored afterwards.
pub fn train(
    net: &mut ReflexNetwork,
    cfg: &TrainerConfig,
    params: LearningParams,
    target: &ReflexTarget,
) -> Result<TrainingLog> {
    cfg.validate()?;
    let mut rng = cfg.rng();
    let init = cfg.initial_weights(net.synapses().len(), &mut rng);
    *net.synapses_mut() =
        SynapseSet::new(init.into_iter().map(|w| w.min(net.synapses().s_max())).collect(), net.synapses().s_max())?;
    let firing = net.motor().firing_enabled;
    net.set_motor_firing(false);
    net.reset();

    let mut state = LearningState::new(params, net.synapses().len())?;
    let mut log = TrainingLog::default();
    let [lo, hi] = cfg.intensity_range_c;
    for episode in 0..cfg.episodes {
        let intensity = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
        let (reward, activation) = run_episode(net, cfg, &mut state, target, intensity)?;
        log.episodes.push(EpisodeRecord { episode, intensity_c: intensity, activation, reward });
        log.weight_history.push(net.synapses().weights().to_vec());
    }
    net.set_motor_firing(firing);
    net.reset();

    log.pinned_synapses = pinned_synapses(&log.weight_history, net.synapses().s_max());
    log.converged = log.pinned_synapses.is_empty();
    Ok(log)
}

/// Synapses sitting on a bound for more than half of the final quarter of episodes.
fn pinned_synapses(history: &[Vec<f64>], s_max: f64) -> Vec<usize> {
    let quarter = &history[history.len() - history.len().div_ceil(4)..];
    let n = history.first().map_or(0, Vec::len);
    (0..n)
        .filter(|&i| {
            let pinned = quarter.iter().filter(|w| w[i] <= 0.0 || w[i] >= s_max).count();
            2 * pinned > quarter.len()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_values() {
        let p = StdpParams { a_plus: 0.01, ..Default::default() };
        assert!((p.window(-10.0) - 0.01 * (-0.5f64).exp()).abs() < 1e-15);
        assert!((p.window(-10.0) - 0.006065).abs() < 1e-6);
        assert_eq!(p.window(0.0), p.a_minus);
        assert!(p.window(-1e6).abs() < 1e-300);
    }

    #[test]
    fn window_sign() {
        let p = StdpParams::default();
        for k in 1..200 {
            let dt = k as f64 * 0.5;
            assert!(p.window(-dt) > 0.0);
            assert!(p.window(dt) < 0.0);
        }
    }

    #[test]
    fn pair_signs() {
        let mut s = LearningState::new(LearningParams::default(), 3).unwrap();
        s.eligibility_on_pair(0, -5.0).unwrap();
        s.eligibility_on_pair(1, 5.0).unwrap();
        assert!(s.eligibility[0] > 0.0);
        assert!(s.eligibility[1] < 0.0);
        assert!(matches!(s.eligibility_on_pair(3, 1.0), Err(Error::UnknownSynapse(3))));
    }

    #[test]
    fn traces_equal_sum_over_all_pairs() {
        // oracle: sum the window over every (pre, post) pair directly
        let p = LearningParams::default();
        let pre_times = [3.0, 11.0, 30.0, 31.5];
        let post_times = [10.0, 31.5, 52.0];
        let dt = 0.5;
        let mut s = LearningState::new(p, 1).unwrap();
        for k in 1..=200 {
            let t = k as f64 * dt;
            let pre = pre_times.iter().any(|&x| (x - t).abs() < 1e-9);
            let post = post_times.iter().any(|&x| (x - t).abs() < 1e-9);
            s.observe_spikes(&[pre], post, dt);
        }
        let oracle: f64 = pre_times.iter().flat_map(|&a| post_times.iter().map(move |&b| p.stdp.window(a - b))).sum();
        assert!((s.eligibility[0] - oracle).abs() < 1e-12, "{} vs {oracle}", s.eligibility[0]);
    }

    #[test]
    fn zero_dopamine_leaves_weights() {
        let mut s = LearningState::new(LearningParams::default(), 2).unwrap();
        s.eligibility = vec![5.0, -3.0];
        let mut w = SynapseSet::new(vec![0.3, 0.6], 1.0).unwrap();
        for _ in 0..1000 {
            s.learning_step(&mut w, 0.1).unwrap();
        }
        assert_eq!(w.weights(), &[0.3, 0.6]);
    }

    #[test]
    fn reward_consolidates_positive_eligibility() {
        let mut s = LearningState::new(LearningParams::default(), 1).unwrap();
        s.eligibility = vec![0.5];
        s.inject_reward(1.0);
        let mut w = SynapseSet::new(vec![0.3], 1.0).unwrap();
        s.learning_step(&mut w, 0.1).unwrap();
        assert!(w.weights()[0] > 0.3);
    }

    #[test]
    fn linear_integration_without_decay() {
        let params =
            LearningParams { tau_c_ms: f64::INFINITY, tau_e_ms: f64::INFINITY, tau_s_ms: 1000.0, ..Default::default() };
        let mut s = LearningState::new(params, 1).unwrap();
        s.eligibility = vec![1.0];
        s.inject_reward(1.0);
        let mut w = SynapseSet::new(vec![0.2], 1.0).unwrap();
        for _ in 0..1000 {
            s.learning_step(&mut w, 0.1).unwrap();
        }
        assert!((w.weights()[0] - 0.3).abs() < 1e-9);
    }

    #[test]
    fn dopamine_and_eligibility_decay_exponentially() {
        let mut s = LearningState::new(LearningParams::default(), 1).unwrap();
        s.eligibility = vec![2.0];
        s.dopamine = -1.5;
        let mut w = SynapseSet::new(vec![0.5], 1.0).unwrap();
        // weights move but C and e only decay
        for _ in 0..3000 {
            s.learning_step(&mut w, 0.1).unwrap();
        }
        let c_expect = -1.5 * (-300.0f64 / 200.0).exp();
        let e_expect = 2.0 * (-300.0f64 / 500.0).exp();
        assert!(((s.dopamine - c_expect) / c_expect).abs() < 1e-9);
        assert!(((s.eligibility[0] - e_expect) / e_expect).abs() < 1e-9);
    }

    #[test]
    fn target_curve() {
        let t = ReflexTarget::default();
        assert_eq!(t.normalized_strength(52.0), 1.0);
        assert!((t.normalized_strength(47.0) - 0.3053).abs() < 5e-4);
        assert!((t.normalized_strength(42.0) - 1.268f64.powi(-10)).abs() < 1e-12);
        assert!((t.normalized_strength(42.0) - 0.0931).abs() < 1e-4);
        assert!((0..100).all(|i| {
            let x = 30.0 + i as f64 * 0.3;
            t.normalized_strength(x + 0.3) > t.normalized_strength(x)
        }));
    }

    #[test]
    fn membrane_normalisation() {
        assert_eq!(normalize_membrane(-70.0, -70.0, 50.0), 0.0);
        assert_eq!(normalize_membrane(-20.0, -70.0, 50.0), 1.0);
        assert_eq!(normalize_membrane(-45.0, -70.0, 50.0), 0.5);
    }

    #[test]
    fn reward_extremes() {
        let t = ReflexTarget::default();
        assert_eq!(reward(t.normalized_strength(52.0), 0.0), 1.0);
        assert!((reward(t.normalized_strength(42.0), 1.0) - (1.268f64.powi(-10) - 1.0)).abs() < 1e-12);
        assert!((reward(t.normalized_strength(42.0), 1.0) + 0.907).abs() < 1e-3);
        assert_eq!(reward(0.4, 0.4), 0.0);
    }

    #[test]
    fn pinned_detection() {
        let mut h = vec![vec![0.5, 0.5]; 8];
        for w in h.iter_mut().skip(5) {
            w[1] = 1.0;
        }
        assert_eq!(pinned_synapses(&h, 1.0), vec![1]);
    }
}
