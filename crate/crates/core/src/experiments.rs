//! The experiment drivers behind the command-line tool, their reports and the surrogate traces.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arc::{calibrate_decoder, response_latency, temperature_grid, ReflexEvent, ReflexNetwork};
use crate::baselines::{
    tune_ffsnn, AnalogDetector, ClassifierDetector, FfSnnDetector, COLD_ROOM_BOUNDARY_C, ROOM_HOT_BOUNDARY_C,
};
use crate::config::RunConfig;
use crate::detector::{Detector, DetectorEvent, DetectorEventKind, NeuromorphicDetector};
use crate::error::{Error, Result};
use crate::learning::{reward, stimulus_activation, train, TrainingLog};
use crate::stimulus::{render_pulse_train, PulseTrain, StimulusTrace};

/// Trigger temperature the analog circuit is expected to reproduce (°C).
pub const ANALOG_REFERENCE_C: f64 = 43.7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.to_string(), passed, detail: detail.into() }
    }
}

/// One row of a sweep: the swept value and named measurements (`None` when absent).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub x: f64,
    pub values: Vec<(String, Option<f64>)>,
}

impl SweepRecord {
    pub fn new(x: f64) -> Self {
        Self { x, values: Vec::new() }
    }

    pub fn with(mut self, name: &str, value: Option<f64>) -> Self {
        self.values.push((name.to_string(), value));
        self
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.values.iter().find(|(n, _)| n == name).and_then(|(_, v)| *v)
    }
}

/// Spike times of one neuron in one run, strictly increasing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuronRaster {
    pub run: String,
    pub neuron: String,
    pub spikes_ms: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub experiment: String,
    pub config: RunConfig,
    pub sweep_label: String,
    pub records: Vec<SweepRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub raster: Vec<NeuronRaster>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub events: Vec<DetectorEvent>,
    pub checks: Vec<Check>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub notes: Vec<String>,
}

impl ExperimentReport {
    pub fn new(experiment: &str, config: &RunConfig, sweep_label: &str) -> Self {
        Self {
            experiment: experiment.to_string(),
            config: config.clone(),
            sweep_label: sweep_label.to_string(),
            records: Vec::new(),
            raster: Vec::new(),
            events: Vec::new(),
            checks: Vec::new(),
            notes: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialises")
    }

    /// Sweep records as CSV; missing values are empty cells.
    pub fn records_csv(&self) -> String {
        let mut out = self.sweep_label.clone();
        if let Some(first) = self.records.first() {
            for (name, _) in &first.values {
                out.push(',');
                out.push_str(name);
            }
        }
        out.push('\n');
        for r in &self.records {
            out.push_str(&r.x.to_string());
            for (_, v) in &r.values {
                out.push(',');
                if let Some(v) = v {
                    out.push_str(&v.to_string());
                }
            }
            out.push('\n');
        }
        out
    }

    /// `run,neuron,t_ms`, ordered by run, then time, then neuron.
    pub fn raster_csv(&self) -> String {
        let mut rows: Vec<(&str, f64, &str)> = self
            .raster
            .iter()
            .flat_map(|r| r.spikes_ms.iter().map(move |&t| (r.run.as_str(), t, r.neuron.as_str())))
            .collect();
        rows.sort_by(|a, b| a.0.cmp(b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(b.2)));
        let mut out = String::from("run,neuron,t_ms\n");
        for (run, t, neuron) in rows {
            let _ = writeln!(out, "{run},{neuron},{}", round6(t));
        }
        out
    }
}

fn round6(x: f64) -> f64 {
    (x * 1e6).round() / 1e6
}

pub fn neuron_names(net: &ReflexNetwork) -> Vec<String> {
    let mut names: Vec<String> = net.sensory().neurons().iter().map(|n| format!("s_{}", n.curve.preferred)).collect();
    names.push("interneuron".into());
    names.push("motor".into());
    names
}

/// Spikes of every neuron while a trace is replayed, each tagged with its sample index.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRun {
    pub names: Vec<String>,
    pub spikes: Vec<Vec<(f64, usize)>>,
    pub events: Vec<ReflexEvent>,
}

impl TraceRun {
    pub fn raster(&self, run: &str) -> Vec<NeuronRaster> {
        self.names
            .iter()
            .zip(&self.spikes)
            .map(|(n, s)| NeuronRaster {
                run: run.to_string(),
                neuron: n.clone(),
                spikes_ms: s.iter().map(|p| p.0).collect(),
            })
            .collect()
    }

    pub fn motor(&self) -> &[(f64, usize)] {
        &self.spikes[self.spikes.len() - 1]
    }
}

/// Replays `trace` from rest, holding each sample for one sample period.
pub fn replay(net: &ReflexNetwork, trace: &StimulusTrace) -> Result<TraceRun> {
    let mut net = net.clone();
    net.reset();
    let names = neuron_names(&net);
    let n_sensory = net.sensory().len();
    let steps = (trace.period_ms() / net.dt()).round().max(1.0) as usize;
    let offset_ms = trace.t_start_s * 1000.0;
    let mut spikes = vec![Vec::new(); names.len()];
    let mut events = Vec::new();
    for (i, (_, temp)) in trace.iter().enumerate() {
        for _ in 0..steps {
            let out = net.step_with_events(temp, &mut events)?;
            let t = offset_ms + net.time_ms();
            for (k, &s) in net.sensory().spiked().iter().enumerate() {
                if s {
                    spikes[k].push((t, i));
                }
            }
            if out.interneuron {
                spikes[n_sensory].push((t, i));
            }
            if out.motor {
                spikes[n_sensory + 1].push((t, i));
            }
        }
    }
    for e in &mut events {
        e.t_ms += offset_ms;
    }
    Ok(TraceRun { names, spikes, events })
}

/// Result of the training command.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub net: ReflexNetwork,
    pub log: TrainingLog,
    pub report: ExperimentReport,
}

/// Trains from seeded initial weights, then validates the learned activation curve.
pub fn run_train(cfg: &RunConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    let n = cfg.sensory.preferred_temps_c.len();
    let trainer = cfg.trainer();
    let mut net = cfg.network_with(vec![trainer.initial_weight.min(cfg.arc.s_max); n])?;
    let log = train(&mut net, &trainer, cfg.learning, &cfg.target)?;

    let mut report = ExperimentReport::new("train", cfg, "temp_C");
    let mut abs_err = 0.0;
    let mut sign_mismatch = Vec::new();
    let grid = temperature_grid(cfg.calibration.sweep_from_c, cfg.calibration.sweep_to_c, cfg.calibration.sweep_step_c);
    for &temp in &grid {
        let mut probe = net.clone();
        probe.reset();
        probe.set_motor_firing(false);
        let activation = stimulus_activation(&mut probe, temp, &trainer)?;
        let target = cfg.target.normalized_strength(temp);
        let r = reward(target, activation);
        let error = activation - target;
        abs_err += error.abs();
        if error != 0.0 && r.signum() != -error.signum() {
            sign_mismatch.push(temp);
        }
        report.records.push(
            SweepRecord::new(temp)
                .with("activation", Some(activation))
                .with("target", Some(target))
                .with("reward", Some(r)),
        );
    }
    let mae = abs_err / grid.len() as f64;
    let weights = net.synapses().weights().to_vec();
    report.checks.push(Check::new(
        "converged",
        log.converged,
        if log.converged {
            "no synapse pinned at a bound".to_string()
        } else {
            format!("synapses pinned at a bound: {:?}", log.pinned_synapses)
        },
    ));
    report.checks.push(Check::new("validation_mae", mae < 0.1, format!("mean absolute error {mae:.4} (limit 0.1)")));
    report.checks.push(Check::new(
        "reward_sign",
        sign_mismatch.is_empty(),
        if sign_mismatch.is_empty() {
            format!("reward opposes the response error at all {} points", grid.len())
        } else {
            format!("sign mismatch at {sign_mismatch:?}")
        },
    ));
    report.checks.push(Check::new(
        "weights_interior",
        weights.iter().all(|&w| w > 0.0 && w < cfg.arc.s_max),
        format!("weights {weights:?}"),
    ));
    Ok(TrainOutcome { net, log, report })
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(xs: &[f64], ys: &[f64]) -> f64 {
    let (rx, ry) = (ranks(xs), ranks(ys));
    pearson(&rx, &ry)
}

fn ranks(v: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
    let mut out = vec![0.0; v.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && v[idx[j + 1]] == v[idx[i]] {
            j += 1;
        }
        let rank = 0.5 * (i + j) as f64 + 1.0;
        for &k in &idx[i..=j] {
            out[k] = rank;
        }
        i = j + 1;
    }
    out
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    sxy / (sxx * syy).sqrt()
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    sxy / sxx
}

/// Calibrates the decoder on `net`, then sweeps ideal stimuli and decodes each latency.
/// Returns the report and the network carrying the fitted decoder.
pub fn run_curve(cfg: &RunConfig, net: &ReflexNetwork) -> Result<(ExperimentReport, ReflexNetwork)> {
    let decoder = calibrate_decoder(net, &cfg.calibration)?;
    let mut net = net.clone();
    net.set_decoder(Some(decoder));

    let mut report = ExperimentReport::new("curve", cfg, "temp_C");
    report.notes.push(format!("decoder dt_min {:.4} ms, k {:.6} ms", decoder.dt_min_ms, decoder.k_ms));
    let grid = temperature_grid(cfg.curve.from_c, cfg.curve.to_c, cfg.curve.step_c);
    let mut temps = Vec::new();
    let mut strengths = Vec::new();
    let mut missing = Vec::new();
    for &temp in &grid {
        let latency = response_latency(&net, temp, &cfg.calibration)?;
        let g_s = latency.map(|dt| decoder.decode_saturating(dt));
        match g_s {
            Some(g) => {
                temps.push(temp);
                strengths.push(g);
            }
            None => missing.push(temp),
        }
        report.records.push(SweepRecord::new(temp).with("delta_t_ms", latency).with("g_s", g_s));
    }

    let complete = missing.is_empty() && strengths.len() >= 2;
    let rho = if complete { spearman(&temps, &strengths) } else { f64::NAN };
    report.checks.push(Check::new(
        "monotone",
        complete && rho >= 1.0 - 1e-12,
        if complete { format!("Spearman rho {rho:.6}") } else { format!("no motor response at {missing:?}") },
    ));

    let ln_beta = cfg.target.beta.ln();
    let slope =
        if complete { ols_slope(&temps, &strengths.iter().map(|g| g.ln()).collect::<Vec<_>>()) } else { f64::NAN };
    let rel = (slope - ln_beta).abs() / ln_beta;
    report.checks.push(Check::new(
        "log_slope",
        rel <= cfg.curve.slope_tolerance,
        format!("slope {slope:.5} per °C vs ln β {ln_beta:.5} ({:.1}% off)", 100.0 * rel),
    ));

    let anchor = report.records.last().and_then(|r| r.get("g_s"));
    report.checks.push(Check::new(
        "anchor",
        anchor.is_some_and(|g| (g - 1.0).abs() <= cfg.curve.anchor_tolerance),
        format!("g_s({} °C) = {}", cfg.curve.to_c, anchor.map_or("none".into(), |g| format!("{g:.4}"))),
    ));
    Ok((report, net))
}

/// Runs `trace` and its clipped copy with the configured descending gain.
pub fn run_ss(cfg: &RunConfig, net: &ReflexNetwork, trace: &StimulusTrace) -> Result<ExperimentReport> {
    let ss = &cfg.ss;
    let mut net = net.clone();
    net.set_descending_control(ss.epsilon)?;
    let clipped = trace.clipped(ss.clip_c);
    let full = replay(&net, trace)?;
    let cut = replay(&net, &clipped)?;

    let mut report = ExperimentReport::new("ss", cfg, "temp_C");
    report.raster = full.raster("full");
    report.raster.extend(cut.raster("clipped"));

    // the sensory neuron with the hottest preferred temperature
    let hot = net.sensory().len() - 1;
    let hot_name = full.names[hot].clone();
    let temp_of = |i: usize| trace.samples[i];
    let peak = trace.peak();

    let early: Vec<f64> =
        full.spikes[hot].iter().filter(|&&(_, i)| temp_of(i) <= ss.silent_at_or_below_c).map(|p| p.0).collect();
    let in_peak = full.spikes[hot].iter().filter(|&&(_, i)| temp_of(i) >= peak - ss.peak_region_c).count();
    let first_hot = full.spikes[hot].first().map(|p| p.0);
    let first_motor = full.motor().first().map(|p| p.0);
    let motor_after = match (first_motor, first_hot) {
        (None, _) => false,
        (Some(m), Some(h)) => m >= h,
        (Some(_), None) => false,
    };

    for temp_bin in
        temperature_grid(trace.samples.iter().copied().fold(f64::INFINITY, f64::min).floor(), peak.ceil(), 1.0)
    {
        let mut rec = SweepRecord::new(temp_bin);
        for (k, name) in full.names.iter().enumerate() {
            let count = full.spikes[k].iter().filter(|&&(_, i)| temp_of(i).floor() == temp_bin).count();
            rec = rec.with(name, Some(count as f64));
        }
        report.records.push(rec);
    }

    let mut checks = vec![
        Check::new(
            "hot_neuron_silent_below",
            early.is_empty(),
            format!(
                "{} spikes of {hot_name} while the trace is at or below {} °C",
                early.len(),
                ss.silent_at_or_below_c
            ),
        ),
        Check::new(
            "hot_neuron_recruited_at_peak",
            in_peak > 0,
            format!("{in_peak} spikes of {hot_name} within {} °C of the {peak} °C peak", ss.peak_region_c),
        ),
        Check::new(
            "motor_after_recruitment",
            motor_after,
            format!(
                "first motor spike {} ms, first {hot_name} spike {} ms",
                first_motor.map_or("none".into(), |t| format!("{t:.1}")),
                first_hot.map_or("none".into(), |t| format!("{t:.1}"))
            ),
        ),
        Check::new(
            "clipped_hot_neuron_silent",
            cut.spikes[hot].is_empty(),
            format!("{} spikes of {hot_name} with the trace clipped at {} °C", cut.spikes[hot].len(), ss.clip_c),
        ),
        Check::new(
            "clipped_motor_silent",
            cut.motor().is_empty(),
            format!("{} motor spikes with the trace clipped at {} °C", cut.motor().len(), ss.clip_c),
        ),
    ];
    if net.epsilon() == 0.0 {
        for c in &mut checks {
            c.passed = false;
            c.detail = format!("no interneuron drive (epsilon = 0); {}", c.detail);
        }
    }
    report.checks = checks;
    Ok(report)
}

/// Motor spikes evoked by `train` followed by `tail_ms` of baseline, from rest.
pub fn pulse_response(net: &ReflexNetwork, train: &PulseTrain, tail_ms: f64, rate_hz: f64) -> Result<usize> {
    let mut trace = render_pulse_train(train, rate_hz)?;
    let tail = (tail_ms * rate_hz / 1000.0).round() as usize;
    trace.samples.extend(std::iter::repeat_n(train.baseline_c, tail));
    Ok(replay(net, &trace)?.motor().len())
}

/// Lowest peak on the lattice `from + i·step` whose train evokes a motor spike.
/// Assumes the response grows with the peak; `None` when even `to` is silent.
pub fn lattice_threshold(
    net: &ReflexNetwork,
    template: &PulseTrain,
    tail_ms: f64,
    rate_hz: f64,
    (from, to, step): (f64, f64, f64),
) -> Result<Option<f64>> {
    let n = ((to - from) / step + 1e-9).floor() as i64;
    let peak = |i: i64| round6(from + i as f64 * step);
    let fires = |i: i64| -> Result<bool> {
        Ok(pulse_response(net, &PulseTrain { peak_c: peak(i), ..*template }, tail_ms, rate_hz)? > 0)
    };
    if !fires(n)? {
        return Ok(None);
    }
    if fires(0)? {
        return Ok(Some(peak(0)));
    }
    let (mut lo, mut hi) = (0, n);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if fires(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(Some(peak(hi)))
}

pub fn run_ts(cfg: &RunConfig, net: &ReflexNetwork) -> Result<ExperimentReport> {
    let ts = &cfg.ts;
    let rate = cfg.sample_rate_hz;
    let lattice = (ts.search_from_c, ts.search_to_c, ts.resolution_c);
    let train_at = |peak_c: f64, period_ms: f64, count: usize| PulseTrain {
        peak_c,
        baseline_c: cfg.baseline_c,
        pulse_ms: ts.pulse_ms,
        period_ms,
        count,
    };
    let mut report = ExperimentReport::new("ts", cfg, "period_ms");

    let single = lattice_threshold(net, &train_at(0.0, ts.period_ms, 1), ts.tail_ms, rate, lattice)?;
    let Some(single) = single else {
        report.checks.push(Check::new(
            "single_pulse_threshold",
            false,
            format!("no single pulse up to {} °C evokes a motor spike", ts.search_to_c),
        ));
        return Ok(report);
    };
    let peak = round6(single - ts.below_threshold_c);
    report.notes.push(format!("single-pulse threshold {single} °C; test peak {peak} °C"));

    let alone = pulse_response(net, &train_at(peak, ts.period_ms, 1), ts.tail_ms, rate)?;
    let summed = pulse_response(net, &train_at(peak, ts.period_ms, ts.count), ts.tail_ms, rate)?;
    let decayed = pulse_response(net, &train_at(peak, ts.decayed_period_ms, ts.count), ts.tail_ms, rate)?;
    report.checks.push(Check::new(
        "single_pulse_silent",
        alone == 0,
        format!("{alone} motor spikes for one pulse at {peak} °C"),
    ));
    report.checks.push(Check::new(
        "train_summates",
        summed > 0,
        format!("{summed} motor spikes for {} pulses at {} ms period", ts.count, ts.period_ms),
    ));
    report.checks.push(Check::new(
        "summation_decays",
        decayed == 0,
        format!("{decayed} motor spikes for {} pulses at {} ms period", ts.count, ts.decayed_period_ms),
    ));

    let mut periods = ts.sweep_periods_ms.clone();
    periods.sort_by(f64::total_cmp);
    let mut thresholds = Vec::new();
    for &period in &periods {
        let thr = lattice_threshold(net, &train_at(0.0, period, ts.count), ts.tail_ms, rate, lattice)?;
        thresholds.push(thr);
        report.records.push(
            SweepRecord::new(period)
                .with("frequency_hz", Some(1000.0 / period))
                .with("train_threshold_C", thr)
                .with("single_threshold_C", Some(single)),
        );
    }
    // higher frequency (shorter period) must not need a hotter peak
    let ordered =
        thresholds.iter().all(Option::is_some) && thresholds.windows(2).all(|w| w[0].unwrap() <= w[1].unwrap() + 1e-9);
    report.checks.push(Check::new(
        "threshold_vs_frequency",
        ordered,
        format!(
            "thresholds {:?} °C at periods {:?} ms",
            thresholds.iter().map(|t| t.map_or(f64::NAN, |v| v)).collect::<Vec<_>>(),
            periods
        ),
    ));
    Ok(report)
}

/// One detector's outputs per sample, its events and the fault that stopped it, if any.
#[derive(Debug, Clone)]
pub struct DetectorRun {
    pub name: String,
    pub outputs: Vec<String>,
    pub strengths: Vec<Option<f64>>,
    pub spike_counts: Vec<usize>,
    pub events: Vec<DetectorEvent>,
    pub fault: Option<String>,
}

fn run_detector(det: &mut dyn Detector, trace: &StimulusTrace) -> DetectorRun {
    det.reset();
    let mut run = DetectorRun {
        name: det.name().to_string(),
        outputs: Vec::with_capacity(trace.len()),
        strengths: Vec::with_capacity(trace.len()),
        spike_counts: Vec::with_capacity(trace.len()),
        events: Vec::new(),
        fault: None,
    };
    for (t_s, temp) in trace.iter() {
        if run.fault.is_some() {
            run.outputs.push(String::new());
            run.strengths.push(None);
            run.spike_counts.push(0);
            continue;
        }
        match det.step(t_s, temp) {
            Ok(events) => {
                run.spike_counts.push(events.iter().filter(|e| e.kind == DetectorEventKind::Spike).count());
                run.strengths.push(events.iter().rev().find_map(|e| e.g_s));
                run.outputs.push(det.output());
                run.events.extend(events);
            }
            Err(e) => {
                log::warn!("{} detector fault at {t_s} s: {e}", run.name);
                run.fault = Some(format!("{t_s} s: {e}"));
                run.outputs.push(String::new());
                run.strengths.push(None);
                run.spike_counts.push(0);
            }
        }
    }
    run
}

/// A stretch of constant temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Plateau {
    pub temp_c: f64,
    pub first: usize,
    pub last: usize,
}

/// Maximal runs of identical samples lasting at least `min_ms`.
pub fn find_plateaus(trace: &StimulusTrace, min_ms: f64) -> Vec<Plateau> {
    let min_len = (min_ms / trace.period_ms()).ceil() as usize;
    let mut out = Vec::new();
    let mut start = 0;
    for i in 1..=trace.len() {
        if i == trace.len() || (trace.samples[i] - trace.samples[start]).abs() > 1e-9 {
            if i - start >= min_len.max(2) {
                out.push(Plateau { temp_c: trace.samples[start], first: start, last: i - 1 });
            }
            start = i;
        }
    }
    out
}

/// Four detectors on one trace: per-sample timeline, merged events and the comparison checks.
#[derive(Debug, Clone)]
pub struct CompareOutcome {
    pub report: ExperimentReport,
    pub timeline_csv: String,
}

pub fn run_compare(cfg: &RunConfig, net: &ReflexNetwork, trace: &StimulusTrace) -> Result<CompareOutcome> {
    if trace.is_empty() {
        return Err(Error::invalid("trace", "empty trace"));
    }
    let mut report = ExperimentReport::new("compare", cfg, "plateau_C");
    let mut net = net.clone();
    if net.decoder().is_none() {
        let (_, calibrated) = run_curve(cfg, &net)?;
        net = calibrated;
        report.notes.push("weights carried no decoder; calibrated before the comparison".into());
    }
    let period = trace.period_ms();
    let ffsnn = tune_ffsnn(cfg.baselines.ffsnn_target_c, &cfg.baselines.ffsnn)?;
    let mut detectors: Vec<Box<dyn Detector + Send>> = vec![
        Box::new(NeuromorphicDetector::new(net, period)),
        Box::new(AnalogDetector { circuit: cfg.baselines.thermistor.clone() }),
        Box::new(ClassifierDetector::new(cfg.baselines.classifier)),
        Box::new(FfSnnDetector { snn: ffsnn, sample_period_ms: period }),
    ];
    let runs: Vec<DetectorRun> = std::thread::scope(|s| {
        let handles: Vec<_> = detectors.iter_mut().map(|d| s.spawn(move || run_detector(d.as_mut(), trace))).collect();
        handles.into_iter().map(|h| h.join().expect("detector thread panicked")).collect()
    });
    let [neuro, analog, classifier, ff] = &runs[..] else { unreachable!("four detectors") };

    for r in &runs {
        if let Some(f) = &r.fault {
            report.notes.push(format!("{} fault: {f}", r.name));
        }
    }
    let mut events: Vec<DetectorEvent> = runs.iter().flat_map(|r| r.events.iter().cloned()).collect();
    events.sort_by(|a, b| a.t_s.total_cmp(&b.t_s));
    report.events = events;

    let mut timeline =
        String::from("t_s,temp_C,neuromorphic_spikes,neuromorphic_g_s,analog_latched,classifier_class,ffsnn_noxious\n");
    for (i, (t, temp)) in trace.iter().enumerate() {
        let _ = writeln!(
            timeline,
            "{},{},{},{},{},{},{}",
            round6(t),
            temp,
            neuro.spike_counts[i],
            neuro.strengths[i].map_or(String::new(), |g| format!("{g:.6}")),
            analog.outputs[i],
            classifier.outputs[i],
            ff.outputs[i]
        );
    }

    let peak = trace.peak();
    let first_trigger =
        |run: &DetectorRun| run.events.iter().find(|e| e.kind == DetectorEventKind::Trigger).map(|e| e.temp_c);
    let cc = &cfg.compare;
    report.checks.push(crossing_check(
        "analog_trigger",
        first_trigger(analog),
        ANALOG_REFERENCE_C,
        cc.analog_tolerance_c,
        peak,
    ));
    report.checks.push(crossing_check(
        "ffsnn_trigger",
        first_trigger(ff),
        cfg.baselines.ffsnn_target_c,
        cc.ffsnn_tolerance_c,
        peak,
    ));
    report.checks.push(classifier_check(cfg, classifier));

    let plateaus: Vec<Plateau> =
        find_plateaus(trace, cc.plateau_min_ms).into_iter().filter(|p| p.temp_c >= cc.plateau_min_c).collect();
    let settle = (cc.plateau_settle_ms / period).ceil() as usize;
    let window = |p: &Plateau| (p.first + settle).min(p.last)..=p.last;
    let mut distinct = BTreeSet::new();
    let mut summaries = Vec::new();
    for p in &plateaus {
        let g: Vec<f64> = window(p).filter_map(|i| neuro.strengths[i]).collect();
        distinct.extend(g.iter().map(|v| (v * 1e3).round() as i64));
        let mean = (!g.is_empty()).then(|| g.iter().sum::<f64>() / g.len() as f64);
        let outputs = |run: &DetectorRun| -> BTreeSet<String> { window(p).map(|i| run.outputs[i].clone()).collect() };
        let mut rec = SweepRecord::new(p.temp_c)
            .with("start_s", Some(trace.time_s(p.first)))
            .with("end_s", Some(trace.time_s(p.last)))
            .with("strength_events", Some(g.len() as f64))
            .with("mean_g_s", mean);
        for run in [analog, classifier, ff] {
            let set = outputs(run);
            report.notes.push(format!("{} on the {} °C plateau: {:?}", run.name, p.temp_c, set));
            rec = rec.with(&format!("{}_states", run.name), Some(set.len() as f64));
        }
        report.records.push(rec);
        summaries.push((p, mean, [outputs(analog), outputs(classifier), outputs(ff)]));
    }

    if !plateaus.is_empty() {
        report.checks.push(Check::new(
            "strength_graded",
            distinct.len() >= 3,
            format!(
                "{} distinct g_s values (to 1e-3) across {} super-threshold plateaus",
                distinct.len(),
                plateaus.len()
            ),
        ));
    }
    if summaries.len() >= 2 {
        let reference = &summaries[0].2;
        let binary =
            summaries.iter().all(|(_, _, outs)| outs.iter().zip(reference).all(|(a, b)| a.len() == 1 && a == b));
        report.checks.push(Check::new(
            "baselines_identical_across_plateaus",
            binary,
            format!(
                "baseline outputs per plateau: {}",
                summaries.iter().map(|(p, _, o)| format!("{} °C {:?}", p.temp_c, o)).collect::<Vec<_>>().join("; ")
            ),
        ));
        let means: Vec<Option<f64>> = summaries.iter().map(|s| s.1).collect();
        let spread = if means.iter().all(Option::is_some) {
            let v: Vec<f64> = means.iter().flatten().copied().collect();
            v.iter().copied().fold(f64::NEG_INFINITY, f64::max) - v.iter().copied().fold(f64::INFINITY, f64::min)
        } else {
            f64::NAN
        };
        report.checks.push(Check::new(
            "strength_differs_across_plateaus",
            spread >= cc.min_strength_difference,
            format!("mean g_s per plateau {means:?}; spread {spread:.4} (need {})", cc.min_strength_difference),
        ));
    } else {
        report.notes.push(format!("{} super-threshold plateau(s); plateau comparison skipped", summaries.len()));
    }
    Ok(CompareOutcome { report, timeline_csv: timeline })
}

/// A detector must trigger within `tol` of `expected` when the trace goes past it,
/// and must stay silent when the trace never reaches `expected - tol`.
fn crossing_check(name: &str, trigger: Option<f64>, expected: f64, tol: f64, peak: f64) -> Check {
    match trigger {
        Some(t) => Check::new(
            name,
            (t - expected).abs() <= tol,
            format!("triggered at {t:.3} °C (expected {expected} ±{tol})"),
        ),
        None if peak < expected - tol => Check::new(name, true, format!("silent; trace peaks at {peak} °C")),
        None => Check::new(name, false, format!("no trigger although the trace reaches {peak} °C")),
    }
}

fn classifier_check(cfg: &RunConfig, run: &DetectorRun) -> Check {
    let tol = cfg.compare.classifier_tolerance_c;
    let reference = [COLD_ROOM_BOUNDARY_C, ROOM_HOT_BOUNDARY_C];
    let (a, b) = cfg.baselines.classifier.boundaries();
    let learned_ok = (a - reference[0]).abs() <= tol && (b - reference[1]).abs() <= tol;
    let changes: Vec<f64> =
        run.events.iter().filter(|e| e.kind == DetectorEventKind::ClassChange).map(|e| e.temp_c).collect();
    let changes_ok = changes.iter().all(|t| reference.iter().any(|r| (t - r).abs() <= tol));
    Check::new(
        "classifier_boundaries",
        learned_ok && changes_ok,
        format!("boundaries {a:.4}/{b:.4} °C; class changes at {changes:?} °C"),
    )
}

fn piecewise(points: &[(f64, f64)], t_s: f64) -> f64 {
    for w in points.windows(2) {
        let ((t0, y0), (t1, y1)) = (w[0], w[1]);
        if t_s <= t1 {
            return y0 + (y1 - y0) * ((t_s - t0) / (t1 - t0)).clamp(0.0, 1.0);
        }
    }
    points[points.len() - 1].1
}

fn render_piecewise(points: &[(f64, f64)], rate_hz: f64) -> Result<StimulusTrace> {
    let end = points[points.len() - 1].0;
    let n = (end * rate_hz).round() as usize + 1;
    let samples = (0..n).map(|i| round6(piecewise(points, i as f64 / rate_hz))).collect();
    StimulusTrace::new(rate_hz, samples, 0.0)
}

/// Radiant-lamp surrogate: 1 s at 35 °C, 2 °C/s up to 51 °C, 2 s hold, 2 °C/s back down, 1 s at 35 °C.
pub fn surrogate_ramp(rate_hz: f64) -> Result<StimulusTrace> {
    render_piecewise(&[(0.0, 35.0), (1.0, 35.0), (9.0, 51.0), (11.0, 51.0), (19.0, 35.0), (20.0, 35.0)], rate_hz)
}

/// Two super-threshold plateaus, 6 s at 47 °C then 6 s at 51 °C, joined by 2 °C/s ramps.
pub fn two_plateau(rate_hz: f64) -> Result<StimulusTrace> {
    render_piecewise(
        &[(0.0, 35.0), (1.0, 35.0), (7.0, 47.0), (13.0, 47.0), (15.0, 51.0), (21.0, 51.0), (29.0, 35.0), (30.0, 35.0)],
        rate_hz,
    )
}

/// Writes `contents` to `dir/name`, creating `dir` first.
pub fn write_output(dir: &Path, name: &str, contents: &str) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join(name), contents)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn spearman_is_one_for_increasing_maps(mut xs in proptest::collection::vec(-50.0f64..50.0, 3..40)) {
            xs.sort_by(f64::total_cmp);
            xs.dedup();
            prop_assume!(xs.len() >= 3);
            let ys: Vec<f64> = xs.iter().map(|x| (0.2 * x).exp()).collect();
            prop_assert!((spearman(&xs, &ys) - 1.0).abs() < 1e-12);
        }

        #[test]
        fn plateaus_are_disjoint_constant_runs(levels in proptest::collection::vec((30u8..50, 1usize..300), 1..8)) {
            let samples: Vec<f64> = levels.iter().flat_map(|&(t, n)| std::iter::repeat_n(t as f64, n)).collect();
            let trace = StimulusTrace::new(100.0, samples, 0.0).unwrap();
            let found = find_plateaus(&trace, 1000.0);
            for w in found.windows(2) {
                prop_assert!(w[0].last < w[1].first);
            }
            for p in &found {
                prop_assert!(p.last - p.first + 1 >= 100);
                prop_assert!(trace.samples[p.first..=p.last].iter().all(|&t| t == p.temp_c));
            }
        }
    }

    #[test]
    fn spearman_oracles() {
        let x = [1.0, 2.0, 3.0, 4.0];
        assert!((spearman(&x, &[10.0, 20.0, 30.0, 40.0]) - 1.0).abs() < 1e-12);
        assert!((spearman(&x, &[4.0, 3.0, 2.0, 1.0]) + 1.0).abs() < 1e-12);
        // ranks 1, 2.5, 2.5, 4 against 1..4: r = 4.5 / sqrt(5 * 4.5)
        let tied = spearman(&x, &[1.0, 2.0, 2.0, 3.0]);
        assert!((tied - 4.5 / (5.0f64 * 4.5).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn slope_of_exact_line() {
        let x = [44.0, 45.0, 46.0];
        let y: Vec<f64> = x.iter().map(|t| 0.3 * t - 2.0).collect();
        assert!((ols_slope(&x, &y) - 0.3).abs() < 1e-12);
    }

    #[test]
    fn surrogate_shapes() {
        let r = surrogate_ramp(100.0).unwrap();
        assert_eq!(r.len(), 2001);
        assert_eq!(r.peak(), 51.0);
        assert_eq!(r.samples[0], 35.0);
        assert_eq!(r.samples[300], 39.0);
        let p = two_plateau(100.0).unwrap();
        let plats = find_plateaus(&p, 1000.0);
        let temps: Vec<f64> = plats.iter().map(|p| p.temp_c).collect();
        assert_eq!(temps, vec![35.0, 47.0, 51.0, 35.0]);
        assert_eq!(plats[1].first, 700);
        assert_eq!(plats[1].last, 1300);
    }

    #[test]
    fn crossing_rules() {
        assert!(crossing_check("a", Some(43.75), 43.7, 0.2, 51.0).passed);
        assert!(!crossing_check("a", Some(44.0), 43.7, 0.2, 51.0).passed);
        assert!(crossing_check("a", None, 43.7, 0.2, 40.0).passed);
        assert!(!crossing_check("a", None, 43.7, 0.2, 51.0).passed);
    }

    #[test]
    fn records_csv_layout() {
        let cfg = RunConfig::default();
        let mut r = ExperimentReport::new("x", &cfg, "temp_C");
        r.records.push(SweepRecord::new(44.0).with("a", Some(1.5)).with("b", None));
        assert_eq!(r.records_csv(), "temp_C,a,b\n44,1.5,\n");
        r.raster.push(NeuronRaster { run: "full".into(), neuron: "motor".into(), spikes_ms: vec![2.0, 5.0] });
        r.raster.push(NeuronRaster { run: "full".into(), neuron: "s_50".into(), spikes_ms: vec![1.0] });
        assert_eq!(r.raster_csv(), "run,neuron,t_ms\nfull,s_50,1\nfull,motor,2\nfull,motor,5\n");
    }
}
