use std::path::PathBuf;

use nwr_core::arc::{ArcConfig, ReflexDecoder, ReflexNetwork};
use nwr_core::config::RunConfig;
use nwr_core::experiments::{
    replay, run_compare, run_curve, run_ss, run_ts, surrogate_ramp, two_plateau, ExperimentReport,
};
use nwr_core::sensory::SensoryConfig;
use nwr_core::stimulus::{load_trace, StimulusTrace};
use nwr_core::Error;

// close to what the default training run settles on
const WEIGHTS: [f64; 3] = [0.127, 0.346, 0.959];

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn network(weights: [f64; 3]) -> ReflexNetwork {
    ReflexNetwork::new(&SensoryConfig::default(), &ArcConfig::default(), weights.to_vec(), 0.1).unwrap()
}

#[test]
fn shipped_fixtures_match_generators() {
    for (name, trace) in [("surrogate_ramp.csv", surrogate_ramp(100.0)), ("two_plateau.csv", two_plateau(100.0))] {
        let trace = trace.unwrap();
        let shipped = std::fs::read_to_string(fixture(name)).unwrap();
        assert_eq!(shipped, trace.to_csv(), "{name} is stale; regenerate with `nwr fixtures --out fixtures`");
        assert_eq!(load_trace(&fixture(name), 100.0).unwrap(), trace);
    }
}

#[test]
fn raster_times_strictly_increase() {
    let run = replay(&network(WEIGHTS), &surrogate_ramp(100.0).unwrap()).unwrap();
    for r in run.raster("full") {
        assert!(r.spikes_ms.windows(2).all(|w| w[0] < w[1]), "{}", r.neuron);
    }
    assert!(!run.motor().is_empty());
}

#[test]
fn zero_gain_fails_every_spatial_check() {
    let cfg = RunConfig { ss: nwr_core::config::SsConfig { epsilon: 0.0, ..Default::default() }, ..Default::default() };
    let report = run_ss(&cfg, &network(WEIGHTS), &surrogate_ramp(100.0).unwrap()).unwrap();
    assert_eq!(report.checks.len(), 5);
    for c in &report.checks {
        assert!(!c.passed);
        assert!(c.detail.contains("no interneuron drive"), "{}", c.detail);
    }
}

#[test]
fn untrained_network_cannot_calibrate() {
    let err = run_curve(&RunConfig::default(), &network([0.0; 3])).unwrap_err();
    assert!(matches!(err, Error::CalibrationFailure(_)), "{err}");
}

#[test]
fn curve_on_reference_weights() {
    let (report, net) = run_curve(&RunConfig::default(), &network(WEIGHTS)).unwrap();
    assert!(net.decoder().is_some());
    assert_eq!(report.records.len(), 17);
    assert!(report.check("monotone").unwrap().passed, "{:?}", report.checks);
    assert!(report.check("anchor").unwrap().passed, "{:?}", report.checks);
}

#[test]
fn temporal_summation_on_reference_weights() {
    let report = run_ts(&RunConfig::default(), &network(WEIGHTS)).unwrap();
    for name in ["single_pulse_silent", "train_summates", "summation_decays", "threshold_vs_frequency"] {
        assert!(report.check(name).unwrap().passed, "{:?}", report.checks);
    }
}

#[test]
fn cool_trace_leaves_binary_detectors_quiet() {
    let mut net = network(WEIGHTS);
    net.set_decoder(Some(ReflexDecoder::new(9.5, 1.35).unwrap()));
    // 30 °C rising to 39.9 °C
    let samples: Vec<f64> = (0..=990).map(|i| 30.0 + i as f64 * 0.01).collect();
    let trace = StimulusTrace::new(100.0, samples, 0.0).unwrap();
    let out = run_compare(&RunConfig::default(), &net, &trace).unwrap();
    let report = &out.report;
    assert!(report.check("analog_trigger").unwrap().passed);
    assert!(report.check("ffsnn_trigger").unwrap().passed);
    assert!(report.check("classifier_boundaries").unwrap().passed, "{:?}", report.checks);
    assert!(report.events.iter().all(|e| e.detector != "analog" && e.detector != "ffsnn"));
    let last = out.timeline_csv.lines().last().unwrap();
    assert!(last.ends_with(",0,hot,0"), "{last}");
    let changed = report.events.iter().find(|e| e.detector == "classifier").unwrap();
    assert!((changed.temp_c - 107.0 / 3.0).abs() <= 0.02);
}

#[test]
fn reports_embed_their_config() {
    let cfg = RunConfig { rng_seed: 42, ..Default::default() };
    let report = run_ts(&cfg, &network(WEIGHTS)).unwrap();
    let back: ExperimentReport = serde_json::from_str(&report.to_json()).unwrap();
    assert_eq!(back.config, cfg);
    assert_eq!(back, report);
}
