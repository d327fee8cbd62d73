//! Sampled temperature traces: ideal steps, pulse trains and CSV ingestion.

use std::fs::File;
use std::io::{BufReader, Read};
use std::path::Path;

use flate2::read::GzDecoder;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_RATE_HZ: f64 = 100.0;
pub const MIN_TEMP_C: f64 = 0.0;
pub const MAX_TEMP_C: f64 = 120.0;

/// Uniformly sampled skin temperature.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StimulusTrace {
    pub sample_rate_hz: f64,
    pub samples: Vec<f64>,
    /// Time of the first sample (s)
    pub t_start_s: f64,
}

impl StimulusTrace {
    pub fn new(sample_rate_hz: f64, samples: Vec<f64>, t_start_s: f64) -> Result<Self> {
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(Error::invalid("sample_rate_hz", format!("{sample_rate_hz}")));
        }
        if samples.is_empty() {
            return Err(Error::EmptyTrace);
        }
        if let Some(&bad) = samples.iter().find(|t| !(MIN_TEMP_C..=MAX_TEMP_C).contains(*t)) {
            return Err(Error::TemperatureOutOfBounds(bad));
        }
        Ok(Self { sample_rate_hz, samples, t_start_s })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn period_ms(&self) -> f64 {
        1000.0 / self.sample_rate_hz
    }

    pub fn duration_ms(&self) -> f64 {
        self.samples.len() as f64 * self.period_ms()
    }

    /// Timestamp (s) of sample `i`.
    pub fn time_s(&self, i: usize) -> f64 {
        self.t_start_s + i as f64 / self.sample_rate_hz
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.samples.iter().enumerate().map(|(i, &t)| (self.time_s(i), t))
    }

    pub fn peak(&self) -> f64 {
        self.samples.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Same trace with every sample limited to `ceiling_c`.
    pub fn clipped(&self, ceiling_c: f64) -> Self {
        Self { samples: self.samples.iter().map(|t| t.min(ceiling_c)).collect(), ..self.clone() }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_s,temp_C\n");
        for (t, temp) in self.iter() {
            out.push_str(&format!("{},{}\n", round_time(t), temp));
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

fn round_time(t: f64) -> f64 {
    (t * 1e6).round() / 1e6
}

/// Rectangular stimulus `baseline + (magnitude - baseline)` on `[onset, onset + duration)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdealStimulus {
    pub magnitude_c: f64,
    pub onset_ms: f64,
    pub duration_ms: f64,
    pub baseline_c: f64,
}

impl IdealStimulus {
    pub fn new(magnitude_c: f64, onset_ms: f64, duration_ms: f64, baseline_c: f64) -> Result<Self> {
        if !(duration_ms > 0.0) {
            return Err(Error::invalid("duration_ms", format!("{duration_ms} must be positive")));
        }
        if !(magnitude_c > baseline_c) {
            return Err(Error::invalid("magnitude_c", format!("{magnitude_c} must exceed baseline {baseline_c}")));
        }
        Ok(Self { magnitude_c, onset_ms, duration_ms, baseline_c })
    }

    /// Temperature at `t_ms`; the onset instant is already hot.
    pub fn at(&self, t_ms: f64) -> f64 {
        if t_ms >= self.onset_ms && t_ms < self.onset_ms + self.duration_ms {
            self.magnitude_c
        } else {
            self.baseline_c
        }
    }
}

fn sample_count(total_ms: f64, rate_hz: f64) -> usize {
    (total_ms * rate_hz / 1000.0 + 1e-9).floor() as usize
}

fn sample_time_ms(i: usize, rate_hz: f64) -> f64 {
    i as f64 * 1000.0 / rate_hz
}

pub fn render_ideal(s: &IdealStimulus, rate_hz: f64, total_ms: f64) -> Result<StimulusTrace> {
    if total_ms < s.onset_ms + s.duration_ms {
        return Err(Error::invalid(
            "total_ms",
            format!("{total_ms} ms is shorter than the stimulus end {} ms", s.onset_ms + s.duration_ms),
        ));
    }
    if !(rate_hz > 0.0) {
        return Err(Error::invalid("rate_hz", format!("{rate_hz}")));
    }
    let n = sample_count(total_ms, rate_hz);
    let samples = (0..n).map(|i| s.at(sample_time_ms(i, rate_hz))).collect();
    StimulusTrace::new(rate_hz, samples, 0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PulseTrain {
    pub peak_c: f64,
    pub baseline_c: f64,
    pub pulse_ms: f64,
    pub period_ms: f64,
    pub count: usize,
}

impl PulseTrain {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::invalid("count", "at least one pulse required"));
        }
        if !(self.pulse_ms > 0.0) {
            return Err(Error::invalid("pulse_ms", format!("{} must be positive", self.pulse_ms)));
        }
        if !(self.period_ms >= self.pulse_ms) {
            return Err(Error::invalid("period_ms", format!("{} is shorter than the pulse", self.period_ms)));
        }
        Ok(())
    }

    /// `(count - 1) * period + pulse`.
    pub fn duration_ms(&self) -> f64 {
        (self.count - 1) as f64 * self.period_ms + self.pulse_ms
    }

    pub fn at(&self, t_ms: f64) -> f64 {
        if t_ms < 0.0 {
            return self.baseline_c;
        }
        let k = (t_ms / self.period_ms).floor();
        if k < self.count as f64 && t_ms - k * self.period_ms < self.pulse_ms {
            self.peak_c
        } else {
            self.baseline_c
        }
    }
}

pub fn render_pulse_train(train: &PulseTrain, rate_hz: f64) -> Result<StimulusTrace> {
    train.validate()?;
    if !(rate_hz > 0.0) {
        return Err(Error::invalid("rate_hz", format!("{rate_hz}")));
    }
    let n = sample_count(train.duration_ms(), rate_hz);
    let samples = (0..n).map(|i| train.at(sample_time_ms(i, rate_hz))).collect();
    StimulusTrace::new(rate_hz, samples, 0.0)
}

/// Reads a `t_s,temp_C` CSV (optionally `.csv.gz`). Traces whose spacing deviates
/// from `expected_rate_hz` by more than 1 % anywhere are linearly resampled onto a
/// uniform grid starting at the first timestamp.
pub fn load_trace(path: &Path, expected_rate_hz: f64) -> Result<StimulusTrace> {
    if !path.exists() {
        return Err(Error::MissingFile(path.to_path_buf()));
    }
    let file = BufReader::new(File::open(path)?);
    let reader: Box<dyn Read> =
        if path.to_string_lossy().ends_with(".gz") { Box::new(GzDecoder::new(file)) } else { Box::new(file) };
    parse_trace(reader, expected_rate_hz)
}

pub fn parse_trace(reader: impl Read, expected_rate_hz: f64) -> Result<StimulusTrace> {
    if !(expected_rate_hz > 0.0) {
        return Err(Error::invalid("expected_rate_hz", format!("{expected_rate_hz}")));
    }
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let mut times = Vec::new();
    let mut temps = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec.map_err(|e| Error::MalformedTrace(format!("row {row}: {e}")))?;
        if rec.len() < 2 {
            return Err(Error::MalformedTrace(format!("row {row}: expected 2 fields, got {}", rec.len())));
        }
        let parse = |field: &str| {
            field
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::NonNumericField { row, field: field.to_string() })
        };
        let t = parse(&rec[0])?;
        let temp = parse(&rec[1])?;
        if let Some(&prev) = times.last() {
            if t <= prev {
                return Err(Error::NonMonotoneTimestamps { row, prev, next: t });
            }
        }
        times.push(t);
        temps.push(temp);
    }
    if times.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let period = 1.0 / expected_rate_hz;
    let uniform = times.windows(2).all(|w| ((w[1] - w[0]) - period).abs() <= 0.01 * period);
    if uniform {
        return StimulusTrace::new(expected_rate_hz, temps, times[0]);
    }
    log::info!("resampling {} irregular samples onto {expected_rate_hz} Hz", times.len());
    StimulusTrace::new(expected_rate_hz, resample(&times, &temps, period), times[0])
}

/// Linear interpolation of `(times, values)` onto `times[0] + k * period`.
fn resample(times: &[f64], values: &[f64], period: f64) -> Vec<f64> {
    let span = times[times.len() - 1] - times[0];
    let n = (span / period + 1e-9).floor() as usize + 1;
    let mut j = 0;
    (0..n)
        .map(|k| {
            let t = times[0] + k as f64 * period;
            while j + 1 < times.len() - 1 && times[j + 1] <= t {
                j += 1;
            }
            if j + 1 >= times.len() {
                return values[j];
            }
            let f = ((t - times[j]) / (times[j + 1] - times[j])).clamp(0.0, 1.0);
            values[j] + f * (values[j + 1] - values[j])
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn step() -> IdealStimulus {
        IdealStimulus::new(50.0, 100.0, 100.0, 35.0).unwrap()
    }

    #[test]
    fn ideal_samples() {
        let tr = render_ideal(&step(), 100.0, 400.0).unwrap();
        assert_eq!(tr.len(), 40);
        assert_eq!(tr.samples[9], 35.0);
        assert_eq!(tr.samples[10], 50.0);
        assert_eq!(tr.samples[15], 50.0);
        assert_eq!(tr.samples.iter().filter(|&&t| t == 50.0).count(), 10);
        assert_eq!(tr.samples[20], 35.0);
    }

    #[test]
    fn ideal_rejects_short_total() {
        assert!(render_ideal(&step(), 100.0, 150.0).is_err());
        assert!(IdealStimulus::new(30.0, 0.0, 100.0, 35.0).is_err());
        assert!(IdealStimulus::new(50.0, 0.0, 0.0, 35.0).is_err());
    }

    #[test]
    fn single_pulse_train_matches_ideal() {
        let train = PulseTrain { peak_c: 48.0, baseline_c: 35.0, pulse_ms: 40.0, period_ms: 250.0, count: 1 };
        let a = render_pulse_train(&train, 100.0).unwrap();
        let b = render_ideal(&IdealStimulus::new(48.0, 0.0, 40.0, 35.0).unwrap(), 100.0, 40.0).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn pulse_onsets() {
        let train = PulseTrain { peak_c: 48.0, baseline_c: 35.0, pulse_ms: 40.0, period_ms: 300.0, count: 3 };
        assert_eq!(train.duration_ms(), 640.0);
        let tr = render_pulse_train(&train, 100.0).unwrap();
        assert_eq!(tr.len(), 64);
        let onsets: Vec<usize> =
            (0..tr.len()).filter(|&i| tr.samples[i] == 48.0 && (i == 0 || tr.samples[i - 1] == 35.0)).collect();
        assert_eq!(onsets, vec![0, 30, 60]);
    }

    #[test]
    fn invalid_train_geometry() {
        let bad = PulseTrain { peak_c: 48.0, baseline_c: 35.0, pulse_ms: 40.0, period_ms: 30.0, count: 3 };
        assert!(render_pulse_train(&bad, 100.0).is_err());
        let none = PulseTrain { count: 0, period_ms: 100.0, ..bad };
        assert!(render_pulse_train(&none, 100.0).is_err());
    }

    #[test]
    fn bounds_enforced() {
        assert!(matches!(StimulusTrace::new(100.0, vec![35.0, 130.0], 0.0), Err(Error::TemperatureOutOfBounds(_))));
        assert!(StimulusTrace::new(100.0, vec![], 0.0).is_err());
        assert!(StimulusTrace::new(0.0, vec![35.0], 0.0).is_err());
    }

    #[test]
    fn uniform_csv_is_identity() {
        let text = "t_s,temp_C\n0.00,35.0\n0.01,35.5\n0.02,36.25\n";
        let tr = parse_trace(text.as_bytes(), 100.0).unwrap();
        assert_eq!(tr.samples, vec![35.0, 35.5, 36.25]);
        assert_eq!(tr.sample_rate_hz, 100.0);
    }

    #[test]
    fn distinct_errors() {
        let nm = "t_s,temp_C\n0.00,35\n0.02,36\n0.01,37\n";
        assert!(matches!(parse_trace(nm.as_bytes(), 100.0), Err(Error::NonMonotoneTimestamps { row: 3, .. })));
        let nn = "t_s,temp_C\n0.00,35\n0.01,hot\n";
        assert!(matches!(parse_trace(nn.as_bytes(), 100.0), Err(Error::NonNumericField { row: 2, .. })));
        let missing = load_trace(Path::new("/nonexistent/trace.csv"), 100.0);
        assert!(matches!(missing, Err(Error::MissingFile(_))));
    }

    #[test]
    fn decimates_200_hz_ramp() {
        let mut text = String::from("t_s,temp_C\n");
        for k in 0..401 {
            let t = k as f64 * 0.005;
            text.push_str(&format!("{t},{}\n", 35.0 + 2.0 * t));
        }
        let tr = parse_trace(text.as_bytes(), 100.0).unwrap();
        assert_eq!(tr.len(), 201);
        for (i, v) in tr.samples.iter().enumerate() {
            let direct = 35.0 + 2.0 * (2 * i) as f64 * 0.005;
            assert!((v - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn gzip_round_trip() {
        use flate2::{write::GzEncoder, Compression};
        use std::io::Write;
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trace.csv.gz");
        let tr = StimulusTrace::new(100.0, vec![35.0, 40.0, 45.5], 0.0).unwrap();
        let mut enc = GzEncoder::new(File::create(&path).unwrap(), Compression::default());
        enc.write_all(tr.to_csv().as_bytes()).unwrap();
        enc.finish().unwrap();
        assert_eq!(load_trace(&path, 100.0).unwrap(), tr);
    }

    proptest! {
        #[test]
        fn csv_round_trip_is_idempotent(temps in proptest::collection::vec(0.0f64..120.0, 1..200)) {
            let tr = StimulusTrace::new(100.0, temps, 0.0).unwrap();
            let once = parse_trace(tr.to_csv().as_bytes(), 100.0).unwrap();
            prop_assert_eq!(&once.samples, &tr.samples);
            let twice = parse_trace(once.to_csv().as_bytes(), 100.0).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn ideal_matches_definition(mag in 36.0f64..60.0, onset in 0u32..50, dur in 1u32..50) {
            let s = IdealStimulus::new(mag, onset as f64 * 10.0, dur as f64 * 10.0, 35.0).unwrap();
            let tr = render_ideal(&s, 100.0, 1000.0).unwrap();
            for (i, v) in tr.samples.iter().enumerate() {
                prop_assert_eq!(*v, s.at(i as f64 * 10.0));
            }
        }
    }
}
