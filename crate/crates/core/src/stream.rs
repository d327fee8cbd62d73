//! Line-oriented live processing: one `t_s,temp_C` sample in, ND-JSON messages out.

use serde::Serialize;

use crate::arc::{ReflexEvent, ReflexEventKind, ReflexNetwork};
use crate::error::Result;
use crate::stimulus::{MAX_TEMP_C, MIN_TEMP_C};

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum StreamMessage {
    Event(ReflexEvent),
    Heartbeat { t_s: f64, samples: u64 },
    Warning { line: u64, reason: String },
    Stall { silent_ms: u64, samples: u64 },
    Summary { samples: u64, motor_spikes: u64, strength_events: u64, warnings: u64, t_s: f64 },
}

impl StreamMessage {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("stream message serialises")
    }
}

/// Steps the network once per accepted sample, holding it for one sample period.
#[derive(Debug, Clone)]
pub struct StreamProcessor {
    net: ReflexNetwork,
    steps_per_sample: usize,
    heartbeat_ms: f64,
    next_heartbeat_ms: f64,
    line: u64,
    samples: u64,
    motor_spikes: u64,
    strength_events: u64,
    warnings: u64,
    last_t_s: Option<f64>,
}

impl StreamProcessor {
    pub fn new(mut net: ReflexNetwork, sample_period_ms: f64, heartbeat_s: f64) -> Self {
        net.reset();
        let steps_per_sample = (sample_period_ms / net.dt()).round().max(1.0) as usize;
        let heartbeat_ms = heartbeat_s * 1000.0;
        Self {
            net,
            steps_per_sample,
            heartbeat_ms,
            next_heartbeat_ms: heartbeat_ms,
            line: 0,
            samples: 0,
            motor_spikes: 0,
            strength_events: 0,
            warnings: 0,
            last_t_s: None,
        }
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    fn warn(&mut self, reason: String) -> Vec<StreamMessage> {
        self.warnings += 1;
        vec![StreamMessage::Warning { line: self.line, reason }]
    }

    /// Handles one input line. Header and blank lines are ignored; bad lines yield a warning.
    pub fn process_line(&mut self, line: &str) -> Result<Vec<StreamMessage>> {
        self.line += 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with("t_s") {
            return Ok(Vec::new());
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != 2 {
            return Ok(self.warn(format!("expected 2 fields, got {}", fields.len())));
        }
        let (Ok(t_s), Ok(temp)) = (fields[0].parse::<f64>(), fields[1].parse::<f64>()) else {
            return Ok(self.warn(format!("non-numeric field in {line:?}")));
        };
        if !(t_s.is_finite() && temp.is_finite()) {
            return Ok(self.warn(format!("non-finite value in {line:?}")));
        }
        if !(MIN_TEMP_C..=MAX_TEMP_C).contains(&temp) {
            return Ok(self.warn(format!("temperature {temp} °C out of bounds")));
        }
        if self.last_t_s.is_some_and(|prev| t_s <= prev) {
            return Ok(self.warn(format!("timestamp {t_s} s does not advance")));
        }
        self.last_t_s = Some(t_s);
        self.step_sample(temp)
    }

    fn step_sample(&mut self, temp: f64) -> Result<Vec<StreamMessage>> {
        let mut raw = Vec::new();
        for _ in 0..self.steps_per_sample {
            self.net.step_with_events(temp, &mut raw)?;
        }
        self.samples += 1;
        let mut out = Vec::with_capacity(raw.len() + 1);
        for e in raw {
            match e.kind {
                ReflexEventKind::MotorSpike => self.motor_spikes += 1,
                ReflexEventKind::ReflexStrength => self.strength_events += 1,
            }
            out.push(StreamMessage::Event(e));
        }
        let now = self.net.time_ms();
        if self.heartbeat_ms > 0.0 && now + 1e-9 >= self.next_heartbeat_ms {
            out.push(StreamMessage::Heartbeat { t_s: now / 1000.0, samples: self.samples });
            while self.next_heartbeat_ms <= now + 1e-9 {
                self.next_heartbeat_ms += self.heartbeat_ms;
            }
        }
        Ok(out)
    }

    pub fn stall(&self, silent_ms: u64) -> StreamMessage {
        StreamMessage::Stall { silent_ms, samples: self.samples }
    }

    pub fn summary(&self) -> StreamMessage {
        StreamMessage::Summary {
            samples: self.samples,
            motor_spikes: self.motor_spikes,
            strength_events: self.strength_events,
            warnings: self.warnings,
            t_s: self.net.time_ms() / 1000.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arc::ArcConfig;
    use crate::sensory::SensoryConfig;

    fn processor() -> StreamProcessor {
        let net = ReflexNetwork::new(&SensoryConfig::default(), &ArcConfig::default(), vec![0.3; 3], 0.1).unwrap();
        StreamProcessor::new(net, 10.0, 1.0)
    }

    #[test]
    fn malformed_lines_warn_and_continue() {
        let mut p = processor();
        assert!(p.process_line("t_s,temp_C").unwrap().is_empty());
        assert!(p.process_line("0.00,35").unwrap().is_empty());
        let w = p.process_line("0.01,hot").unwrap();
        assert!(matches!(&w[..], [StreamMessage::Warning { line: 3, .. }]));
        assert!(matches!(&p.process_line("0.00,35").unwrap()[..], [StreamMessage::Warning { .. }]));
        assert!(matches!(&p.process_line("0.02,500").unwrap()[..], [StreamMessage::Warning { .. }]));
        assert!(p.process_line("0.03,35").unwrap().is_empty());
        assert_eq!(p.samples(), 2);
        let StreamMessage::Summary { warnings, samples, .. } = p.summary() else { panic!() };
        assert_eq!((warnings, samples), (3, 2));
    }

    #[test]
    fn heartbeat_every_simulated_second() {
        let mut p = processor();
        let mut beats = Vec::new();
        for i in 0..250 {
            for m in p.process_line(&format!("{},35", i as f64 / 100.0)).unwrap() {
                if let StreamMessage::Heartbeat { t_s, .. } = m {
                    beats.push(t_s);
                }
            }
        }
        assert_eq!(beats.len(), 2);
        assert!((beats[0] - 1.0).abs() < 1e-9 && (beats[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn message_tags() {
        let p = processor();
        assert!(p.stall(1500).to_json().starts_with(r#"{"type":"stall","silent_ms":1500"#));
        assert!(p.summary().to_json().contains(r#""type":"summary""#));
    }
}
