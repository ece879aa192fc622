use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

/// Wall-clock samples per named stage, in milliseconds.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageTimer {
    samples: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimingStats {
    pub mean_ms: f64,
    pub std_ms: f64,
    pub samples: usize,
}

impl StageTimer {
    pub fn record(&mut self, stage: &str, ms: f64) {
        self.samples.entry(stage.to_string()).or_default().push(ms);
    }

    /// Runs `f` and records its duration under `stage`.
    pub fn time<T>(&mut self, stage: &str, f: impl FnOnce() -> T) -> T {
        let t = Instant::now();
        let out = f();
        self.record(stage, t.elapsed().as_secs_f64() * 1e3);
        out
    }

    pub fn samples(&self, stage: &str) -> &[f64] {
        self.samples.get(stage).map_or(&[], Vec::as_slice)
    }

    /// Mean and sample standard deviation per stage.
    pub fn stats(&self) -> BTreeMap<String, TimingStats> {
        self.samples
            .iter()
            .map(|(k, v)| {
                let n = v.len();
                let mean = v.iter().sum::<f64>() / n as f64;
                let var = if n > 1 {
                    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64
                } else {
                    0.0
                };
                (
                    k.clone(),
                    TimingStats {
                        mean_ms: mean,
                        std_ms: var.sqrt(),
                        samples: n,
                    },
                )
            })
            .collect()
    }

    /// Table of `stage  mean ± std (n)` lines.
    pub fn table(&self) -> String {
        self.stats()
            .iter()
            .map(|(k, s)| format!("{k:<20} {:>9.1} ± {:>7.1} ms  (n = {})\n", s.mean_ms, s.std_ms, s.samples))
            .collect()
    }
}
