use std::collections::BTreeMap;

use serde::Serialize;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub method: String,
    pub op_count: u64,
    /// Median wall time per call; absent unless `correct`.
    pub time_ns: Option<f64>,
    pub correct: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchMeta {
    pub seed: u64,
    pub precision: String,
    pub reps: usize,
    /// Experiment-specific extras.
    pub notes: BTreeMap<String, String>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchReport {
    pub experiment: String,
    pub rows: Vec<BenchRow>,
    pub meta: BenchMeta,
}

impl BenchReport {
    pub fn new(experiment: &str, seed: u64, reps: usize) -> Self {
        BenchReport {
            experiment: experiment.to_string(),
            rows: Vec::new(),
            meta: BenchMeta {
                seed,
                precision: "f64".into(),
                reps,
                notes: BTreeMap::new(),
            },
        }
    }

    /// Adds a row; the timing closure only runs if `correct`.
    pub fn row(&mut self, method: &str, op_count: u64, correct: bool, time: impl FnOnce() -> f64) {
        self.rows.push(BenchRow {
            method: method.to_string(),
            op_count,
            time_ns: correct.then(time),
            correct,
        });
    }

    pub fn note(&mut self, key: &str, value: impl ToString) {
        self.meta.notes.insert(key.to_string(), value.to_string());
    }

    pub fn all_correct(&self) -> bool {
        self.rows.iter().all(|r| r.correct)
    }
}

/// `|a - b| / max(|a|, |b|, 1)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    (a - b).abs() / a.abs().max(b.abs()).max(1.0)
}
