use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::io::atomic_write;

/// One training step: positive/negative phase mean energies, regularization
/// value, and the sample-quality metric when this step ran an evaluation.
/// VAE training reuses the same shape with its loss in `e_pos` and zeros
/// elsewhere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainRecord {
    pub step: u64,
    pub e_pos: f64,
    pub e_neg: f64,
    pub reg: f64,
    pub metric: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainLog {
    pub records: Vec<TrainRecord>,
    pub best_step: Option<u64>,
}

impl TrainLog {
    pub fn push(&mut self, record: TrainRecord) {
        debug_assert!(
            self.records.last().map_or(true, |r| r.step < record.step),
            "step ids must be monotone"
        );
        self.records.push(record);
    }

    /// The evaluation subsequence: (step, metric) pairs.
    pub fn evals(&self) -> Vec<(u64, f64)> {
        self.records.iter().filter_map(|r| r.metric.map(|m| (r.step, m))).collect()
    }

    pub fn last_record(&self) -> Option<&TrainRecord> {
        self.records.last()
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = String::with_capacity(48 * self.records.len() + 32);
        out.push_str("step,e_pos,e_neg,reg,metric\n");
        for r in &self.records {
            let _ = write!(out, "{},{},{},{}", r.step, r.e_pos, r.e_neg, r.reg);
            match r.metric {
                Some(m) => {
                    let _ = writeln!(out, ",{m}");
                }
                None => out.push_str(",\n"),
            }
        }
        out
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        atomic_write(path, self.to_csv_string().as_bytes())
    }
}
