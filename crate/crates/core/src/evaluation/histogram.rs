use crate::error::{Error, Result};

/// Shared square binning box for 2-D histogram comparisons. Points outside
/// the box are clamped into the edge bins so no mass is dropped.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HistogramSpec {
    pub lo: f64,
    pub hi: f64,
    pub bins: usize,
}

impl Default for HistogramSpec {
    fn default() -> Self {
        HistogramSpec { lo: -6.0, hi: 6.0, bins: 50 }
    }
}

const SMOOTHING: f64 = 1e-8;

impl HistogramSpec {
    pub fn validate(&self) -> Result<()> {
        if self.bins == 0 || !(self.lo < self.hi) {
            return Err(Error::InvalidParameter(format!(
                "bad histogram spec: [{}, {}] with {} bins",
                self.lo, self.hi, self.bins
            )));
        }
        Ok(())
    }

    fn bin(&self, v: f64) -> usize {
        let t = (v - self.lo) / (self.hi - self.lo) * self.bins as f64;
        (t.floor() as i64).clamp(0, self.bins as i64 - 1) as usize
    }

    fn density(&self, samples: &[[f64; 2]]) -> Vec<f64> {
        let b = self.bins;
        let mut counts = vec![0.0f64; b * b];
        for p in samples {
            counts[self.bin(p[1]) * b + self.bin(p[0])] += 1.0;
        }
        let n = samples.len() as f64;
        let mut probs: Vec<f64> = counts.iter().map(|c| c / n + SMOOTHING).collect();
        let total: f64 = probs.iter().sum();
        for p in probs.iter_mut() {
            *p /= total;
        }
        probs
    }
}

/// Smoothed symmetric KL divergence between the binned distributions of two
/// 2-D sample sets over a fixed shared box.
pub fn histogram_divergence(
    samples: &[[f64; 2]],
    reference: &[[f64; 2]],
    spec: &HistogramSpec,
) -> Result<f64> {
    spec.validate()?;
    if samples.is_empty() || reference.is_empty() {
        return Err(Error::EmptySamples);
    }
    let p = spec.density(samples);
    let q = spec.density(reference);
    let mut kl_pq = 0.0;
    let mut kl_qp = 0.0;
    for (pi, qi) in p.iter().zip(q.iter()) {
        kl_pq += pi * (pi / qi).ln();
        kl_qp += qi * (qi / pi).ln();
    }
    Ok(kl_pq + kl_qp)
}
