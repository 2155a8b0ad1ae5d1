use crate::datasets::{gaussian_mode_centers, swiss_roll_curve, SWISS_ROLL_T_MAX, SWISS_ROLL_T_MIN};
use crate::error::{Error, Result};

/// Reference mode geometry for sample-quality metrics. A sample is
/// "high quality" when it lies within `quality_radius_multiplier * sigma`
/// of its nearest center; a center is "captured" once it has `min_count`
/// high-quality samples assigned to it.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeSpec {
    pub centers: Vec<[f64; 2]>,
    pub sigma: f64,
    pub min_count: usize,
    pub quality_radius_multiplier: f64,
}

pub const DEFAULT_QUALITY_MULTIPLIER: f64 = 4.0;
pub const DEFAULT_MIN_COUNT: usize = 20;
/// Centers used to discretize the Swiss roll curve for metric purposes.
pub const SWISS_ROLL_METRIC_CENTERS: usize = 512;

impl ModeSpec {
    pub fn new(
        centers: Vec<[f64; 2]>,
        sigma: f64,
        min_count: usize,
        quality_radius_multiplier: f64,
    ) -> Result<Self> {
        if centers.is_empty() {
            return Err(Error::InvalidParameter("mode spec needs at least one center".into()));
        }
        for (i, a) in centers.iter().enumerate() {
            for b in centers.iter().skip(i + 1) {
                if a == b {
                    return Err(Error::InvalidParameter(format!("duplicate center {a:?}")));
                }
            }
        }
        if !(sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("sigma must be positive, got {sigma}")));
        }
        if min_count == 0 || !(quality_radius_multiplier > 0.0) {
            return Err(Error::InvalidParameter("bad min_count or radius multiplier".into()));
        }
        Ok(ModeSpec { centers, sigma, min_count, quality_radius_multiplier })
    }

    /// The 5x5 grid of the Gaussian toy dataset.
    pub fn gaussians25(sigma: f64) -> Result<Self> {
        Self::new(gaussian_mode_centers(), sigma, DEFAULT_MIN_COUNT, DEFAULT_QUALITY_MULTIPLIER)
    }

    /// The Swiss roll has no discrete modes; a dense sweep of curve points
    /// serves as centers so the same distance metric applies.
    pub fn swiss_roll(noise: f64) -> Result<Self> {
        let sigma = if noise > 0.0 { noise } else { 0.05 };
        let n = SWISS_ROLL_METRIC_CENTERS;
        let centers = (0..n)
            .map(|i| {
                let t = SWISS_ROLL_T_MIN
                    + (SWISS_ROLL_T_MAX - SWISS_ROLL_T_MIN) * i as f64 / (n - 1) as f64;
                swiss_roll_curve(t)
            })
            .collect();
        // coverage counts are per curve segment, so the bar is lower
        Self::new(centers, sigma, 5, DEFAULT_QUALITY_MULTIPLIER)
    }

    pub fn quality_radius(&self) -> f64 {
        self.quality_radius_multiplier * self.sigma
    }

    fn nearest_center(&self, p: &[f64; 2]) -> (usize, f64) {
        let mut best = (0, f64::INFINITY);
        for (i, c) in self.centers.iter().enumerate() {
            let d = (p[0] - c[0]).hypot(p[1] - c[1]);
            if d < best.1 {
                best = (i, d);
            }
        }
        best
    }
}

/// Fraction of samples within the quality radius of their nearest center.
pub fn high_quality_fraction(samples: &[[f64; 2]], spec: &ModeSpec) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let radius = spec.quality_radius();
    let good = samples.iter().filter(|p| spec.nearest_center(p).1 <= radius).count();
    Ok(good as f64 / samples.len() as f64)
}

/// Number of centers that received at least `min_count` high-quality samples.
pub fn modes_captured(samples: &[[f64; 2]], spec: &ModeSpec) -> Result<usize> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let radius = spec.quality_radius();
    let mut counts = vec![0usize; spec.centers.len()];
    for p in samples {
        let (i, d) = spec.nearest_center(p);
        if d <= radius {
            counts[i] += 1;
        }
    }
    Ok(counts.iter().filter(|&&c| c >= spec.min_count).count())
}
