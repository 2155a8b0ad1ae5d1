//! Grid quadrature oracles. These are the independent numerical routes the
//! samplers and gradient estimators are checked against: moments of the
//! tilted density p(z) exp(-E(G(z))) / Z, and the stationary distribution of
//! the discretized one-dimensional chain via its transition kernel.

use crate::error::{Error, Result};
use crate::models::{BaseGenerator, EnergyNetwork};
use crate::numerics::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OracleMethod {
    Quadrature,
    Snis,
}

/// An oracle estimate always travels with its error bound.
#[derive(Clone, Copy, Debug)]
pub struct OracleResult {
    pub value: f64,
    /// Standard error (SNIS) or grid-refinement error bound (quadrature).
    pub error: f64,
    pub method: OracleMethod,
    /// Sample count (SNIS) or grid size (quadrature).
    pub count: usize,
    /// Effective sample size, for the SNIS method.
    pub ess: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { lo: -8.0, hi: 8.0, points: 4001 }
    }
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.points < 9 || !(self.lo < self.hi) {
            return Err(Error::InvalidParameter(format!(
                "bad grid spec: [{}, {}] with {} points",
                self.lo, self.hi, self.points
            )));
        }
        Ok(())
    }

    pub fn nodes(&self) -> Vec<f64> {
        let n = self.points;
        (0..n).map(|i| self.lo + (self.hi - self.lo) * i as f64 / (n - 1) as f64).collect()
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.points - 1) as f64
    }

    fn halved(&self) -> GridSpec {
        GridSpec { lo: self.lo, hi: self.hi, points: (self.points - 1) / 2 + 1 }
    }
}

/// Normalizer, mean, and per-coordinate variance of the tilted density.
#[derive(Clone, Debug)]
pub struct TiltedMoments {
    pub normalizer: OracleResult,
    pub mean: Vec<OracleResult>,
    pub variance: Vec<OracleResult>,
}

const TAIL_THRESHOLD: f64 = 1e-8;

/// Trapezoid-rule moments of p(z) exp(-E(G(z))) / Z on a bounded grid, for
/// analytic bases of dimension 1 or 2. The error bound per quantity is the
/// difference against a half-resolution grid; boundary integrand mass above
/// a small threshold is an error (widen the grid).
pub fn quadrature_tilted_moments(
    base: &BaseGenerator,
    energy: &EnergyNetwork,
    grid: &GridSpec,
) -> Result<TiltedMoments> {
    if !base.is_analytic() {
        return Err(Error::NonAnalyticBase { kind: base.kind().as_str() });
    }
    let d = base.latent_dim();
    if d > 2 {
        return Err(Error::InvalidParameter(format!("quadrature supports d <= 2, got {d}")));
    }
    grid.validate()?;
    let full = raw_moments(base, energy, grid)?;
    let half = raw_moments(base, energy, &grid.halved())?;

    let tail_fraction = full.edge_mass / full.z;
    if tail_fraction > TAIL_THRESHOLD {
        return Err(Error::TailMass { mass: tail_fraction, threshold: TAIL_THRESHOLD });
    }

    let res = |v: f64, v_half: f64| OracleResult {
        value: v,
        error: (v - v_half).abs() + 1e-15,
        method: OracleMethod::Quadrature,
        count: grid.points,
        ess: None,
    };
    Ok(TiltedMoments {
        normalizer: res(full.z, half.z),
        mean: full.mean.iter().zip(half.mean.iter()).map(|(&a, &b)| res(a, b)).collect(),
        variance: full.var.iter().zip(half.var.iter()).map(|(&a, &b)| res(a, b)).collect(),
    })
}

struct RawMoments {
    z: f64,
    mean: Vec<f64>,
    var: Vec<f64>,
    edge_mass: f64,
}

fn raw_moments(base: &BaseGenerator, energy: &EnergyNetwork, grid: &GridSpec) -> Result<RawMoments> {
    let d = base.latent_dim();
    let nodes = grid.nodes();
    let h = grid.spacing();
    let n = nodes.len();

    // enumerate grid points as latent rows
    let rows: Vec<Vec<f64>> = match d {
        1 => nodes.iter().map(|&z| vec![z]).collect(),
        _ => {
            let mut rows = Vec::with_capacity(n * n);
            for &zy in &nodes {
                for &zx in &nodes {
                    rows.push(vec![zx, zy]);
                }
            }
            rows
        }
    };

    let mut z_total = 0.0;
    let mut m1 = vec![0.0; d];
    let mut m2 = vec![0.0; d];
    let mut edge_mass = 0.0f64;

    // process in chunks to bound the batch size through the energy net
    const CHUNK: usize = 8192;
    let mut integrand = Vec::with_capacity(rows.len());
    for chunk in rows.chunks(CHUNK) {
        let flat: Vec<f64> = chunk.iter().flatten().copied().collect();
        let zt = Tensor::new(flat, vec![chunk.len(), d])?;
        let xt = base.decode(&zt)?;
        let e = energy.energy(&xt)?;
        let lp = base.log_prior(&zt)?;
        for (le, lpi) in e.iter().zip(lp.iter()) {
            let v = (lpi - le).exp();
            if !v.is_finite() {
                return Err(Error::NonFiniteEval("quadrature integrand".into()));
            }
            integrand.push(v);
        }
    }

    let weight = |idx: usize| -> f64 {
        // trapezoid endpoint halving per axis
        if idx == 0 || idx == n - 1 {
            0.5
        } else {
            1.0
        }
    };

    match d {
        1 => {
            for (i, (&z, &f)) in nodes.iter().zip(integrand.iter()).enumerate() {
                let w = weight(i) * h;
                z_total += w * f;
                m1[0] += w * f * z;
                m2[0] += w * f * z * z;
                if i == 0 || i == n - 1 {
                    edge_mass += w * f;
                }
            }
        }
        _ => {
            for iy in 0..n {
                for ix in 0..n {
                    let f = integrand[iy * n + ix];
                    let w = weight(ix) * weight(iy) * h * h;
                    z_total += w * f;
                    let (zx, zy) = (nodes[ix], nodes[iy]);
                    m1[0] += w * f * zx;
                    m1[1] += w * f * zy;
                    m2[0] += w * f * zx * zx;
                    m2[1] += w * f * zy * zy;
                    if ix == 0 || ix == n - 1 || iy == 0 || iy == n - 1 {
                        edge_mass += w * f;
                    }
                }
            }
        }
    }

    if z_total <= 0.0 || !z_total.is_finite() {
        return Err(Error::NonFiniteEval("quadrature normalizer".into()));
    }
    let mean: Vec<f64> = m1.iter().map(|v| v / z_total).collect();
    let var: Vec<f64> =
        m2.iter().zip(mean.iter()).map(|(v2, m)| v2 / z_total - m * m).collect();
    Ok(RawMoments { z: z_total, mean, var, edge_mass })
}

/// Stationary mean and variance of the 1-D discretized chain
/// `x' = step_mean(x) + noise_std * w`, `w ~ N(0,1)`, computed by power
/// iteration on the banded transition kernel over the grid.
pub fn discrete_chain_stationary_moments(
    step_mean: impl Fn(f64) -> f64,
    noise_std: f64,
    grid: &GridSpec,
    max_iters: usize,
    tol: f64,
) -> Result<(f64, f64)> {
    grid.validate()?;
    if !(noise_std > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "kernel quadrature needs positive noise, got {noise_std}"
        )));
    }
    let nodes = grid.nodes();
    let n = nodes.len();
    let h = grid.spacing();
    if h > noise_std {
        return Err(Error::InvalidParameter(format!(
            "grid spacing {h:.4} too coarse for kernel width {noise_std:.4}"
        )));
    }

    // Precompute the banded kernel: row i holds the transition densities from
    // source node i into its band of target nodes (mass beyond 10 noise
    // widths is negligible and dropped; renormalization absorbs the loss).
    let band = (10.0 * noise_std / h).ceil() as usize;
    let width = 2 * band + 1;
    let norm = 1.0 / (noise_std * (std::f64::consts::TAU).sqrt());
    let inv2s2 = 1.0 / (2.0 * noise_std * noise_std);
    let mut kernel = vec![0.0f64; n * width];
    let mut starts = vec![0usize; n];
    for (i, &x) in nodes.iter().enumerate() {
        let mu = step_mean(x);
        if !mu.is_finite() {
            return Err(Error::NonFiniteEval("kernel step mean".into()));
        }
        let center = ((mu - grid.lo) / h).round() as i64;
        let j0 = (center - band as i64).max(0) as usize;
        let j1 = ((center + band as i64).min(n as i64 - 1)) as usize;
        starts[i] = j0;
        let row = &mut kernel[i * width..];
        for (o, slot) in row[..=(j1 - j0)].iter_mut().enumerate() {
            let dy = nodes[j0 + o] - mu;
            *slot = norm * (-dy * dy * inv2s2).exp();
        }
    }

    // initial density: standard normal restricted to the grid
    let mut pi: Vec<f64> = nodes.iter().map(|&x| (-0.5 * x * x).exp()).collect();
    normalize(&mut pi, h);
    let mut next = vec![0.0f64; n];

    for _ in 0..max_iters {
        next.iter_mut().for_each(|v| *v = 0.0);
        for (i, &p) in pi.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            let src = p * h;
            let j0 = starts[i];
            let row = &kernel[i * width..(i + 1) * width];
            let len = (n - j0).min(width);
            for (nj, &kij) in next[j0..j0 + len].iter_mut().zip(row[..len].iter()) {
                *nj += src * kij;
            }
        }
        normalize(&mut next, h);
        let l1: f64 = pi.iter().zip(next.iter()).map(|(a, b)| (a - b).abs()).sum::<f64>() * h;
        std::mem::swap(&mut pi, &mut next);
        if l1 < tol {
            break;
        }
    }

    let mut mean = 0.0;
    let mut second = 0.0;
    for (&x, &p) in nodes.iter().zip(pi.iter()) {
        mean += x * p * h;
        second += x * x * p * h;
    }
    Ok((mean, second - mean * mean))
}

fn normalize(pi: &mut [f64], h: f64) {
    let total: f64 = pi.iter().sum::<f64>() * h;
    if total > 0.0 {
        for v in pi.iter_mut() {
            *v /= total;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid() -> GridSpec {
        GridSpec::default()
    }

    #[test]
    fn untilted_standard_normal() {
        let base = BaseGenerator::identity_1d();
        let zero = EnergyNetwork::zero(1);
        let m = quadrature_tilted_moments(&base, &zero, &grid()).unwrap();
        assert!((m.normalizer.value - 1.0).abs() < 1e-9);
        assert!(m.mean[0].value.abs() < 1e-12);
        assert!((m.variance[0].value - 1.0).abs() < 1e-9);
    }

    #[test]
    fn quadratic_tilt_halves_variance() {
        // base N(0,1), E = z^2/2: tilted ~ exp(-z^2), variance 1/2
        let base = BaseGenerator::identity_1d();
        let e = EnergyNetwork::quadratic_half_norm(1);
        let m = quadrature_tilted_moments(&base, &e, &grid()).unwrap();
        assert!((m.variance[0].value - 0.5).abs() < 1e-9, "var {}", m.variance[0].value);
    }

    #[test]
    fn linear_tilt_shifts_mean() {
        // base N(0,1), E = -z: tilted = N(1,1), Z = exp(1/2)
        let base = BaseGenerator::identity_1d();
        let e = EnergyNetwork::linear(&[-1.0], 0.0);
        let m = quadrature_tilted_moments(&base, &e, &grid()).unwrap();
        assert!((m.normalizer.value - (0.5f64).exp()).abs() < 1e-9, "Z {}", m.normalizer.value);
        assert!((m.mean[0].value - 1.0).abs() < 1e-9);
        assert!((m.variance[0].value - 1.0).abs() < 1e-8);
    }

    #[test]
    fn two_dimensional_untilted() {
        let base = BaseGenerator::identity_2d();
        let zero = EnergyNetwork::zero(2);
        let g = GridSpec { lo: -7.0, hi: 7.0, points: 401 };
        let m = quadrature_tilted_moments(&base, &zero, &g).unwrap();
        assert!((m.normalizer.value - 1.0).abs() < 1e-6);
        assert!((m.variance[0].value - 1.0).abs() < 1e-6);
        assert!((m.variance[1].value - 1.0).abs() < 1e-6);
    }

    #[test]
    fn narrow_grid_trips_tail_check() {
        let base = BaseGenerator::identity_1d();
        let zero = EnergyNetwork::zero(1);
        let g = GridSpec { lo: -2.0, hi: 2.0, points: 801 };
        assert!(matches!(
            quadrature_tilted_moments(&base, &zero, &g),
            Err(Error::TailMass { .. })
        ));
    }

    #[test]
    fn kernel_oracle_reproduces_linear_chain_variance() {
        // E == 0 chain: x' = x (1 - eps/2) + sqrt(eps) w has stationary
        // variance 1 / (1 - eps/4) in closed form.
        let eps = 0.01f64;
        let g = GridSpec { lo: -6.0, hi: 6.0, points: 1201 };
        let (mean, var) = discrete_chain_stationary_moments(
            |x| x - 0.5 * eps * x,
            eps.sqrt(),
            &g,
            20_000,
            1e-13,
        )
        .unwrap();
        let expected = 1.0 / (1.0 - eps / 4.0);
        assert!(mean.abs() < 1e-6, "mean {mean}");
        assert!((var - expected).abs() < 1e-4, "var {var} vs {expected}");
    }

    #[test]
    fn kernel_oracle_linear_tilt_mean() {
        // E = -x tilting N(0,1): drift = -(eps/2)(x - 1); stationary mean -> 1
        let eps = 0.01f64;
        let g = GridSpec { lo: -6.0, hi: 8.0, points: 1401 };
        let (mean, _) = discrete_chain_stationary_moments(
            |x| x - 0.5 * eps * (x - 1.0),
            eps.sqrt(),
            &g,
            20_000,
            1e-13,
        )
        .unwrap();
        assert!((mean - 1.0).abs() < 1e-4, "mean {mean}");
    }
}
