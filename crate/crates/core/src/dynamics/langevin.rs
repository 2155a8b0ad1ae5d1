//! Langevin samplers: latent-space chains through the frozen decoder,
//! plain observation-space chains, and tilted observation-space chains for
//! bases with analytic log-density.
//!
//! One update is `s' = s - (eps/2) * drift(s) + sqrt(eps) * noise_scale * w`
//! with `w ~ N(0, I)`; the drift is the gradient of the energy minus, where
//! applicable, the gradient of the base log-density. All chains in a batch
//! advance together; noise is drawn row-major per step from a single stream.

use crate::error::{Error, Result};
use crate::models::{BaseGenerator, EnergyNetwork};
use crate::numerics::{Tape, Tensor};
use crate::rng::SeedRng;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LangevinConfig {
    pub epsilon: f64,
    pub steps: usize,
    /// Multiplier on the sqrt(eps) noise term; 1.0 is the exact update.
    pub noise_scale: f64,
    pub record_trajectory: bool,
}

pub const DEFAULT_EPSILON: f64 = 0.01;
pub const DEFAULT_TRAIN_STEPS: usize = 60;
pub const DEFAULT_SAMPLE_STEPS: usize = 100;

impl LangevinConfig {
    /// Training-chain defaults (short run, fresh initialization).
    pub fn training() -> Self {
        LangevinConfig {
            epsilon: DEFAULT_EPSILON,
            steps: DEFAULT_TRAIN_STEPS,
            noise_scale: 1.0,
            record_trajectory: false,
        }
    }

    /// Sampling-chain defaults (longer run for final sample quality).
    pub fn sampling() -> Self {
        LangevinConfig { steps: DEFAULT_SAMPLE_STEPS, ..Self::training() }
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        self.steps = steps;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) || !self.epsilon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "langevin epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.steps == 0 {
            return Err(Error::InvalidParameter("langevin step count must be at least 1".into()));
        }
        if !(self.noise_scale >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "noise_scale must be non-negative, got {}",
                self.noise_scale
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct ChainResult {
    pub state: Tensor,
    /// Recorded states, index 0 being the initial batch, when requested.
    pub trajectory: Option<Vec<Tensor>>,
}

/// d/dz of the summed energies E(G(z)) over the batch, by reverse-mode
/// differentiation through the frozen decoder and energy network.
pub fn grad_energy_through_decoder(
    base: &BaseGenerator,
    energy: &EnergyNetwork,
    z: &Tensor,
) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let zid = tape.leaf(&z.clone().with_grad());
    let x = base.decode_on_tape(&mut tape, zid)?;
    let e = energy.energy_on_tape(&mut tape, x, false)?.output;
    let s = tape.sum(e)?;
    tape.backward(s)?;
    Ok(tape.grad(zid).map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; z.numel()]))
}

/// d/dx of the summed energies E(x) over the batch.
pub fn grad_energy(energy: &EnergyNetwork, x: &Tensor) -> Result<Vec<f64>> {
    let mut tape = Tape::new();
    let xid = tape.leaf(&x.clone().with_grad());
    let e = energy.energy_on_tape(&mut tape, xid, false)?.output;
    let s = tape.sum(e)?;
    tape.backward(s)?;
    Ok(tape.grad(xid).map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; x.numel()]))
}

fn apply_update(
    state: &Tensor,
    drift: &[f64],
    epsilon: f64,
    noise_scale: f64,
    omega: &Tensor,
) -> Result<Tensor> {
    if omega.shape() != state.shape() {
        return Err(Error::ShapeMismatch {
            op: "langevin_step",
            details: format!("noise {:?} vs state {:?}", omega.shape(), state.shape()),
        });
    }
    let root_eps = epsilon.sqrt();
    let data: Vec<f64> = state
        .data()
        .iter()
        .zip(drift.iter())
        .zip(omega.data().iter())
        .map(|((s, d), w)| s - 0.5 * epsilon * d + root_eps * noise_scale * w)
        .collect();
    Tensor::new(data, state.shape().to_vec())
}

/// One latent update with injected noise:
/// z' = z - (eps/2) * grad_z(E(G(z)) - log p(z)) + sqrt(eps) * noise_scale * w.
pub fn latent_step(
    base: &BaseGenerator,
    energy: &EnergyNetwork,
    z: &Tensor,
    epsilon: f64,
    noise_scale: f64,
    omega: &Tensor,
) -> Result<Tensor> {
    let grad_e = grad_energy_through_decoder(base, energy, z)?;
    let prior = base.grad_log_prior(z)?;
    let drift: Vec<f64> = grad_e.iter().zip(prior.iter()).map(|(g, p)| g - p).collect();
    apply_update(z, &drift, epsilon, noise_scale, omega)
}

/// One plain observation-space update: x' = x - (eps/2) grad E(x) + noise.
pub fn observation_step(
    energy: &EnergyNetwork,
    x: &Tensor,
    epsilon: f64,
    noise_scale: f64,
    omega: &Tensor,
) -> Result<Tensor> {
    let drift = grad_energy(energy, x)?;
    apply_update(x, &drift, epsilon, noise_scale, omega)
}

/// One tilted observation-space update:
/// x' = x - (eps/2) * grad_x(E(x) - log p_base(x)) + noise.
pub fn tilted_step(
    base: &BaseGenerator,
    energy: &EnergyNetwork,
    x: &Tensor,
    epsilon: f64,
    noise_scale: f64,
    omega: &Tensor,
) -> Result<Tensor> {
    let grad_e = grad_energy(energy, x)?;
    let prior = base.grad_log_prior(x)?;
    let drift: Vec<f64> = grad_e.iter().zip(prior.iter()).map(|(g, p)| g - p).collect();
    apply_update(x, &drift, epsilon, noise_scale, omega)
}

fn run_chain(
    state0: &Tensor,
    cfg: &LangevinConfig,
    rng: &mut SeedRng,
    mut step: impl FnMut(&Tensor, &Tensor) -> Result<Tensor>,
) -> Result<ChainResult> {
    cfg.validate()?;
    let mut state = state0.clone();
    let mut trajectory = cfg.record_trajectory.then(|| vec![state.clone()]);
    let mut noise = vec![0.0; state.numel()];
    for i in 0..cfg.steps {
        rng.fill_normal(&mut noise);
        let omega = Tensor::new(noise.clone(), state.shape().to_vec())?;
        state = step(&state, &omega).map_err(|e| match e {
            Error::NonFinite { .. } | Error::NonFiniteEval(_) => Error::LangevinDiverged { step: i },
            other => other,
        })?;
        if let Some(t) = trajectory.as_mut() {
            t.push(state.clone());
        }
    }
    Ok(ChainResult { state, trajectory })
}

/// Latent-space chain: samples z approximately from
/// p(z) exp(-E(G(z))) / Z after enough steps.
pub fn langevin_latent(
    base: &BaseGenerator,
    energy: &EnergyNetwork,
    z0: &Tensor,
    cfg: &LangevinConfig,
    rng: &mut SeedRng,
) -> Result<ChainResult> {
    if z0.shape().len() != 2 || z0.shape()[1] != base.latent_dim() {
        return Err(Error::ShapeMismatch {
            op: "langevin_latent",
            details: format!("z0 {:?} vs latent dim {}", z0.shape(), base.latent_dim()),
        });
    }
    if energy.input_dim() != base.obs_dim() {
        return Err(Error::ShapeMismatch {
            op: "langevin_latent",
            details: format!(
                "energy consumes {}, decoder emits {}",
                energy.input_dim(),
                base.obs_dim()
            ),
        });
    }
    run_chain(z0, cfg, rng, |z, w| latent_step(base, energy, z, cfg.epsilon, cfg.noise_scale, w))
}

/// Observation-space chain for the plain energy model exp(-E(x)) / Z.
pub fn langevin_observation(
    energy: &EnergyNetwork,
    x0: &Tensor,
    cfg: &LangevinConfig,
    rng: &mut SeedRng,
) -> Result<ChainResult> {
    if x0.shape().len() != 2 || x0.shape()[1] != energy.input_dim() {
        return Err(Error::ShapeMismatch {
            op: "langevin_observation",
            details: format!("x0 {:?} vs energy input dim {}", x0.shape(), energy.input_dim()),
        });
    }
    run_chain(x0, cfg, rng, |x, w| observation_step(energy, x, cfg.epsilon, cfg.noise_scale, w))
}

/// Observation-space chain for the tilted density p_base(x) exp(-E(x)) / Z.
/// Only available for bases whose log-density is analytic.
pub fn langevin_observation_tilted(
    base: &BaseGenerator,
    energy: &EnergyNetwork,
    x0: &Tensor,
    cfg: &LangevinConfig,
    rng: &mut SeedRng,
) -> Result<ChainResult> {
    if !base.is_analytic() {
        return Err(Error::NonAnalyticBase { kind: base.kind().as_str() });
    }
    if x0.shape().len() != 2 || x0.shape()[1] != base.obs_dim() {
        return Err(Error::ShapeMismatch {
            op: "langevin_observation_tilted",
            details: format!("x0 {:?} vs obs dim {}", x0.shape(), base.obs_dim()),
        });
    }
    run_chain(x0, cfg, rng, |x, w| tilted_step(base, energy, x, cfg.epsilon, cfg.noise_scale, w))
}

/// Dump one chain of a recorded trajectory as CSV with columns
/// `step,coord_0,..,coord_{d-1}`.
pub fn trajectory_csv(trajectory: &[Tensor], chain: usize) -> Result<String> {
    use std::fmt::Write as _;
    let Some(first) = trajectory.first() else {
        return Err(Error::InvalidParameter("trajectory is empty".into()));
    };
    if chain >= first.rows() {
        return Err(Error::InvalidParameter(format!(
            "chain {chain} out of range ({} chains recorded)",
            first.rows()
        )));
    }
    let d = first.shape()[1];
    let mut out = String::new();
    out.push_str("step");
    for j in 0..d {
        let _ = write!(out, ",coord_{j}");
    }
    out.push('\n');
    for (step, state) in trajectory.iter().enumerate() {
        let _ = write!(out, "{step}");
        for v in state.row(chain) {
            let _ = write!(out, ",{v:.16e}");
        }
        out.push('\n');
    }
    Ok(out)
}

/// Read a trajectory CSV back as a point list (first two coordinates).
pub fn trajectory_from_csv(text: &str) -> Result<Vec<[f64; 2]>> {
    let mut rows = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() < 3 {
            return Err(Error::InvalidParameter(format!(
                "trajectory line {}: expected step plus at least 2 coordinates",
                idx + 1
            )));
        }
        let x = fields[1].trim().parse::<f64>();
        let y = fields[2].trim().parse::<f64>();
        match (x, y) {
            (Ok(x), Ok(y)) => rows.push([x, y]),
            _ => {
                return Err(Error::InvalidParameter(format!(
                    "trajectory line {}: bad number",
                    idx + 1
                )))
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::InvalidParameter("trajectory has no data rows".into()));
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(steps: usize, noise_scale: f64) -> LangevinConfig {
        LangevinConfig { epsilon: 0.01, steps, noise_scale, record_trajectory: false }
    }

    #[test]
    fn zero_energy_one_step_contracts_by_half_eps() {
        // drift = -grad log p = z, so z' = z (1 - eps/2)
        let base = BaseGenerator::identity_2d();
        let energy = EnergyNetwork::zero(2);
        let z0 = Tensor::new(vec![1.0, 0.0], vec![1, 2]).unwrap();
        let mut rng = SeedRng::new(0);
        let out = langevin_latent(&base, &energy, &z0, &cfg(1, 0.0), &mut rng).unwrap();
        assert!((out.state.data()[0] - 0.995).abs() < 1e-15);
        assert_eq!(out.state.data()[1], 0.0);
    }

    #[test]
    fn exact_update_formula_with_injected_noise() {
        let base = BaseGenerator::identity_2d();
        let energy = EnergyNetwork::quadratic_half_norm(2);
        for i in 0..50 {
            let s = i as f64;
            let z = Tensor::new(vec![0.1 * s - 2.0, 0.37 * (s + 1.0).sin()], vec![1, 2]).unwrap();
            let w = Tensor::new(vec![(s * 0.77).cos(), (s * 1.3).sin()], vec![1, 2]).unwrap();
            let eps = 0.001 + 0.002 * (i % 7) as f64;
            let out = latent_step(&base, &energy, &z, eps, 1.0, &w).unwrap();
            // E(G(z)) = ||z||^2/2 so grad is z; drift = z - (-z) = 2z
            for j in 0..2 {
                let expected =
                    z.data()[j] - 0.5 * eps * 2.0 * z.data()[j] + eps.sqrt() * w.data()[j];
                assert!(
                    (out.data()[j] - expected).abs() <= 1e-12 * expected.abs().max(1.0),
                    "step mismatch at {j}"
                );
            }
        }
    }

    #[test]
    fn zero_energy_chain_identical_to_prior_only_chain() {
        // E == 0 must consume the identical rng stream and produce identical
        // bytes as a chain whose drift is the prior term alone.
        let base = BaseGenerator::identity_1d();
        let energy = EnergyNetwork::zero(1);
        let z0 = Tensor::new(vec![0.4, -1.0, 2.0], vec![3, 1]).unwrap();
        let c = cfg(25, 1.0);

        let mut rng1 = SeedRng::new(42);
        let got = langevin_latent(&base, &energy, &z0, &c, &mut rng1).unwrap();

        let mut rng2 = SeedRng::new(42);
        let mut state = z0.clone();
        let mut noise = vec![0.0; state.numel()];
        for _ in 0..c.steps {
            rng2.fill_normal(&mut noise);
            let data: Vec<f64> = state
                .data()
                .iter()
                .zip(noise.iter())
                .map(|(z, w)| z - 0.5 * c.epsilon * z + c.epsilon.sqrt() * w)
                .collect();
            state = Tensor::new(data, state.shape().to_vec()).unwrap();
        }
        for (a, b) in got.state.data().iter().zip(state.data().iter()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn noiseless_observation_chain_is_gradient_descent() {
        // E = ||x||^2/2, noise_scale = 0: x_k = x_0 (1 - eps/2)^k
        let energy = EnergyNetwork::quadratic_half_norm(1);
        let x0 = Tensor::new(vec![2.0], vec![1, 1]).unwrap();
        let k = 40;
        let mut rng = SeedRng::new(1);
        let out = langevin_observation(&energy, &x0, &cfg(k, 0.0), &mut rng).unwrap();
        let expected = 2.0 * (1.0f64 - 0.005).powi(k as i32);
        assert!((out.state.data()[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn constant_energy_displacement_variance_accumulates() {
        // E constant: k steps of pure noise, displacement variance = k * eps.
        let energy = EnergyNetwork::linear(&[0.0, 0.0], 3.0);
        let n = 4000;
        let k = 16;
        let x0 = Tensor::zeros(vec![n, 2]).unwrap();
        let mut rng = SeedRng::new(5);
        let out = langevin_observation(&energy, &x0, &cfg(k, 1.0), &mut rng).unwrap();
        let var = out.state.data().iter().map(|v| v * v).sum::<f64>() / (2 * n) as f64;
        let expected = k as f64 * 0.01;
        assert!((var - expected).abs() < 0.1 * expected, "var {var} vs {expected}");
    }

    #[test]
    fn tilted_zero_energy_reduces_to_base_chain() {
        let base = BaseGenerator::identity_1d();
        let zero = EnergyNetwork::zero(1);
        let x0 = Tensor::new(vec![0.9], vec![1, 1]).unwrap();
        let c = cfg(30, 1.0);
        let mut r1 = SeedRng::new(7);
        let tilted = langevin_observation_tilted(&base, &zero, &x0, &c, &mut r1).unwrap();
        // same rng stream, latent chain on the same identity base
        let mut r2 = SeedRng::new(7);
        let latent = langevin_latent(&base, &zero, &x0, &c, &mut r2).unwrap();
        assert_eq!(tilted.state.data()[0].to_bits(), latent.state.data()[0].to_bits());
    }

    #[test]
    fn tilted_rejects_vae_base() {
        let mut rng = SeedRng::new(2);
        let vae = crate::models::VaeModel::new(2, 2, &[4], 1.0, &mut rng).unwrap();
        let base = BaseGenerator::from_vae(&vae);
        let e = EnergyNetwork::zero(2);
        let x0 = Tensor::zeros(vec![1, 2]).unwrap();
        let err = langevin_observation_tilted(&base, &e, &x0, &cfg(1, 1.0), &mut rng).unwrap_err();
        assert!(matches!(err, Error::NonAnalyticBase { .. }));
    }

    #[test]
    fn deterministic_when_noise_scale_zero() {
        let base = BaseGenerator::identity_2d();
        let energy = EnergyNetwork::quadratic_half_norm(2);
        let z0 = Tensor::new(vec![1.0, -0.5], vec![1, 2]).unwrap();
        let mut r1 = SeedRng::new(1);
        let mut r2 = SeedRng::new(999);
        let a = langevin_latent(&base, &energy, &z0, &cfg(20, 0.0), &mut r1).unwrap();
        let b = langevin_latent(&base, &energy, &z0, &cfg(20, 0.0), &mut r2).unwrap();
        assert_eq!(a.state.data(), b.state.data());
    }

    #[test]
    fn trajectory_records_initial_plus_each_step() {
        let base = BaseGenerator::identity_1d();
        let energy = EnergyNetwork::zero(1);
        let z0 = Tensor::new(vec![1.0], vec![1, 1]).unwrap();
        let c = LangevinConfig { record_trajectory: true, ..cfg(5, 1.0) };
        let mut rng = SeedRng::new(3);
        let out = langevin_latent(&base, &energy, &z0, &c, &mut rng).unwrap();
        let traj = out.trajectory.unwrap();
        assert_eq!(traj.len(), 6);

        let base2 = BaseGenerator::identity_2d();
        let e2 = EnergyNetwork::zero(2);
        let z2 = Tensor::new(vec![1.0, -1.0], vec![1, 2]).unwrap();
        let c2 = LangevinConfig { record_trajectory: true, ..cfg(3, 1.0) };
        let out2 = langevin_latent(&base2, &e2, &z2, &c2, &mut rng).unwrap();
        let csv = trajectory_csv(out2.trajectory.as_ref().unwrap(), 0).unwrap();
        assert!(csv.starts_with("step,coord_0,coord_1\n"));
        let parsed = trajectory_from_csv(&csv).unwrap();
        assert_eq!(parsed.len(), 4);
        assert_eq!(parsed[0], [1.0, -1.0]);
    }
}
