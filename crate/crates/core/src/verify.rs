//! The oracle-agreement suite behind `verify-oracles`: gradient checks
//! against finite differences, chain stationarity against closed forms and
//! the transition-kernel oracle, and the reparametrized negative phase
//! against self-normalized importance sampling. Every check reports its
//! measured value, the expected value, and the tolerance it was held to.

use crate::dynamics::{langevin_latent, latent_step, LangevinConfig};
use crate::error::Result;
use crate::evaluation::{
    discrete_chain_stationary_moments, quadrature_tilted_moments, snis_expectation, GridSpec,
};
use crate::models::{
    vae_elbo, vae_elbo_with_grads, Activation, BaseGenerator, EnergyNetwork, MlpNetwork, VaeModel,
};
use crate::numerics::{finite_diff_check, Tape, Tensor};
use crate::rng::{streams, SeedRng};
use crate::training::energy_phase_grads;

#[derive(Clone, Copy, Debug, Default)]
pub struct VerifyOptions {
    /// Fault-injection hook: flip the sign of the prior gradient used by the
    /// chain checks, which must make the stationarity checks fail.
    pub fault_flip_prior_gradient: bool,
}

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: &'static str,
    pub measured: f64,
    pub expected: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl CheckResult {
    fn from_parts(name: &'static str, outcome: Result<(f64, f64, f64)>) -> Self {
        match outcome {
            Ok((measured, expected, tolerance)) => CheckResult {
                name,
                measured,
                expected,
                tolerance,
                pass: measured.is_finite() && (measured - expected).abs() <= tolerance,
            },
            Err(_) => CheckResult {
                name,
                measured: f64::NAN,
                expected: 0.0,
                tolerance: 0.0,
                pass: false,
            },
        }
    }
}

/// Number of checks `run_oracle_suite` performs.
pub const ORACLE_SUITE_SIZE: usize = 12;

pub fn run_oracle_suite(opts: &VerifyOptions) -> Vec<CheckResult> {
    let base_1d = if opts.fault_flip_prior_gradient {
        BaseGenerator::identity_1d().with_flipped_prior_gradient()
    } else {
        BaseGenerator::identity_1d()
    };
    let base_2d = if opts.fault_flip_prior_gradient {
        BaseGenerator::identity_2d().with_flipped_prior_gradient()
    } else {
        BaseGenerator::identity_2d()
    };

    vec![
        CheckResult::from_parts("autodiff_vs_finite_differences", autodiff_fd()),
        CheckResult::from_parts("elbo_gradient_vs_finite_differences", elbo_fd()),
        CheckResult::from_parts("decoder_energy_gradient_vs_finite_differences", composite_fd()),
        CheckResult::from_parts("prior_gradient_vs_finite_differences", prior_fd(&base_2d)),
        CheckResult::from_parts(
            "zero_energy_chain_stationary_variance",
            zero_energy_variance(&base_1d),
        ),
        CheckResult::from_parts(
            "tilted_chain_variance_vs_kernel_oracle",
            tilted_variance(&base_1d),
        ),
        CheckResult::from_parts("tilted_chain_mean_vs_kernel_oracle", tilted_mean(&base_1d)),
        CheckResult::from_parts("quadrature_untilted_sanity", quadrature_sanity()),
        CheckResult::from_parts("quadrature_vs_snis_moments", quadrature_vs_snis()),
        CheckResult::from_parts("snis_vs_langevin_negative_phase", snis_vs_langevin()),
        CheckResult::from_parts("langevin_step_exact_formula", exact_step()),
        CheckResult::from_parts("constant_energy_gradient_zero", constant_energy_grad()),
    ]
}

// ---- gradient checks ----------------------------------------------------

fn random_mlp(rng: &mut SeedRng, sizes: &[usize]) -> Result<MlpNetwork> {
    let acts: Vec<Activation> = (0..sizes.len() - 1)
        .map(|i| {
            if i == sizes.len() - 2 {
                Activation::Identity
            } else if rng.uniform() < 0.5 {
                Activation::Tanh
            } else {
                Activation::Relu
            }
        })
        .collect();
    MlpNetwork::new(sizes, &acts, rng)
}

fn mlp_scalar_loss(net: &MlpNetwork, x: &Tensor) -> Result<(f64, Vec<Vec<f64>>)> {
    let mut tape = Tape::new();
    let xid = tape.constant(x);
    let fwd = net.forward_on_tape(&mut tape, xid, true)?;
    let sq = tape.square(fwd.output)?;
    let loss = tape.mean(sq)?;
    tape.backward(loss)?;
    let grads = fwd
        .param_ids
        .iter()
        .map(|&id| tape.grad(id).map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; tape.data(id).len()]))
        .collect();
    Ok((tape.scalar_value(loss), grads))
}

fn set_flat_params(net: &mut MlpNetwork, flat: &[f64]) {
    let mut off = 0;
    for p in net.params_mut() {
        let n = p.numel();
        p.data_mut().copy_from_slice(&flat[off..off + n]);
        off += n;
    }
}

fn autodiff_fd() -> Result<(f64, f64, f64)> {
    let mut rng = SeedRng::stream(11, streams::ORACLE);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let net = random_mlp(&mut rng, &[2, 5, 3, 1])?;
        let mut x = vec![0.0; 3 * 2];
        rng.fill_normal(&mut x);
        let x = Tensor::new(x, vec![3, 2])?;
        let (_, grads) = mlp_scalar_loss(&net, &x)?;
        let flat: Vec<f64> = net.params().iter().flat_map(|p| p.data().to_vec()).collect();
        let flat_grad: Vec<f64> = grads.iter().flatten().copied().collect();
        let err = finite_diff_check(
            |p| {
                let mut m = net.clone();
                set_flat_params(&mut m, p);
                m.forward(&x).map(|out| {
                    out.data().iter().map(|v| v * v).sum::<f64>() / out.numel() as f64
                })
            },
            &flat,
            &flat_grad,
            1e-6,
        )?;
        worst = worst.max(err);
    }
    Ok((worst, 0.0, 1e-4))
}

fn elbo_fd() -> Result<(f64, f64, f64)> {
    let mut rng = SeedRng::stream(12, streams::ORACLE);
    let mut worst = 0.0f64;
    for _ in 0..5 {
        let model = VaeModel::new(2, 2, &[6], 0.5, &mut rng)?;
        let mut batch = vec![0.0; 4 * 2];
        rng.fill_normal(&mut batch);
        let batch = Tensor::new(batch, vec![4, 2])?;
        let mut noise = vec![0.0; 4 * 2];
        rng.fill_normal(&mut noise);
        let noise = Tensor::new(noise, vec![4, 2])?;
        let eval = vae_elbo_with_grads(&model, &batch, &noise)?;
        let flat: Vec<f64> = model.params().iter().flat_map(|p| p.data().to_vec()).collect();
        let flat_grad: Vec<f64> = eval.grads.iter().flatten().copied().collect();
        let err = finite_diff_check(
            |p| {
                let mut m = model.clone();
                let mut off = 0;
                for t in m.params_mut() {
                    let n = t.numel();
                    t.data_mut().copy_from_slice(&p[off..off + n]);
                    off += n;
                }
                vae_elbo(&m, &batch, &noise)
            },
            &flat,
            &flat_grad,
            1e-6,
        )?;
        worst = worst.max(err);
    }
    Ok((worst, 0.0, 1e-4))
}

fn composite_fd() -> Result<(f64, f64, f64)> {
    // the z-gradient of E(G(z)): the quantity the latent chain drifts along
    let mut rng = SeedRng::stream(13, streams::ORACLE);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let vae = VaeModel::new(2, 2, &[6, 6], 0.5, &mut rng)?;
        let base = BaseGenerator::from_vae(&vae);
        let energy = EnergyNetwork::new(2, &[8], &mut rng)?;
        let mut z = vec![0.0; 2];
        rng.fill_normal(&mut z);
        let zt = Tensor::new(z.clone(), vec![1, 2])?;
        let grad = crate::dynamics::grad_energy_through_decoder(&base, &energy, &zt)?;
        let err = finite_diff_check(
            |p| {
                let zt = Tensor::new(p.to_vec(), vec![1, 2])?;
                let x = base.decode(&zt)?;
                Ok(energy.energy(&x)?[0])
            },
            &z,
            &grad,
            1e-6,
        )?;
        worst = worst.max(err);
    }
    Ok((worst, 0.0, 1e-4))
}

fn prior_fd(base: &BaseGenerator) -> Result<(f64, f64, f64)> {
    let mut rng = SeedRng::stream(14, streams::ORACLE);
    let mut worst = 0.0f64;
    for _ in 0..10 {
        let mut z = vec![0.0; 2];
        rng.fill_normal(&mut z);
        let zt = Tensor::new(z.clone(), vec![1, 2])?;
        let grad = base.grad_log_prior(&zt)?;
        let err = finite_diff_check(
            |p| {
                let zt = Tensor::new(p.to_vec(), vec![1, 2])?;
                Ok(base.log_prior(&zt)?[0])
            },
            &z,
            &grad,
            1e-6,
        )?;
        worst = worst.max(err);
    }
    Ok((worst, 0.0, 1e-5))
}

// ---- chain stationarity ---------------------------------------------------

/// Pool post-burn-in states across many parallel chains: `snapshots` state
/// dumps spaced `spacing` steps apart.
fn pooled_latent_moments(
    base: &BaseGenerator,
    energy: &EnergyNetwork,
    chains: usize,
    burn_in: usize,
    snapshots: usize,
    spacing: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let mut rng = SeedRng::stream(seed, streams::ORACLE);
    let mut state = base.sample_prior(chains, &mut rng)?;
    let cfg = |steps: usize| LangevinConfig {
        epsilon: 0.01,
        steps,
        noise_scale: 1.0,
        record_trajectory: false,
    };
    state = langevin_latent(base, energy, &state, &cfg(burn_in), &mut rng)?.state;
    let mut pool: Vec<f64> = Vec::with_capacity(chains * snapshots);
    pool.extend_from_slice(state.data());
    for _ in 1..snapshots {
        state = langevin_latent(base, energy, &state, &cfg(spacing), &mut rng)?.state;
        pool.extend_from_slice(state.data());
    }
    let n = pool.len() as f64;
    let mean = pool.iter().sum::<f64>() / n;
    let var = pool.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Ok((mean, var))
}

fn zero_energy_variance(base: &BaseGenerator) -> Result<(f64, f64, f64)> {
    let energy = EnergyNetwork::zero(1);
    let (_, var) = pooled_latent_moments(base, &energy, 4000, 1000, 6, 150, 21)?;
    let expected = 1.0 / (1.0 - 0.01 / 4.0);
    Ok((var, expected, 0.03 * expected))
}

fn tilted_variance(base: &BaseGenerator) -> Result<(f64, f64, f64)> {
    // E(x) = x^2/2 tilts the prior to exp(-x^2); compare the pooled chain
    // variance against the discrete-kernel stationary variance.
    let energy = EnergyNetwork::quadratic_half_norm(1);
    let (_, var) = pooled_latent_moments(base, &energy, 4000, 800, 6, 120, 22)?;
    let eps = 0.01f64;
    let g = GridSpec { lo: -6.0, hi: 6.0, points: 1201 };
    let (_, oracle_var) =
        discrete_chain_stationary_moments(|x| x - 0.5 * eps * (2.0 * x), eps.sqrt(), &g, 20_000, 1e-13)?;
    Ok((var, oracle_var, 0.05 * oracle_var))
}

fn tilted_mean(base: &BaseGenerator) -> Result<(f64, f64, f64)> {
    // E(x) = -x tilts N(0,1) to N(1,1)
    let energy = EnergyNetwork::linear(&[-1.0], 0.0);
    let (mean, _) = pooled_latent_moments(base, &energy, 4000, 800, 6, 120, 23)?;
    let eps = 0.01f64;
    let g = GridSpec { lo: -6.0, hi: 8.0, points: 1401 };
    let (oracle_mean, _) =
        discrete_chain_stationary_moments(|x| x - 0.5 * eps * (x - 1.0), eps.sqrt(), &g, 20_000, 1e-13)?;
    Ok((mean, oracle_mean, 0.05))
}

// ---- quadrature and SNIS ---------------------------------------------------

fn quadrature_sanity() -> Result<(f64, f64, f64)> {
    let base = BaseGenerator::identity_1d();
    let zero = EnergyNetwork::zero(1);
    let m = quadrature_tilted_moments(&base, &zero, &GridSpec::default())?;
    let dev = (m.normalizer.value - 1.0)
        .abs()
        .max(m.mean[0].value.abs())
        .max((m.variance[0].value - 1.0).abs());
    Ok((dev, 0.0, 1e-8))
}

/// Small random 1-D energies with bounded output so importance weights stay
/// healthy: E(z) = sum_j w2_j tanh(w1_j z + b1_j) + b2.
struct SmallEnergy {
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
}

impl SmallEnergy {
    fn random(rng: &mut SeedRng) -> Self {
        let h = 8;
        SmallEnergy {
            w1: (0..h).map(|_| rng.uniform_range(-1.5, 1.5)).collect(),
            b1: (0..h).map(|_| rng.uniform_range(-1.0, 1.0)).collect(),
            w2: (0..h).map(|_| rng.uniform_range(-0.5, 0.5)).collect(),
            b2: rng.uniform_range(-0.3, 0.3),
        }
    }

    fn network(&self) -> Result<EnergyNetwork> {
        let h = self.w1.len();
        let w1 = Tensor::new(self.w1.clone(), vec![1, h])?;
        let b1 = Tensor::new(self.b1.clone(), vec![h])?;
        let w2 = Tensor::new(self.w2.clone(), vec![h, 1])?;
        let b2 = Tensor::new(vec![self.b2], vec![1])?;
        EnergyNetwork::from_net(MlpNetwork::from_parts(
            &[1, h, 1],
            &[Activation::Tanh, Activation::Identity],
            vec![w1, w2],
            vec![b1, b2],
        )?)
    }

    /// d E / d w2_0 = tanh(w1_0 z + b1_0)
    fn dw20(&self, z: f64) -> f64 {
        (self.w1[0] * z + self.b1[0]).tanh()
    }
}

fn quadrature_vs_snis() -> Result<(f64, f64, f64)> {
    let base = BaseGenerator::identity_1d();
    let mut rng = SeedRng::stream(31, streams::ORACLE);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let spec = SmallEnergy::random(&mut rng);
        let energy = spec.network()?;
        let quad = quadrature_tilted_moments(&base, &energy, &GridSpec::default())?;
        let snis = snis_expectation(&base, &energy, |z| z[0], 20_000, 100.0, &mut rng)?;
        let bound = 3.0 * snis.error + quad.mean[0].error;
        worst = worst.max((quad.mean[0].value - snis.value).abs() / bound);
    }
    Ok((worst, 0.0, 1.0))
}

fn snis_vs_langevin() -> Result<(f64, f64, f64)> {
    // negative phase of the ML gradient for one parameter, two independent
    // estimators: SNIS under the prior vs long pooled Langevin chains.
    let base = BaseGenerator::identity_1d();
    let mut rng = SeedRng::stream(32, streams::ORACLE);
    let mut worst: f64 = 0.0;
    for k in 0..10 {
        let spec = SmallEnergy::random(&mut rng);
        let energy = spec.network()?;
        let snis = snis_expectation(&base, &energy, |z| spec.dw20(z[0]), 40_000, 100.0, &mut rng)?;

        let chains = 512;
        let mut crng = SeedRng::stream(100 + k, streams::ORACLE);
        let mut state = base.sample_prior(chains, &mut crng)?;
        let cfg = LangevinConfig { epsilon: 0.01, steps: 1500, noise_scale: 1.0, record_trajectory: false };
        state = langevin_latent(&base, &energy, &state, &cfg, &mut crng)?.state;
        let vals: Vec<f64> = state.data().iter().map(|&z| spec.dw20(z)).collect();
        let n = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / n;
        let sd = (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
        let se = sd / n.sqrt();

        let bound = 3.0 * (snis.error * snis.error + se * se).sqrt();
        worst = worst.max((snis.value - mean).abs() / bound);
    }
    Ok((worst, 0.0, 1.0))
}

// ---- exact arithmetic ------------------------------------------------------

fn exact_step() -> Result<(f64, f64, f64)> {
    let base = BaseGenerator::identity_2d();
    let energy = EnergyNetwork::quadratic_half_norm(2);
    let mut rng = SeedRng::stream(41, streams::ORACLE);
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let z = Tensor::new(vec![rng.normal(), rng.normal()], vec![1, 2])?;
        let w = Tensor::new(vec![rng.normal(), rng.normal()], vec![1, 2])?;
        let eps = rng.uniform_range(1e-4, 0.05);
        let out = latent_step(&base, &energy, &z, eps, 1.0, &w)?;
        for j in 0..2 {
            let expected = z.data()[j] - 0.5 * eps * (2.0 * z.data()[j]) + eps.sqrt() * w.data()[j];
            let dev = (out.data()[j] - expected).abs() / expected.abs().max(1.0);
            worst = worst.max(dev);
        }
    }
    Ok((worst, 0.0, 1e-12))
}

fn constant_energy_grad() -> Result<(f64, f64, f64)> {
    let energy = EnergyNetwork::linear(&[0.0, 0.0], 1.3);
    let x_pos = Tensor::from_points(&[[0.7, -0.4]; 128])?;
    let x_neg = Tensor::from_points(&[[2.0, 1.0]; 128])?;
    let (grads, _) = energy_phase_grads(&energy, &x_pos, &x_neg, 0.0)?;
    // bias is the second parameter; its gradient must be exactly zero
    Ok((grads[1][0].abs(), 0.0, 0.0))
}
