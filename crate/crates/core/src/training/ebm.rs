//! Maximum-likelihood training of the energy function, with the negative
//! phase estimated by short-run Langevin chains: latent-space chains through
//! the frozen decoder for the tilted model, or observation-space chains with
//! a persistent replay buffer for the plain baseline.
//!
//! The per-step surrogate whose gradient is descended is
//!   mean E(x+) - mean E(x-) + alpha * (mean E(x+)^2 + mean E(x-)^2)
//! with x- held fixed (samples, not functions, of the parameters), which
//! reproduces the positive-minus-negative phase gradient plus the energy
//! regularizer.

use crate::dynamics::{langevin_latent, langevin_observation, LangevinConfig, ReplayBuffer};
use crate::error::{Error, Result};
use crate::evaluation::{high_quality_fraction, ModeSpec};
use crate::models::{BaseGenerator, EnergyNetwork};
use crate::numerics::{Optimizer, Tape, Tensor};
use crate::rng::{streams, SeedRng};
use crate::training::early_stop::early_stop;
use crate::training::log::{TrainLog, TrainRecord};

#[derive(Clone, Debug, PartialEq)]
pub struct EbmTrainConfig {
    pub steps: u64,
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Energy regularization coefficient (alpha).
    pub reg_coefficient: f64,
    /// Short-run training chains.
    pub langevin: LangevinConfig,
    /// Longer chains used for evaluation and final sampling.
    pub sample_langevin: LangevinConfig,
    pub eval_every: u64,
    pub patience: usize,
    pub eval_samples: usize,
    pub seed: u64,
}

impl Default for EbmTrainConfig {
    fn default() -> Self {
        EbmTrainConfig {
            steps: 1000,
            batch_size: 128,
            learning_rate: 1e-4,
            reg_coefficient: 0.1,
            langevin: LangevinConfig::training(),
            sample_langevin: LangevinConfig::sampling(),
            eval_every: 50,
            patience: 3,
            eval_samples: 2000,
            seed: 0,
        }
    }
}

impl EbmTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidParameter("batch size must be positive".into()));
        }
        if !(self.learning_rate >= 0.0) || !(self.reg_coefficient >= 0.0) {
            return Err(Error::InvalidParameter(
                "learning rate and regularization must be non-negative".into(),
            ));
        }
        if self.eval_every == 0 || self.patience == 0 || self.eval_samples == 0 {
            return Err(Error::InvalidParameter(
                "eval_every, patience, and eval_samples must be positive".into(),
            ));
        }
        if self.steps > 0 && self.eval_every > self.steps {
            return Err(Error::InvalidParameter(format!(
                "eval_every {} exceeds total steps {}",
                self.eval_every, self.steps
            )));
        }
        self.langevin.validate()?;
        self.sample_langevin.validate()
    }
}

/// Phase statistics of one gradient step.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GradStats {
    pub e_pos: f64,
    pub e_neg: f64,
    pub reg: f64,
}

/// Gradient of the surrogate loss for fixed positive and negative batches.
/// Both batches run through the energy network in a single pass; phase means
/// are formed with constant selection matrices so the parameters enter the
/// tape exactly once.
pub fn energy_phase_grads(
    energy: &EnergyNetwork,
    x_pos: &Tensor,
    x_neg: &Tensor,
    alpha: f64,
) -> Result<(Vec<Vec<f64>>, GradStats)> {
    let (np, nn) = (x_pos.rows(), x_neg.rows());
    let d = energy.input_dim();
    if x_pos.shape() != [np, d] || x_neg.shape() != [nn, d] {
        return Err(Error::ShapeMismatch {
            op: "energy_phase_grads",
            details: format!("{:?} / {:?} vs [n, {d}]", x_pos.shape(), x_neg.shape()),
        });
    }
    let mut all = x_pos.data().to_vec();
    all.extend_from_slice(x_neg.data());

    let mut tape = Tape::new();
    let xid = tape.constant_parts(all, vec![np + nn, d])?;
    let on_tape = energy.energy_on_tape(&mut tape, xid, true)?;
    let e_all = on_tape.output;

    let mut sel_pos = vec![0.0; np + nn];
    let mut sel_neg = vec![0.0; np + nn];
    sel_pos[..np].fill(1.0 / np as f64);
    sel_neg[np..].fill(1.0 / nn as f64);
    let sel_pos = tape.constant_parts(sel_pos, vec![1, np + nn])?;
    let sel_neg = tape.constant_parts(sel_neg, vec![1, np + nn])?;

    let m_pos = tape.matmul(sel_pos, e_all)?;
    let m_neg = tape.matmul(sel_neg, e_all)?;
    let neg_m_neg = tape.neg(m_neg)?;
    let phase = tape.add(m_pos, neg_m_neg)?;

    let sq = tape.square(e_all)?;
    let r_pos = tape.matmul(sel_pos, sq)?;
    let r_neg = tape.matmul(sel_neg, sq)?;
    let r_sum = tape.add(r_pos, r_neg)?;
    let reg = tape.scale(r_sum, alpha)?;

    let loss = tape.add(phase, reg)?;
    tape.backward(loss)?;

    let grads = on_tape
        .param_ids
        .iter()
        .map(|&id| tape.grad(id).map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; tape.data(id).len()]))
        .collect();
    let stats = GradStats {
        e_pos: tape.scalar_value(m_pos),
        e_neg: tape.scalar_value(m_neg),
        reg: tape.scalar_value(reg),
    };
    Ok((grads, stats))
}

/// One maximum-likelihood step for the latent tilted model: the negative
/// phase comes from fresh-prior short-run latent chains decoded through the
/// frozen base.
pub fn ebm_grad_step(
    energy: &EnergyNetwork,
    base: &BaseGenerator,
    data_batch: &Tensor,
    cfg: &EbmTrainConfig,
    rng: &mut SeedRng,
) -> Result<(Vec<Vec<f64>>, GradStats)> {
    if data_batch.rows() != cfg.batch_size {
        return Err(Error::ShapeMismatch {
            op: "ebm_grad_step",
            details: format!("batch has {} rows, config says {}", data_batch.rows(), cfg.batch_size),
        });
    }
    let z0 = base.sample_prior(cfg.batch_size, rng)?;
    let chain = langevin_latent(base, energy, &z0, &cfg.langevin, rng)?;
    let x_neg = base.decode(&chain.state)?;
    energy_phase_grads(energy, data_batch, &x_neg, cfg.reg_coefficient)
}

/// Decode fresh prior draws (the untilted baseline sampler).
pub fn decode_prior_samples(base: &BaseGenerator, n: usize, rng: &mut SeedRng) -> Result<Tensor> {
    let z = base.sample_prior(n, rng)?;
    base.decode(&z)
}

const SAMPLE_CHUNK: usize = 2048;

/// Draw observations from the tilted model: prior-initialized latent chains,
/// decoded after `cfg.steps` updates. Chains run in fixed-size batches.
pub fn sample_latent_ebm(
    base: &BaseGenerator,
    energy: &EnergyNetwork,
    n: usize,
    cfg: &LangevinConfig,
    rng: &mut SeedRng,
) -> Result<Tensor> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample count must be positive".into()));
    }
    let mut out = Vec::with_capacity(n * base.obs_dim());
    let mut remaining = n;
    while remaining > 0 {
        let m = remaining.min(SAMPLE_CHUNK);
        let z0 = base.sample_prior(m, rng)?;
        let chain = langevin_latent(base, energy, &z0, cfg, rng)?;
        let x = base.decode(&chain.state)?;
        out.extend_from_slice(x.data());
        remaining -= m;
    }
    Tensor::new(out, vec![n, base.obs_dim()])
}

/// Draw observations from the plain observation-space model using the
/// persistent scheme: chains initialize from the replay buffer.
pub fn sample_pixel_ebm(
    energy: &EnergyNetwork,
    buffer: &ReplayBuffer,
    n: usize,
    cfg: &LangevinConfig,
    rng: &mut SeedRng,
) -> Result<Tensor> {
    if n == 0 {
        return Err(Error::InvalidParameter("sample count must be positive".into()));
    }
    let d = energy.input_dim();
    let mut out = Vec::with_capacity(n * d);
    let mut remaining = n;
    while remaining > 0 {
        let m = remaining.min(SAMPLE_CHUNK);
        let init = buffer.init_batch(m, rng)?;
        let chain = langevin_observation(energy, &init.states, cfg, rng)?;
        out.extend_from_slice(chain.state.data());
        remaining -= m;
    }
    Tensor::new(out, vec![n, d])
}

fn snapshot_params(energy: &EnergyNetwork) -> Vec<Vec<f64>> {
    energy.params().iter().map(|p| p.data().to_vec()).collect()
}

fn restore_params(energy: &mut EnergyNetwork, snap: &[Vec<f64>]) {
    for (p, s) in energy.params_mut().into_iter().zip(snap.iter()) {
        p.data_mut().copy_from_slice(s);
    }
}

fn base_digest(base: &BaseGenerator) -> u32 {
    let mut hasher = crc32fast::Hasher::new();
    if let Some(net) = base.decoder() {
        for p in net.params() {
            for v in p.data() {
                hasher.update(&v.to_le_bytes());
            }
        }
    }
    hasher.finalize()
}

fn draw_batch(data: &[[f64; 2]], batch_size: usize, rng: &mut SeedRng) -> Result<Tensor> {
    let rows: Vec<[f64; 2]> = (0..batch_size).map(|_| data[rng.index(data.len())]).collect();
    Tensor::from_points(&rows)
}

fn diverged(step: u64, last: Option<&GradStats>) -> Error {
    let details = match last {
        Some(s) => format!(
            "phase gap e_pos - e_neg = {:.4} (overfitting symptom: data energy far below sample energy)",
            s.e_pos - s.e_neg
        ),
        None => "non-finite gradient on the first step".into(),
    };
    Error::TrainDiverged { step, details }
}

/// Train the latent tilted model by maximum likelihood. The base generator
/// is frozen: its parameters never receive gradients, which is asserted by
/// digest before and after. Every `eval_every` steps the sample-quality
/// metric runs on fresh chains; the best checkpoint is kept and training
/// stops early once the metric fails to improve for `patience` evaluations.
pub fn train_latent_ebm(
    mut energy: EnergyNetwork,
    base: &BaseGenerator,
    data: &[[f64; 2]],
    cfg: &EbmTrainConfig,
    metric: &ModeSpec,
) -> Result<(EnergyNetwork, TrainLog)> {
    if cfg.steps == 0 {
        return Ok((energy, TrainLog::default()));
    }
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidParameter("training set is empty".into()));
    }
    if energy.input_dim() != base.obs_dim() {
        return Err(Error::ShapeMismatch {
            op: "train_latent_ebm",
            details: format!("energy dim {} vs base obs dim {}", energy.input_dim(), base.obs_dim()),
        });
    }
    let frozen = base_digest(base);

    let mut rng = SeedRng::stream(cfg.seed, streams::TRAIN_EBM);
    let mut eval_rng = SeedRng::stream(cfg.seed, streams::TRAIN_EVAL);
    let mut opt = Optimizer::adam(cfg.learning_rate)?;
    let mut log = TrainLog::default();
    let mut evals: Vec<(u64, f64)> = Vec::new();
    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    let mut last_stats: Option<GradStats> = None;

    for step in 1..=cfg.steps {
        let batch = draw_batch(data, cfg.batch_size, &mut rng)?;
        let (grads, stats) = ebm_grad_step(&energy, base, &batch, cfg, &mut rng)
            .map_err(|_| diverged(step, last_stats.as_ref()))?;
        opt.apply(&mut energy.params_mut(), &grads)?;
        last_stats = Some(stats);

        let mut metric_val = None;
        if step % cfg.eval_every == 0 {
            let samples =
                sample_latent_ebm(base, &energy, cfg.eval_samples, &cfg.sample_langevin, &mut eval_rng)?;
            let hqf = high_quality_fraction(&samples.to_points()?, metric)?;
            metric_val = Some(hqf);
            evals.push((step, hqf));
            let is_best = best.as_ref().map_or(true, |(b, _)| hqf > *b);
            if is_best {
                best = Some((hqf, snapshot_params(&energy)));
            }
        }
        log.push(TrainRecord {
            step,
            e_pos: stats.e_pos,
            e_neg: stats.e_neg,
            reg: stats.reg,
            metric: metric_val,
        });
        if let Some(decision) = early_stop(&evals, cfg.patience) {
            log.best_step = Some(decision.best_step);
            if decision.should_stop {
                break;
            }
        }
    }

    if let Some((_, snap)) = best {
        restore_params(&mut energy, &snap);
    }
    if base_digest(base) != frozen {
        return Err(Error::Internal("base generator parameters changed during training".into()));
    }
    Ok((energy, log))
}

/// Train a plain observation-space model: negative chains start from the
/// replay buffer (fresh noise with the configured probability) and completed
/// chains are pushed back.
pub fn train_pixel_ebm(
    mut energy: EnergyNetwork,
    data: &[[f64; 2]],
    cfg: &EbmTrainConfig,
    buffer: &mut ReplayBuffer,
    metric: &ModeSpec,
) -> Result<(EnergyNetwork, TrainLog)> {
    if cfg.steps == 0 {
        return Ok((energy, TrainLog::default()));
    }
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidParameter("training set is empty".into()));
    }
    let mut rng = SeedRng::stream(cfg.seed, streams::TRAIN_EBM);
    let mut eval_rng = SeedRng::stream(cfg.seed, streams::TRAIN_EVAL);
    let mut opt = Optimizer::adam(cfg.learning_rate)?;
    let mut log = TrainLog::default();
    let mut evals: Vec<(u64, f64)> = Vec::new();
    let mut best: Option<(f64, Vec<Vec<f64>>)> = None;
    let mut last_stats: Option<GradStats> = None;

    for step in 1..=cfg.steps {
        let batch = draw_batch(data, cfg.batch_size, &mut rng)?;
        let init = buffer.init_batch(cfg.batch_size, &mut rng)?;
        let chain = langevin_observation(&energy, &init.states, &cfg.langevin, &mut rng)
            .map_err(|_| diverged(step, last_stats.as_ref()))?;
        let (grads, stats) =
            energy_phase_grads(&energy, &batch, &chain.state, cfg.reg_coefficient)
                .map_err(|_| diverged(step, last_stats.as_ref()))?;
        opt.apply(&mut energy.params_mut(), &grads)?;
        buffer.push_rows(&chain.state)?;
        last_stats = Some(stats);

        let mut metric_val = None;
        if step % cfg.eval_every == 0 {
            let samples =
                sample_pixel_ebm(&energy, buffer, cfg.eval_samples, &cfg.sample_langevin, &mut eval_rng)?;
            let hqf = high_quality_fraction(&samples.to_points()?, metric)?;
            metric_val = Some(hqf);
            evals.push((step, hqf));
            let is_best = best.as_ref().map_or(true, |(b, _)| hqf > *b);
            if is_best {
                best = Some((hqf, snapshot_params(&energy)));
            }
        }
        log.push(TrainRecord {
            step,
            e_pos: stats.e_pos,
            e_neg: stats.e_neg,
            reg: stats.reg,
            metric: metric_val,
        });
        if let Some(decision) = early_stop(&evals, cfg.patience) {
            log.best_step = Some(decision.best_step);
            if decision.should_stop {
                break;
            }
        }
    }

    if let Some((_, snap)) = best {
        restore_params(&mut energy, &snap);
    }
    Ok((energy, log))
}
