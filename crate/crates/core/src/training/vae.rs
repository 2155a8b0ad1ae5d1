use crate::error::{Error, Result};
use crate::models::{vae_elbo_with_grads, VaeModel};
use crate::numerics::{Optimizer, Tensor};
use crate::rng::{streams, SeedRng};
use crate::training::log::{TrainLog, TrainRecord};

#[derive(Clone, Debug, PartialEq)]
pub struct VaeTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub latent_dim: usize,
    pub hidden: Vec<usize>,
    pub obs_noise_sigma: f64,
    pub seed: u64,
}

impl Default for VaeTrainConfig {
    fn default() -> Self {
        VaeTrainConfig {
            epochs: 512,
            batch_size: 128,
            learning_rate: 1e-3,
            latent_dim: 2,
            hidden: vec![64, 64],
            obs_noise_sigma: 0.2,
            seed: 0,
        }
    }
}

impl VaeTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidParameter("epochs and batch size must be positive".into()));
        }
        if self.latent_dim == 0 || self.hidden.iter().any(|&h| h == 0) {
            return Err(Error::InvalidParameter("bad architecture spec".into()));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return Err(Error::InvalidParameter("learning rate must be non-negative".into()));
        }
        Ok(())
    }
}

/// Train a VAE on 2-D points by Adam on the negative ELBO. Deterministic
/// under `cfg.seed`; the returned log holds the per-step loss in `e_pos`.
pub fn train_vae(points: &[[f64; 2]], cfg: &VaeTrainConfig) -> Result<(VaeModel, TrainLog)> {
    cfg.validate()?;
    if points.is_empty() {
        return Err(Error::InvalidParameter("training set is empty".into()));
    }
    let mut init_rng = SeedRng::stream(cfg.seed, streams::MODEL_INIT);
    let mut model = VaeModel::new(2, cfg.latent_dim, &cfg.hidden, cfg.obs_noise_sigma, &mut init_rng)?;
    let mut rng = SeedRng::stream(cfg.seed, streams::TRAIN_VAE);
    let mut opt = Optimizer::adam(cfg.learning_rate)?;
    let mut log = TrainLog::default();

    let mut order: Vec<usize> = (0..points.len()).collect();
    let mut step: u64 = 0;
    for _epoch in 0..cfg.epochs {
        rng.shuffle(&mut order);
        for chunk in order.chunks(cfg.batch_size) {
            step += 1;
            let rows: Vec<[f64; 2]> = chunk.iter().map(|&i| points[i]).collect();
            let batch = Tensor::from_points(&rows)?;
            let mut noise = vec![0.0; rows.len() * cfg.latent_dim];
            rng.fill_normal(&mut noise);
            let noise = Tensor::new(noise, vec![rows.len(), cfg.latent_dim])?;

            let eval = vae_elbo_with_grads(&model, &batch, &noise).map_err(|e| match e {
                Error::NonFinite { .. } | Error::NonFiniteEval(_) => Error::TrainDiverged {
                    step,
                    details: "non-finite ELBO".into(),
                },
                other => other,
            })?;
            opt.apply(&mut model.params_mut(), &eval.grads)?;
            log.push(TrainRecord { step, e_pos: eval.loss, e_neg: 0.0, reg: 0.0, metric: None });
        }
    }
    Ok((model, log))
}
