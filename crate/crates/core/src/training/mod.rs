//! Training loops: VAE pre-training, latent tilted-model maximum likelihood,
//! and the plain observation-space baseline with a replay buffer.

pub mod early_stop;
pub mod ebm;
pub mod log;
pub mod vae;

pub use early_stop::{early_stop, EarlyStop};
pub use ebm::{
    decode_prior_samples, ebm_grad_step, energy_phase_grads, sample_latent_ebm, sample_pixel_ebm,
    train_latent_ebm, train_pixel_ebm, EbmTrainConfig, GradStats,
};
pub use log::{TrainLog, TrainRecord};
pub use vae::{train_vae, VaeTrainConfig};
