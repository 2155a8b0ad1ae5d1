//! Langevin dynamics and the persistent replay buffer.

pub mod langevin;
pub mod replay;

pub use langevin::{
    grad_energy, grad_energy_through_decoder, langevin_latent, langevin_observation,
    langevin_observation_tilted, latent_step, observation_step, tilted_step, trajectory_csv,
    trajectory_from_csv, ChainResult, LangevinConfig,
};
pub use replay::{InitBatch, ReplayBuffer};
