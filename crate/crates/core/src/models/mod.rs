//! Parameterized networks (VAE encoder/decoder, scalar energy), the frozen
//! base-generator abstraction, and checkpoint persistence.

pub mod base;
pub mod checkpoint;
pub mod energy;
pub mod mlp;
pub mod vae;

pub use base::{BaseGenerator, BaseKind};
pub use checkpoint::{Checkpoint, NamedArray};
pub use energy::EnergyNetwork;
pub use mlp::{Activation, MlpNetwork};
pub use vae::{vae_elbo, vae_elbo_with_grads, VaeModel};
