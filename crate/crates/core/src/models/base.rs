use crate::error::{Error, Result};
use crate::models::mlp::MlpNetwork;
use crate::models::vae::VaeModel;
use crate::numerics::{NodeId, Tape, Tensor};
use crate::rng::SeedRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaseKind {
    VaeDecoder,
    Identity1d,
    Identity2d,
}

impl BaseKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            BaseKind::VaeDecoder => "vae_decoder",
            BaseKind::Identity1d => "identity_1d",
            BaseKind::Identity2d => "identity_2d",
        }
    }
}

/// The frozen pre-trained sampler: a deterministic decoder plus a standard
/// normal prior. Identity kinds exist so samplers and estimators can be
/// validated against closed-form and quadrature oracles.
#[derive(Clone, Debug)]
pub struct BaseGenerator {
    kind: BaseKind,
    decoder: Option<MlpNetwork>,
    latent_dim: usize,
    obs_dim: usize,
    prior_grad_sign: f64,
}

impl BaseGenerator {
    pub fn from_vae(vae: &VaeModel) -> Self {
        BaseGenerator {
            kind: BaseKind::VaeDecoder,
            decoder: Some(vae.decoder.clone()),
            latent_dim: vae.latent_dim,
            obs_dim: vae.obs_dim,
            prior_grad_sign: 1.0,
        }
    }

    pub fn identity_1d() -> Self {
        Self::identity(1)
    }

    pub fn identity_2d() -> Self {
        Self::identity(2)
    }

    fn identity(dim: usize) -> Self {
        BaseGenerator {
            kind: if dim == 1 { BaseKind::Identity1d } else { BaseKind::Identity2d },
            decoder: None,
            latent_dim: dim,
            obs_dim: dim,
            prior_grad_sign: 1.0,
        }
    }

    /// Fault-injection hook for the oracle self-test: flips the sign of
    /// `grad_log_prior` so downstream stationarity checks must fail.
    #[doc(hidden)]
    pub fn with_flipped_prior_gradient(mut self) -> Self {
        self.prior_grad_sign = -1.0;
        self
    }

    pub fn kind(&self) -> BaseKind {
        self.kind
    }

    pub fn latent_dim(&self) -> usize {
        self.latent_dim
    }

    pub fn obs_dim(&self) -> usize {
        self.obs_dim
    }

    /// Whether log p(x) of the decoded distribution is analytically available
    /// (identity kinds only).
    pub fn is_analytic(&self) -> bool {
        self.decoder.is_none()
    }

    pub fn decoder(&self) -> Option<&MlpNetwork> {
        self.decoder.as_ref()
    }

    /// Deterministic decode `[n, d] -> [n, D]`.
    pub fn decode(&self, z: &Tensor) -> Result<Tensor> {
        self.check_latent(z)?;
        match &self.decoder {
            Some(net) => net.forward(z),
            None => Ok(z.clone()),
        }
    }

    /// Decode recorded on a tape with frozen parameters.
    pub fn decode_on_tape(&self, tape: &mut Tape, z: NodeId) -> Result<NodeId> {
        match &self.decoder {
            Some(net) => Ok(net.forward_on_tape(tape, z, false)?.output),
            None => Ok(z),
        }
    }

    /// log N(z; 0, I) = -||z||^2 / 2 - (d/2) log 2 pi, per row.
    pub fn log_prior(&self, z: &Tensor) -> Result<Vec<f64>> {
        self.check_latent(z)?;
        let d = self.latent_dim as f64;
        let norm = 0.5 * d * (std::f64::consts::TAU).ln();
        Ok((0..z.rows())
            .map(|i| {
                let row = z.row(i);
                -0.5 * row.iter().map(|v| v * v).sum::<f64>() - norm
            })
            .collect())
    }

    /// grad log p(z) = -z, elementwise over the batch.
    pub fn grad_log_prior(&self, z: &Tensor) -> Result<Vec<f64>> {
        self.check_latent(z)?;
        Ok(z.data().iter().map(|v| -v * self.prior_grad_sign).collect())
    }

    /// `[n, d]` standard normal draws.
    pub fn sample_prior(&self, n: usize, rng: &mut SeedRng) -> Result<Tensor> {
        if n == 0 {
            return Err(Error::InvalidParameter("sample count must be positive".into()));
        }
        let mut data = vec![0.0; n * self.latent_dim];
        rng.fill_normal(&mut data);
        Tensor::new(data, vec![n, self.latent_dim])
    }

    fn check_latent(&self, z: &Tensor) -> Result<()> {
        if z.shape().len() != 2 || z.shape()[1] != self.latent_dim {
            return Err(Error::ShapeMismatch {
                op: "base_generator",
                details: format!("latent {:?} vs expected [n, {}]", z.shape(), self.latent_dim),
            });
        }
        Ok(())
    }
}
