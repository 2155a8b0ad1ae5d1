use crate::error::{Error, Result};
use crate::models::mlp::{Activation, MlpNetwork};
use crate::numerics::{NodeId, Tape, Tensor};
use crate::rng::SeedRng;

/// Gaussian-likelihood VAE. The encoder's final layer emits `2 * latent_dim`
/// units interpreted as (mu | logvar); the decoder output is the observation
/// mean with fixed noise scale `obs_noise_sigma`.
#[derive(Clone, Debug, PartialEq)]
pub struct VaeModel {
    pub encoder: MlpNetwork,
    pub decoder: MlpNetwork,
    pub latent_dim: usize,
    pub obs_dim: usize,
    pub obs_noise_sigma: f64,
}

impl VaeModel {
    pub fn new(
        obs_dim: usize,
        latent_dim: usize,
        hidden: &[usize],
        obs_noise_sigma: f64,
        rng: &mut SeedRng,
    ) -> Result<Self> {
        if obs_noise_sigma <= 0.0 || !obs_noise_sigma.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "obs_noise_sigma must be positive, got {obs_noise_sigma}"
            )));
        }
        let mut enc_sizes = vec![obs_dim];
        enc_sizes.extend_from_slice(hidden);
        enc_sizes.push(2 * latent_dim);
        let mut dec_sizes = vec![latent_dim];
        dec_sizes.extend_from_slice(hidden);
        dec_sizes.push(obs_dim);
        let mut acts = vec![Activation::Relu; hidden.len()];
        acts.push(Activation::Identity);
        let encoder = MlpNetwork::new(&enc_sizes, &acts, rng)?;
        let decoder = MlpNetwork::new(&dec_sizes, &acts, rng)?;
        Ok(VaeModel { encoder, decoder, latent_dim, obs_dim, obs_noise_sigma })
    }

    pub fn from_parts(
        encoder: MlpNetwork,
        decoder: MlpNetwork,
        obs_noise_sigma: f64,
    ) -> Result<Self> {
        let obs_dim = encoder.input_dim();
        let latent_dim = decoder.input_dim();
        if encoder.output_dim() != 2 * latent_dim {
            return Err(Error::ShapeMismatch {
                op: "vae_from_parts",
                details: format!(
                    "encoder emits {} units, decoder expects latent dim {latent_dim}",
                    encoder.output_dim()
                ),
            });
        }
        if decoder.output_dim() != obs_dim {
            return Err(Error::ShapeMismatch {
                op: "vae_from_parts",
                details: format!("decoder emits {}, encoder consumes {obs_dim}", decoder.output_dim()),
            });
        }
        Ok(VaeModel { encoder, decoder, latent_dim, obs_dim, obs_noise_sigma })
    }

    /// Encoder pass: per-row (mu, logvar).
    pub fn encode(&self, x: &Tensor) -> Result<(Tensor, Tensor)> {
        let out = self.encoder.forward(x)?;
        let n = out.rows();
        let d = self.latent_dim;
        let mut mu = Vec::with_capacity(n * d);
        let mut logvar = Vec::with_capacity(n * d);
        for i in 0..n {
            let row = out.row(i);
            mu.extend_from_slice(&row[..d]);
            logvar.extend_from_slice(&row[d..]);
        }
        Ok((Tensor::new(mu, vec![n, d])?, Tensor::new(logvar, vec![n, d])?))
    }

    /// Decoder mean.
    pub fn decode(&self, z: &Tensor) -> Result<Tensor> {
        self.decoder.forward(z)
    }

    /// Parameters in encoder-then-decoder order.
    pub fn params(&self) -> Vec<&Tensor> {
        let mut p = self.encoder.params();
        p.extend(self.decoder.params());
        p
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut p = self.encoder.params_mut();
        p.extend(self.decoder.params_mut());
        p
    }
}

/// Loss value and parameter gradients (aligned with `VaeModel::params`).
pub struct ElboEval {
    pub loss: f64,
    pub grads: Vec<Vec<f64>>,
}

/// Negative ELBO averaged over the batch, with the reparametrization
/// z = mu + exp(logvar / 2) * noise. The caller supplies `noise` shaped
/// `[n, latent_dim]` so the evaluation is deterministic.
pub fn vae_elbo(model: &VaeModel, batch: &Tensor, noise: &Tensor) -> Result<f64> {
    let (tape, loss, _) = build_elbo(model, batch, noise, false)?;
    Ok(tape.scalar_value(loss))
}

/// Negative ELBO and its gradient w.r.t. all VAE parameters.
pub fn vae_elbo_with_grads(model: &VaeModel, batch: &Tensor, noise: &Tensor) -> Result<ElboEval> {
    let (mut tape, loss, param_ids) = build_elbo(model, batch, noise, true)?;
    tape.backward(loss)?;
    let grads = param_ids
        .iter()
        .map(|&id| tape.grad(id).map(|g| g.to_vec()).unwrap_or_else(|| vec![0.0; tape.data(id).len()]))
        .collect();
    Ok(ElboEval { loss: tape.scalar_value(loss), grads })
}

fn build_elbo(
    model: &VaeModel,
    batch: &Tensor,
    noise: &Tensor,
    trainable: bool,
) -> Result<(Tape, NodeId, Vec<NodeId>)> {
    let n = batch.rows();
    let d = model.latent_dim;
    let obs = model.obs_dim;
    if batch.shape().len() != 2 || batch.shape()[1] != obs {
        return Err(Error::ShapeMismatch {
            op: "vae_elbo",
            details: format!("batch {:?} vs expected [n, {obs}]", batch.shape()),
        });
    }
    if noise.shape() != [n, d] {
        return Err(Error::ShapeMismatch {
            op: "vae_elbo",
            details: format!("noise {:?} vs expected [{n}, {d}]", noise.shape()),
        });
    }

    let mut tape = Tape::new();
    let x = tape.constant(batch);
    let enc = model.encoder.forward_on_tape(&mut tape, x, trainable)?;
    let mut param_ids = enc.param_ids;

    // Split the (mu | logvar) head with constant selection matrices.
    let mut sel_mu = vec![0.0; 2 * d * d];
    let mut sel_lv = vec![0.0; 2 * d * d];
    for j in 0..d {
        sel_mu[j * d + j] = 1.0;
        sel_lv[(d + j) * d + j] = 1.0;
    }
    let sel_mu = tape.constant_parts(sel_mu, vec![2 * d, d])?;
    let sel_lv = tape.constant_parts(sel_lv, vec![2 * d, d])?;
    let mu = tape.matmul(enc.output, sel_mu)?;
    let logvar = tape.matmul(enc.output, sel_lv)?;

    // z = mu + exp(logvar / 2) * noise
    let half_lv = tape.scale(logvar, 0.5)?;
    let std = tape.exp(half_lv)?;
    let eps = tape.constant(noise);
    let scaled = tape.mul(std, eps)?;
    let z = tape.add(mu, scaled)?;

    let dec = model.decoder.forward_on_tape(&mut tape, z, trainable)?;
    param_ids.extend(dec.param_ids);

    // Reconstruction: sum ||x_hat - x||^2 / (2 sigma^2 n) + (obs/2) log(2 pi sigma^2)
    let sigma2 = model.obs_noise_sigma * model.obs_noise_sigma;
    let neg_x = tape.neg(x)?;
    let diff = tape.add(dec.output, neg_x)?;
    let sq = tape.square(diff)?;
    let sse = tape.sum(sq)?;
    let recon = tape.scale(sse, 1.0 / (2.0 * sigma2 * n as f64))?;
    let log_norm = 0.5 * obs as f64 * (std::f64::consts::TAU * sigma2).ln();
    let log_norm = tape.constant_parts(vec![log_norm], vec![1])?;
    let recon = tape.add(recon, log_norm)?;

    // KL(q || N(0, I)) = 1/2 sum (mu^2 + exp(logvar) - 1 - logvar), mean over rows
    let mu_sq = tape.square(mu)?;
    let var = tape.exp(logvar)?;
    let neg_lv = tape.neg(logvar)?;
    let a = tape.add(mu_sq, var)?;
    let b = tape.add(a, neg_lv)?;
    let minus_one = tape.constant_parts(vec![-1.0; n * d], vec![n, d])?;
    let kl_terms = tape.add(b, minus_one)?;
    let kl_sum = tape.sum(kl_terms)?;
    let kl = tape.scale(kl_sum, 0.5 / n as f64)?;

    let loss = tape.add(recon, kl)?;
    Ok((tape, loss, param_ids))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::finite_diff_check;

    fn tiny_vae(seed: u64) -> VaeModel {
        let mut rng = SeedRng::new(seed);
        VaeModel::new(2, 2, &[8], 1.0, &mut rng).unwrap()
    }

    #[test]
    fn kl_zero_when_posterior_is_prior() {
        // Encoder with zero weights and biases emits mu = logvar = 0.
        let enc = {
            let w1 = Tensor::zeros(vec![2, 4]).unwrap();
            let b1 = Tensor::zeros(vec![4]).unwrap();
            MlpNetwork::from_parts(&[2, 4], &[Activation::Identity], vec![w1], vec![b1]).unwrap()
        };
        let dec = {
            let w = Tensor::zeros(vec![2, 2]).unwrap();
            let b = Tensor::zeros(vec![2]).unwrap();
            MlpNetwork::from_parts(&[2, 2], &[Activation::Identity], vec![w], vec![b]).unwrap()
        };
        let model = VaeModel::from_parts(enc, dec, 1.0).unwrap();
        let batch = Tensor::zeros(vec![4, 2]).unwrap();
        let noise = Tensor::zeros(vec![4, 2]).unwrap();
        // decoder output == batch == 0, so loss is exactly the constant term
        let expected = 0.5 * 2.0 * (std::f64::consts::TAU * 1.0f64).ln();
        let loss = vae_elbo(&model, &batch, &noise).unwrap();
        assert!((loss - expected).abs() < 1e-12, "{loss} vs {expected}");
    }

    #[test]
    fn elbo_is_deterministic() {
        let model = tiny_vae(3);
        let batch = Tensor::new(vec![0.1, -0.2, 0.3, 0.4], vec![2, 2]).unwrap();
        let noise = Tensor::new(vec![0.5, -1.0, 0.25, 0.75], vec![2, 2]).unwrap();
        let l1 = vae_elbo(&model, &batch, &noise).unwrap();
        let l2 = vae_elbo(&model, &batch, &noise).unwrap();
        assert_eq!(l1.to_bits(), l2.to_bits());
    }

    #[test]
    fn elbo_gradient_matches_finite_differences() {
        let model = tiny_vae(5);
        let batch = Tensor::new(vec![0.4, -0.3, -0.8, 0.9, 0.0, 0.2], vec![3, 2]).unwrap();
        let noise = Tensor::new(vec![0.3, -0.6, 1.2, 0.1, -0.4, 0.8], vec![3, 2]).unwrap();
        let eval = vae_elbo_with_grads(&model, &batch, &noise).unwrap();

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
        )
        .unwrap();
        assert!(err < 1e-4, "relative error {err}");
    }

    #[test]
    fn noise_shape_must_match() {
        let model = tiny_vae(7);
        let batch = Tensor::zeros(vec![3, 2]).unwrap();
        let noise = Tensor::zeros(vec![2, 2]).unwrap();
        assert!(matches!(vae_elbo(&model, &batch, &noise), Err(Error::ShapeMismatch { .. })));
    }

    #[test]
    fn kl_nonnegative_property() {
        // KL term evaluated standalone: 1/2 (mu^2 + e^lv - 1 - lv) >= 0 pointwise.
        for i in 0..200 {
            let mu = -3.0 + 0.03 * i as f64;
            let lv = -4.0 + 0.04 * i as f64;
            let kl = 0.5 * (mu * mu + lv.exp() - 1.0 - lv);
            assert!(kl >= -1e-15, "mu={mu} lv={lv} kl={kl}");
        }
    }
}
