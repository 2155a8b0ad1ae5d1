use crate::error::{Error, Result};
use crate::models::mlp::{Activation, MlpNetwork, MlpOnTape};
use crate::numerics::{NodeId, Tape, Tensor};
use crate::rng::SeedRng;

/// Scalar energy function over observations: `[n, obs_dim] -> [n, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct EnergyNetwork {
    pub net: MlpNetwork,
}

impl EnergyNetwork {
    pub fn new(obs_dim: usize, hidden: &[usize], rng: &mut SeedRng) -> Result<Self> {
        let mut sizes = vec![obs_dim];
        sizes.extend_from_slice(hidden);
        sizes.push(1);
        let mut acts = vec![Activation::Relu; hidden.len()];
        acts.push(Activation::Identity);
        Ok(EnergyNetwork { net: MlpNetwork::new(&sizes, &acts, rng)? })
    }

    pub fn from_net(net: MlpNetwork) -> Result<Self> {
        if net.output_dim() != 1 {
            return Err(Error::ShapeMismatch {
                op: "energy_network",
                details: format!("output dim {} (energies are scalar per row)", net.output_dim()),
            });
        }
        Ok(EnergyNetwork { net })
    }

    /// E identically zero (zero weights, zero bias, one linear layer).
    pub fn zero(obs_dim: usize) -> Self {
        let w = Tensor::zeros(vec![obs_dim, 1]).unwrap();
        let b = Tensor::zeros(vec![1]).unwrap();
        let net =
            MlpNetwork::from_parts(&[obs_dim, 1], &[Activation::Identity], vec![w], vec![b]).unwrap();
        EnergyNetwork { net }
    }

    /// E(x) = sum_i coeffs[i] * x_i + bias.
    pub fn linear(coeffs: &[f64], bias: f64) -> Self {
        let d = coeffs.len();
        let w = Tensor::new(coeffs.to_vec(), vec![d, 1]).unwrap();
        let b = Tensor::new(vec![bias], vec![1]).unwrap();
        let net =
            MlpNetwork::from_parts(&[d, 1], &[Activation::Identity], vec![w], vec![b]).unwrap();
        EnergyNetwork { net }
    }

    /// E(x) = ||x||^2 / 2, built from exact weights (identity layer into a
    /// square activation, then an averaging output layer).
    pub fn quadratic_half_norm(obs_dim: usize) -> Self {
        let mut eye = vec![0.0; obs_dim * obs_dim];
        for i in 0..obs_dim {
            eye[i * obs_dim + i] = 1.0;
        }
        let w1 = Tensor::new(eye, vec![obs_dim, obs_dim]).unwrap();
        let b1 = Tensor::zeros(vec![obs_dim]).unwrap();
        let w2 = Tensor::new(vec![0.5; obs_dim], vec![obs_dim, 1]).unwrap();
        let b2 = Tensor::zeros(vec![1]).unwrap();
        let net = MlpNetwork::from_parts(
            &[obs_dim, obs_dim, 1],
            &[Activation::Square, Activation::Identity],
            vec![w1, w2],
            vec![b1, b2],
        )
        .unwrap();
        EnergyNetwork { net }
    }

    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    /// Per-row energies. Errors on non-finite output.
    pub fn energy(&self, x: &Tensor) -> Result<Vec<f64>> {
        let out = self.net.forward(x)?;
        Ok(out.data().to_vec())
    }

    pub fn energy_on_tape(&self, tape: &mut Tape, x: NodeId, trainable: bool) -> Result<MlpOnTape> {
        self.net.forward_on_tape(tape, x, trainable)
    }

    pub fn params(&self) -> Vec<&Tensor> {
        self.net.params()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.net.params_mut()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_energy_everywhere() {
        let e = EnergyNetwork::zero(2);
        let x = Tensor::new(vec![1.0, -2.0, 3.5, 0.0], vec![2, 2]).unwrap();
        assert_eq!(e.energy(&x).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn identical_rows_identical_energies() {
        let mut rng = SeedRng::new(4);
        let e = EnergyNetwork::new(2, &[16, 16], &mut rng).unwrap();
        let x = Tensor::new(vec![0.3, -0.7, 0.3, -0.7], vec![2, 2]).unwrap();
        let es = e.energy(&x).unwrap();
        assert_eq!(es[0].to_bits(), es[1].to_bits());
    }

    #[test]
    fn quadratic_exact_value() {
        let e = EnergyNetwork::quadratic_half_norm(2);
        let x = Tensor::new(vec![3.0, 4.0], vec![1, 2]).unwrap();
        assert_eq!(e.energy(&x).unwrap(), vec![12.5]);
    }

    #[test]
    fn no_accidental_translation_invariance() {
        let mut rng = SeedRng::new(8);
        let e = EnergyNetwork::new(2, &[16], &mut rng).unwrap();
        let x = Tensor::new(vec![0.2, 0.4], vec![1, 2]).unwrap();
        let y = Tensor::new(vec![0.2 + 0.37, 0.4 - 0.81], vec![1, 2]).unwrap();
        assert_ne!(e.energy(&x).unwrap()[0], e.energy(&y).unwrap()[0]);
    }
}
