use crate::error::{Error, Result};
use crate::numerics::{NodeId, Tape, Tensor};
use crate::rng::SeedRng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Relu,
    Identity,
    /// Elementwise square; used to build exact polynomial test energies.
    Square,
}

impl Activation {
    pub fn as_str(&self) -> &'static str {
        match self {
            Activation::Tanh => "tanh",
            Activation::Relu => "relu",
            Activation::Identity => "identity",
            Activation::Square => "square",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "tanh" => Ok(Activation::Tanh),
            "relu" => Ok(Activation::Relu),
            "identity" => Ok(Activation::Identity),
            "square" => Ok(Activation::Square),
            other => Err(Error::InvalidParameter(format!("unknown activation '{other}'"))),
        }
    }
}

/// Handles returned by [`MlpNetwork::forward_on_tape`]; `param_ids` matches
/// the order of [`MlpNetwork::params`] (w0, b0, w1, b1, ...).
pub struct MlpOnTape {
    pub output: NodeId,
    pub param_ids: Vec<NodeId>,
}

/// Fully connected network. Weights are `[fan_in, fan_out]`, biases `[fan_out]`,
/// one activation per layer transition.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpNetwork {
    layer_sizes: Vec<usize>,
    activations: Vec<Activation>,
    weights: Vec<Tensor>,
    biases: Vec<Tensor>,
}

impl MlpNetwork {
    /// Weights drawn uniformly in +-sqrt(1/fan_in), biases zero.
    pub fn new(layer_sizes: &[usize], activations: &[Activation], rng: &mut SeedRng) -> Result<Self> {
        Self::validate(layer_sizes, activations)?;
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for w in layer_sizes.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = (1.0 / fan_in as f64).sqrt();
            let data: Vec<f64> =
                (0..fan_in * fan_out).map(|_| rng.uniform_range(-bound, bound)).collect();
            weights.push(Tensor::new(data, vec![fan_in, fan_out])?.with_grad());
            biases.push(Tensor::zeros(vec![fan_out])?.with_grad());
        }
        Ok(MlpNetwork {
            layer_sizes: layer_sizes.to_vec(),
            activations: activations.to_vec(),
            weights,
            biases,
        })
    }

    /// Build from explicit parameters (checkpoint restore, exact test nets).
    pub fn from_parts(
        layer_sizes: &[usize],
        activations: &[Activation],
        weights: Vec<Tensor>,
        biases: Vec<Tensor>,
    ) -> Result<Self> {
        Self::validate(layer_sizes, activations)?;
        if weights.len() != layer_sizes.len() - 1 || biases.len() != weights.len() {
            return Err(Error::ShapeMismatch {
                op: "mlp_from_parts",
                details: "layer count does not match parameter count".into(),
            });
        }
        for (i, w) in layer_sizes.windows(2).enumerate() {
            if weights[i].shape() != [w[0], w[1]] {
                return Err(Error::ShapeMismatch {
                    op: "mlp_from_parts",
                    details: format!("weight {i}: {:?} vs [{}, {}]", weights[i].shape(), w[0], w[1]),
                });
            }
            if biases[i].shape() != [w[1]] {
                return Err(Error::ShapeMismatch {
                    op: "mlp_from_parts",
                    details: format!("bias {i}: {:?} vs [{}]", biases[i].shape(), w[1]),
                });
            }
        }
        let weights = weights.into_iter().map(Tensor::with_grad).collect();
        let biases = biases.into_iter().map(Tensor::with_grad).collect();
        Ok(MlpNetwork {
            layer_sizes: layer_sizes.to_vec(),
            activations: activations.to_vec(),
            weights,
            biases,
        })
    }

    fn validate(layer_sizes: &[usize], activations: &[Activation]) -> Result<()> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidParameter("network needs at least one layer".into()));
        }
        if layer_sizes.iter().any(|&s| s == 0) {
            return Err(Error::InvalidParameter("layer sizes must be positive".into()));
        }
        if activations.len() != layer_sizes.len() - 1 {
            return Err(Error::InvalidParameter(format!(
                "{} activations for {} layers",
                activations.len(),
                layer_sizes.len() - 1
            )));
        }
        Ok(())
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn activations(&self) -> &[Activation] {
        &self.activations
    }

    /// Parameters in the fixed order w0, b0, w1, b1, ...
    pub fn params(&self) -> Vec<&Tensor> {
        self.weights.iter().zip(self.biases.iter()).flat_map(|(w, b)| [w, b]).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        self.weights
            .iter_mut()
            .zip(self.biases.iter_mut())
            .flat_map(|(w, b)| [w as &mut Tensor, b as &mut Tensor])
            .collect()
    }

    pub fn param_names(&self, prefix: &str) -> Vec<String> {
        (0..self.weights.len()).flat_map(|i| [format!("{prefix}w{i}"), format!("{prefix}b{i}")]).collect()
    }

    /// Record the forward pass on `tape`. With `trainable` the parameters are
    /// inserted as gradient-carrying leaves; otherwise as constants (frozen).
    pub fn forward_on_tape(&self, tape: &mut Tape, x: NodeId, trainable: bool) -> Result<MlpOnTape> {
        let in_shape = tape.shape(x);
        if in_shape.len() != 2 || in_shape[1] != self.input_dim() {
            return Err(Error::ShapeMismatch {
                op: "mlp_forward",
                details: format!("input {:?} vs expected [n, {}]", in_shape, self.input_dim()),
            });
        }
        let mut param_ids = Vec::with_capacity(2 * self.weights.len());
        let mut h = x;
        for (i, (w, b)) in self.weights.iter().zip(self.biases.iter()).enumerate() {
            let wid = if trainable { tape.leaf(w) } else { tape.constant(w) };
            let bid = if trainable { tape.leaf(b) } else { tape.constant(b) };
            param_ids.push(wid);
            param_ids.push(bid);
            h = tape.matmul(h, wid)?;
            h = tape.add(h, bid)?;
            h = match self.activations[i] {
                Activation::Tanh => tape.tanh(h)?,
                Activation::Relu => tape.relu(h)?,
                Activation::Identity => h,
                Activation::Square => tape.square(h)?,
            };
        }
        Ok(MlpOnTape { output: h, param_ids })
    }

    /// Plain batched evaluation: `[n, in] -> [n, out]`.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let xid = tape.constant(x);
        let out = self.forward_on_tape(&mut tape, xid, false)?.output;
        Tensor::new(tape.data(out).to_vec(), tape.shape(out).to_vec())
    }
}
