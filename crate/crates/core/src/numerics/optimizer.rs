use crate::error::{Error, Result};
use crate::numerics::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

/// Gradient-descent state. Moment buffers align 1:1 with the parameter list
/// passed to `apply`, which must therefore be stable across steps.
#[derive(Clone, Debug)]
pub struct Optimizer {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub step_count: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl Optimizer {
    pub fn sgd(learning_rate: f64) -> Result<Self> {
        Self::new(OptimizerKind::Sgd, learning_rate)
    }

    pub fn adam(learning_rate: f64) -> Result<Self> {
        Self::new(OptimizerKind::Adam { beta1: 0.9, beta2: 0.999, eps: 1e-8 }, learning_rate)
    }

    pub fn new(kind: OptimizerKind, learning_rate: f64) -> Result<Self> {
        if !(learning_rate >= 0.0) || !learning_rate.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "learning rate must be finite and non-negative, got {learning_rate}"
            )));
        }
        Ok(Optimizer {
            kind,
            learning_rate,
            step_count: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        })
    }

    /// One update over all parameters; increments `step_count` exactly once.
    pub fn apply(&mut self, params: &mut [&mut Tensor], grads: &[Vec<f64>]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::ShapeMismatch {
                op: "optimizer_apply",
                details: format!("{} params vs {} grads", params.len(), grads.len()),
            });
        }
        for (i, (p, g)) in params.iter().zip(grads.iter()).enumerate() {
            if p.numel() != g.len() {
                return Err(Error::ShapeMismatch {
                    op: "optimizer_apply",
                    details: format!("param {i}: {} elements vs grad {}", p.numel(), g.len()),
                });
            }
        }
        if let OptimizerKind::Adam { .. } = self.kind {
            if self.first_moment.is_empty() {
                self.first_moment = grads.iter().map(|g| vec![0.0; g.len()]).collect();
                self.second_moment = self.first_moment.clone();
            } else if self.first_moment.len() != params.len() {
                return Err(Error::ShapeMismatch {
                    op: "optimizer_apply",
                    details: "parameter list changed between steps".into(),
                });
            }
        }
        self.step_count += 1;
        let lr = self.learning_rate;
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads.iter()) {
                    for (x, &gx) in p.data_mut().iter_mut().zip(g.iter()) {
                        *x -= lr * gx;
                    }
                }
            }
            OptimizerKind::Adam { beta1, beta2, eps } => {
                let t = self.step_count as i32;
                let bc1 = 1.0 - beta1.powi(t);
                let bc2 = 1.0 - beta2.powi(t);
                for ((p, g), (m, v)) in params
                    .iter_mut()
                    .zip(grads.iter())
                    .zip(self.first_moment.iter_mut().zip(self.second_moment.iter_mut()))
                {
                    for (((x, &gx), mi), vi) in
                        p.data_mut().iter_mut().zip(g.iter()).zip(m.iter_mut()).zip(v.iter_mut())
                    {
                        *mi = beta1 * *mi + (1.0 - beta1) * gx;
                        *vi = beta2 * *vi + (1.0 - beta2) * gx * gx;
                        let m_hat = *mi / bc1;
                        let v_hat = *vi / bc2;
                        *x -= lr * m_hat / (v_hat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn param(data: Vec<f64>) -> Tensor {
        let n = data.len();
        Tensor::new(data, vec![n]).unwrap().with_grad()
    }

    #[test]
    fn sgd_hand_example() {
        let mut p = param(vec![1.0]);
        let mut opt = Optimizer::sgd(0.1).unwrap();
        opt.apply(&mut [&mut p], &[vec![2.0]]).unwrap();
        assert_eq!(p.data(), &[0.8]);
        assert_eq!(opt.step_count, 1);
    }

    #[test]
    fn adam_zero_grad_no_move() {
        let mut p = param(vec![0.5, -0.5]);
        let before = p.clone();
        let mut opt = Optimizer::adam(0.01).unwrap();
        opt.apply(&mut [&mut p], &[vec![0.0, 0.0]]).unwrap();
        assert_eq!(p.data(), before.data());
    }

    #[test]
    fn adam_first_step_is_signed_lr() {
        // At t=1 the bias-corrected update is lr * g / (|g| + eps) ~ lr * sign(g).
        let lr = 0.05;
        for &g in &[3.7, -0.002, 12.0] {
            let mut p = param(vec![1.0]);
            let mut opt = Optimizer::adam(lr).unwrap();
            opt.apply(&mut [&mut p], &[vec![g]]).unwrap();
            let expected = 1.0 - lr * g.signum();
            assert!((p.data()[0] - expected).abs() < 1e-6, "g={g}: {} vs {expected}", p.data()[0]);
        }
    }

    #[test]
    fn misaligned_grads_error() {
        let mut p = param(vec![1.0, 2.0]);
        let mut opt = Optimizer::sgd(0.1).unwrap();
        let err = opt.apply(&mut [&mut p], &[vec![1.0]]).unwrap_err();
        assert!(matches!(err, Error::ShapeMismatch { .. }));
    }

    #[test]
    fn step_count_increments_once_per_apply() {
        let mut p = param(vec![1.0]);
        let mut opt = Optimizer::adam(0.01).unwrap();
        for expect in 1..=5 {
            opt.apply(&mut [&mut p], &[vec![0.1]]).unwrap();
            assert_eq!(opt.step_count, expect);
        }
    }
}
