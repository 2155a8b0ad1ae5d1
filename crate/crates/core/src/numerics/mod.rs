//! Reverse-mode automatic differentiation over dense f64 tensors, with the
//! op set needed by fully connected networks and Gaussian log-densities,
//! plus SGD/Adam and a finite-difference gradient checker.

pub mod check;
pub mod optimizer;
pub mod tape;
pub mod tensor;

pub use check::finite_diff_check;
pub use optimizer::{Optimizer, OptimizerKind};
pub use tape::{NodeId, Tape};
pub use tensor::Tensor;

#[cfg(test)]
mod gradient_property_tests {
    use proptest::prelude::*;

    use super::*;
    use crate::error::Result;

    /// A two-layer network graph with randomized activations and a fan-out
    /// term, exercising every supported op. The gradient is checked jointly
    /// over inputs and all parameters.
    #[derive(Debug, Clone)]
    struct GraphPlan {
        rows: usize,
        din: usize,
        hidden: usize,
        dout: usize,
        act1: u8,
        act2: u8,
        params: Vec<f64>,
    }

    impl GraphPlan {
        fn param_len(rows: usize, din: usize, hidden: usize, dout: usize) -> usize {
            rows * din + din * hidden + hidden + hidden * dout + dout
        }
    }

    fn plan_strategy() -> impl Strategy<Value = GraphPlan> {
        (1usize..3, 1usize..4, 1usize..5, 1usize..3, 0u8..6, 0u8..6).prop_flat_map(
            |(rows, din, hidden, dout, act1, act2)| {
                let n = GraphPlan::param_len(rows, din, hidden, dout);
                proptest::collection::vec(-0.9f64..0.9, n).prop_map(move |params| GraphPlan {
                    rows,
                    din,
                    hidden,
                    dout,
                    act1,
                    act2,
                    params,
                })
            },
        )
    }

    fn apply_act(tape: &mut Tape, a: NodeId, which: u8) -> Result<NodeId> {
        match which {
            0 => tape.tanh(a),
            1 => tape.relu(a),
            2 => {
                // bounded exp so stacked layers cannot overflow
                let t = tape.tanh(a)?;
                tape.exp(t)
            }
            3 => {
                // log of a strictly positive quantity
                let t = tape.tanh(a)?;
                let e = tape.exp(t)?;
                tape.log(e)
            }
            4 => tape.square(a),
            _ => tape.neg(a),
        }
    }

    /// Build the graph at `params`, returning (value, joint gradient).
    fn eval_plan(plan: &GraphPlan, params: &[f64]) -> Result<(f64, Vec<f64>)> {
        let (r, di, h, dp) = (plan.rows, plan.din, plan.hidden, plan.dout);
        let mut off = 0;
        let mut take = |n: usize| {
            let s = params[off..off + n].to_vec();
            off += n;
            s
        };
        let mut tape = Tape::new();
        let x = tape.leaf(&Tensor::new(take(r * di), vec![r, di])?.with_grad());
        let w1 = tape.leaf(&Tensor::new(take(di * h), vec![di, h])?.with_grad());
        let b1 = tape.leaf(&Tensor::new(take(h), vec![h])?.with_grad());
        let w2 = tape.leaf(&Tensor::new(take(h * dp), vec![h, dp])?.with_grad());
        let b2 = tape.leaf(&Tensor::new(take(dp), vec![dp])?.with_grad());

        let z1 = tape.matmul(x, w1)?;
        let z1 = tape.add(z1, b1)?;
        let h1 = apply_act(&mut tape, z1, plan.act1)?;
        let z2 = tape.matmul(h1, w2)?;
        let z2 = tape.add(z2, b2)?;
        let h2 = apply_act(&mut tape, z2, plan.act2)?;

        // fan-out: h1 feeds both the second layer and a penalty term
        let sq = tape.square(h1)?;
        let pen = tape.mean(sq)?;
        let pen = tape.scale(pen, 0.5)?;
        let hh = tape.mul(h2, h2)?;
        let main = tape.mean(hh)?;
        let out = tape.add(main, pen)?;
        tape.backward(out)?;

        let mut grad = Vec::with_capacity(params.len());
        for id in [x, w1, b1, w2, b2] {
            match tape.grad(id) {
                Some(g) => grad.extend_from_slice(g),
                None => grad.extend(std::iter::repeat(0.0).take(tape.data(id).len())),
            }
        }
        Ok((tape.scalar_value(out), grad))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(100))]

        /// Backward gradients match central finite differences on random
        /// small graphs at relative tolerance 1e-4.
        #[test]
        fn backward_matches_finite_differences(plan in plan_strategy()) {
            let (_, grad) = eval_plan(&plan, &plan.params).unwrap();
            let err = finite_diff_check(
                |p| eval_plan(&plan, p).map(|(v, _)| v),
                &plan.params,
                &grad,
                1e-6,
            ).unwrap();
            prop_assert!(err < 1e-4, "max relative error {err}");
        }

        /// Same inputs produce bit-identical outputs and gradients.
        #[test]
        fn forward_deterministic(plan in plan_strategy()) {
            let (v1, g1) = eval_plan(&plan, &plan.params).unwrap();
            let (v2, g2) = eval_plan(&plan, &plan.params).unwrap();
            prop_assert_eq!(v1.to_bits(), v2.to_bits());
            prop_assert_eq!(g1.len(), g2.len());
            for (a, b) in g1.iter().zip(g2.iter()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
