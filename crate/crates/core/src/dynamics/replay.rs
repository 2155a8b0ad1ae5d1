use std::collections::VecDeque;

use crate::error::{Error, Result};
use crate::numerics::Tensor;
use crate::rng::SeedRng;

pub const DEFAULT_BUFFER_CAPACITY: usize = 10_000;
pub const DEFAULT_REINIT_PROB: f64 = 0.05;
/// Fresh-noise range for chain reinitialization; covers the data support.
pub const DEFAULT_FRESH_RANGE: (f64, f64) = (-6.0, 6.0);

/// Persistent sample store for observation-space training. FIFO eviction;
/// batch initialization mixes stored samples with fresh uniform noise.
#[derive(Clone, Debug)]
pub struct ReplayBuffer {
    capacity: usize,
    dim: usize,
    reinit_prob: f64,
    fresh_range: (f64, f64),
    slots: VecDeque<Vec<f64>>,
}

/// Result of a batch initialization; `fresh` counts slots that came from
/// fresh noise rather than the buffer.
pub struct InitBatch {
    pub states: Tensor,
    pub fresh: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize, reinit_prob: f64, dim: usize) -> Result<Self> {
        Self::with_fresh_range(capacity, reinit_prob, dim, DEFAULT_FRESH_RANGE)
    }

    pub fn with_fresh_range(
        capacity: usize,
        reinit_prob: f64,
        dim: usize,
        fresh_range: (f64, f64),
    ) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidParameter("replay buffer capacity must be positive".into()));
        }
        if !(0.0..=1.0).contains(&reinit_prob) {
            return Err(Error::InvalidParameter(format!(
                "reinit probability must lie in [0, 1], got {reinit_prob}"
            )));
        }
        if dim == 0 || fresh_range.0 >= fresh_range.1 {
            return Err(Error::InvalidParameter("bad replay buffer dimensions or range".into()));
        }
        Ok(ReplayBuffer { capacity, dim, reinit_prob, fresh_range, slots: VecDeque::new() })
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn push(&mut self, sample: Vec<f64>) -> Result<()> {
        if sample.len() != self.dim {
            return Err(Error::ShapeMismatch {
                op: "replay_push",
                details: format!("sample has {} coordinates, buffer stores {}", sample.len(), self.dim),
            });
        }
        if self.slots.len() == self.capacity {
            self.slots.pop_front();
        }
        self.slots.push_back(sample);
        Ok(())
    }

    /// Push every row of a batch.
    pub fn push_rows(&mut self, batch: &Tensor) -> Result<()> {
        for i in 0..batch.rows() {
            self.push(batch.row(i).to_vec())?;
        }
        Ok(())
    }

    /// Chain initializations: each slot is fresh uniform noise with
    /// probability `reinit_prob`, otherwise a uniformly drawn stored sample.
    /// An empty buffer falls back to all-fresh noise (not an error).
    pub fn init_batch(&self, n: usize, rng: &mut SeedRng) -> Result<InitBatch> {
        if n == 0 {
            return Err(Error::InvalidParameter("init batch size must be positive".into()));
        }
        let (lo, hi) = self.fresh_range;
        let mut data = Vec::with_capacity(n * self.dim);
        let mut fresh = 0;
        for _ in 0..n {
            let take_fresh = self.slots.is_empty() || rng.uniform() < self.reinit_prob;
            if take_fresh {
                fresh += 1;
                for _ in 0..self.dim {
                    data.push(rng.uniform_range(lo, hi));
                }
            } else {
                let idx = rng.index(self.slots.len());
                data.extend_from_slice(&self.slots[idx]);
            }
        }
        Ok(InitBatch { states: Tensor::new(data, vec![n, self.dim])?, fresh })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_slot_round_trip() {
        let mut buf = ReplayBuffer::new(1, 0.0, 2).unwrap();
        buf.push(vec![1.5, -2.5]).unwrap();
        let mut rng = SeedRng::new(1);
        let init = buf.init_batch(4, &mut rng).unwrap();
        for i in 0..4 {
            assert_eq!(init.states.row(i), &[1.5, -2.5]);
        }
        assert_eq!(init.fresh, 0);
    }

    #[test]
    fn reinit_prob_one_is_always_fresh() {
        let mut buf = ReplayBuffer::new(8, 1.0, 2).unwrap();
        buf.push(vec![0.0, 0.0]).unwrap();
        let mut rng = SeedRng::new(2);
        let init = buf.init_batch(50, &mut rng).unwrap();
        assert_eq!(init.fresh, 50);
        for &v in init.states.data() {
            assert!((DEFAULT_FRESH_RANGE.0..DEFAULT_FRESH_RANGE.1).contains(&v));
        }
    }

    #[test]
    fn empty_buffer_falls_back_to_fresh() {
        let buf = ReplayBuffer::new(8, 0.0, 2).unwrap();
        let mut rng = SeedRng::new(3);
        let init = buf.init_batch(10, &mut rng).unwrap();
        assert_eq!(init.fresh, 10);
    }

    #[test]
    fn fifo_eviction_at_capacity() {
        let mut buf = ReplayBuffer::new(3, 0.0, 1).unwrap();
        for i in 0..5 {
            buf.push(vec![i as f64]).unwrap();
        }
        assert_eq!(buf.len(), 3);
        let stored: Vec<f64> = buf.slots.iter().map(|s| s[0]).collect();
        assert_eq!(stored, vec![2.0, 3.0, 4.0]);
    }

    #[test]
    fn fresh_fraction_matches_reinit_prob() {
        let mut buf = ReplayBuffer::new(16, 0.05, 1).unwrap();
        buf.push(vec![0.0]).unwrap();
        let mut rng = SeedRng::new(4);
        let n = 10_000;
        let init = buf.init_batch(n, &mut rng).unwrap();
        let p = 0.05;
        let sd = (n as f64 * p * (1.0 - p)).sqrt();
        let expected = n as f64 * p;
        assert!(
            (init.fresh as f64 - expected).abs() < 5.0 * sd,
            "fresh {} vs {expected} +- {}",
            init.fresh,
            5.0 * sd
        );
    }
}
