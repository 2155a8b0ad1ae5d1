/// Early-stopping decision over the evaluation-metric sequence.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EarlyStop {
    pub should_stop: bool,
    /// Step of the best metric; ties break to the earliest step.
    pub best_step: u64,
}

/// Stop once the metric has failed to (strictly) improve for `patience`
/// consecutive evaluations. Returns `None` for an empty sequence.
pub fn early_stop(evals: &[(u64, f64)], patience: usize) -> Option<EarlyStop> {
    let (&(first_step, first_val), rest) = evals.split_first()?;
    let mut best_step = first_step;
    let mut best_val = first_val;
    let mut fails = 0usize;
    for &(step, val) in rest {
        if val > best_val {
            best_val = val;
            best_step = step;
            fails = 0;
        } else {
            fails += 1;
        }
    }
    Some(EarlyStop { should_stop: patience > 0 && fails >= patience, best_step })
}
