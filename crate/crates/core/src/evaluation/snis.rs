//! Self-normalized importance sampling under the prior: for the tilted model
//! p(z) exp(-E(G(z))) / Z, any expectation can be estimated as
//! E[w f] / E[w] with w = exp(-E(G(z))) and z drawn from the prior. This is
//! the identity the reparametrized negative phase rests on, so it serves as
//! an independent oracle for the Langevin estimates.

use crate::error::{Error, Result};
use crate::evaluation::quadrature::{OracleMethod, OracleResult};
use crate::models::{BaseGenerator, EnergyNetwork};
use crate::rng::SeedRng;

pub const DEFAULT_MIN_ESS: f64 = 100.0;
const BOOTSTRAP_ROUNDS: usize = 200;

/// SNIS estimate of E_{tilted}[f(z)] with a bootstrap standard error.
/// Weights are shift-stabilized; degenerate weight sets (effective sample
/// size below `min_ess`) are an error rather than a silently bad estimate.
pub fn snis_expectation(
    base: &BaseGenerator,
    energy: &EnergyNetwork,
    f: impl Fn(&[f64]) -> f64,
    n: usize,
    min_ess: f64,
    rng: &mut SeedRng,
) -> Result<OracleResult> {
    if n < 2 {
        return Err(Error::InvalidParameter("SNIS needs at least 2 samples".into()));
    }
    let z = base.sample_prior(n, rng)?;
    let x = base.decode(&z)?;
    let energies = energy.energy(&x)?;
    let shift = energies.iter().cloned().fold(f64::INFINITY, f64::min);
    let weights: Vec<f64> = energies.iter().map(|e| (-(e - shift)).exp()).collect();

    let sum_w: f64 = weights.iter().sum();
    let sum_w2: f64 = weights.iter().map(|w| w * w).sum();
    let ess = sum_w * sum_w / sum_w2;
    if !ess.is_finite() || ess < min_ess {
        return Err(Error::DegenerateWeights { ess, threshold: min_ess });
    }

    let values: Vec<f64> = (0..n).map(|i| f(z.row(i))).collect();
    for v in &values {
        if !v.is_finite() {
            return Err(Error::NonFiniteEval("SNIS integrand".into()));
        }
    }
    let estimate =
        values.iter().zip(weights.iter()).map(|(v, w)| v * w).sum::<f64>() / sum_w;

    // bootstrap over resampled indices
    let mut boot = Vec::with_capacity(BOOTSTRAP_ROUNDS);
    for _ in 0..BOOTSTRAP_ROUNDS {
        let mut num = 0.0;
        let mut den = 0.0;
        for _ in 0..n {
            let i = rng.index(n);
            num += values[i] * weights[i];
            den += weights[i];
        }
        if den > 0.0 {
            boot.push(num / den);
        }
    }
    let bn = boot.len() as f64;
    let bmean = boot.iter().sum::<f64>() / bn;
    let se = (boot.iter().map(|b| (b - bmean) * (b - bmean)).sum::<f64>() / bn).sqrt();

    Ok(OracleResult {
        value: estimate,
        error: se,
        method: OracleMethod::Snis,
        count: n,
        ess: Some(ess),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_energy_is_plain_monte_carlo() {
        // f = z on the untilted prior: mean 0 within a few SEs
        let base = BaseGenerator::identity_2d();
        let zero = EnergyNetwork::zero(2);
        let mut rng = SeedRng::new(3);
        let r = snis_expectation(&base, &zero, |z| z[0], 20_000, DEFAULT_MIN_ESS, &mut rng).unwrap();
        assert_eq!(r.ess.unwrap().round() as usize, 20_000);
        assert!(r.value.abs() < 4.0 * r.error, "value {} se {}", r.value, r.error);
    }

    #[test]
    fn linear_tilt_recovers_unit_mean() {
        // E = -z tilts N(0,1) to N(1,1); f = z should estimate 1.
        let base = BaseGenerator::identity_1d();
        let e = EnergyNetwork::linear(&[-1.0], 0.0);
        let mut rng = SeedRng::new(4);
        let r = snis_expectation(&base, &e, |z| z[0], 40_000, DEFAULT_MIN_ESS, &mut rng).unwrap();
        assert!((r.value - 1.0).abs() < 3.0 * r.error, "value {} se {}", r.value, r.error);
    }

    #[test]
    fn degenerate_weights_rejected() {
        // an extreme tilt concentrates all weight on one draw
        let base = BaseGenerator::identity_1d();
        let e = EnergyNetwork::linear(&[-200.0], 0.0);
        let mut rng = SeedRng::new(5);
        match snis_expectation(&base, &e, |z| z[0], 500, DEFAULT_MIN_ESS, &mut rng) {
            Err(Error::DegenerateWeights { ess, .. }) => assert!(ess < DEFAULT_MIN_ESS),
            other => panic!("expected DegenerateWeights, got {other:?}"),
        }
    }

    #[test]
    fn bootstrap_error_shrinks_with_n() {
        let base = BaseGenerator::identity_1d();
        let e = EnergyNetwork::linear(&[-1.0], 0.0);
        let mut rng = SeedRng::new(6);
        let small = snis_expectation(&base, &e, |z| z[0], 2_000, 50.0, &mut rng).unwrap();
        let large = snis_expectation(&base, &e, |z| z[0], 50_000, 50.0, &mut rng).unwrap();
        assert!(large.error < small.error, "{} !< {}", large.error, small.error);
    }
}
