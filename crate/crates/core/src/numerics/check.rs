use crate::error::{Error, Result};

/// Compare an analytic gradient against central finite differences.
///
/// Returns the maximum over coordinates of
/// `|analytic_i - (f(x + h e_i) - f(x - h e_i)) / 2h| / (|analytic_i| + 1e-8)`.
pub fn finite_diff_check<F>(mut f: F, point: &[f64], analytic: &[f64], h: f64) -> Result<f64>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    if h <= 0.0 || !h.is_finite() {
        return Err(Error::InvalidParameter(format!("finite-difference step must be positive, got {h}")));
    }
    if point.len() != analytic.len() {
        return Err(Error::ShapeMismatch {
            op: "finite_diff_check",
            details: format!("point has {} coordinates, analytic gradient {}", point.len(), analytic.len()),
        });
    }
    let mut x = point.to_vec();
    let mut worst = 0.0f64;
    for i in 0..point.len() {
        x[i] = point[i] + h;
        let fp = f(&x)?;
        x[i] = point[i] - h;
        let fm = f(&x)?;
        x[i] = point[i];
        if !fp.is_finite() || !fm.is_finite() {
            return Err(Error::NonFiniteEval(format!("finite_diff_check at coordinate {i}")));
        }
        let central = (fp - fm) / (2.0 * h);
        let err = (analytic[i] - central).abs() / (analytic[i].abs() + 1e-8);
        worst = worst.max(err);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_in_one_dim() {
        // f = x^2 at x = 3: derivative 6.
        let err = finite_diff_check(|x| Ok(x[0] * x[0]), &[3.0], &[6.0], 1e-5).unwrap();
        assert!(err < 1e-6, "err {err}");
    }

    #[test]
    fn constant_function() {
        let err = finite_diff_check(|_| Ok(4.2), &[1.0, -2.0], &[0.0, 0.0], 1e-5).unwrap();
        assert!(err < 1e-9, "err {err}");
    }

    #[test]
    fn sum_tanh_at_origin() {
        // grad of sum(tanh(x)) at 0 is all ones.
        let point = vec![0.0; 5];
        let ones = vec![1.0; 5];
        let err =
            finite_diff_check(|x| Ok(x.iter().map(|v| v.tanh()).sum()), &point, &ones, 1e-5).unwrap();
        assert!(err < 1e-6, "err {err}");
    }

    #[test]
    fn invalid_h_rejected() {
        assert!(finite_diff_check(|x| Ok(x[0]), &[0.0], &[1.0], 0.0).is_err());
    }

    #[test]
    fn non_finite_evaluation_is_error() {
        let err = finite_diff_check(|x| Ok(x[0].ln()), &[0.0], &[1.0], 1e-5);
        assert!(err.is_err());
    }
}
