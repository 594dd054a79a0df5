//! Central finite-difference verification of analytic gradients.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Floor in the relative-error denominator so near-zero coordinate pairs do
/// not blow the ratio up.
const REL_FLOOR: f64 = 1e-8;

/// Worst coordinate found by a finite-difference sweep.
#[derive(Debug, Clone)]
pub struct GradCheckReport<F> {
    pub max_rel_err: F,
    pub worst_index: usize,
    pub analytic_at_worst: F,
    pub numeric_at_worst: F,
}

/// Central-difference check of `analytic` against the scalar function `f`
/// evaluated around `theta`: per coordinate, compares
/// `(f(theta + h e_i) - f(theta - h e_i)) / 2h` with the analytic gradient
/// under the relative error `|a - n| / max(|a|, |n|, 1e-8)`.
///
/// `f` must be deterministic; a non-finite function value is an error.
pub fn fd_gradient_check<F: Scalar>(
    theta: &[F],
    analytic: &[F],
    h: F,
    mut f: impl FnMut(&[F]) -> Result<F>,
) -> Result<GradCheckReport<F>> {
    if theta.len() != analytic.len() {
        return Err(Error::shape(
            "fd_gradient_check",
            format!("{} coordinates", theta.len()),
            format!("{} gradient entries", analytic.len()),
        ));
    }
    if !h.is_finite() || h <= F::zero() {
        return Err(Error::InvalidArgument("finite-difference step must be positive".into()));
    }
    let mut point = theta.to_vec();
    let mut report = GradCheckReport {
        max_rel_err: F::zero(),
        worst_index: 0,
        analytic_at_worst: F::zero(),
        numeric_at_worst: F::zero(),
    };
    let two = F::c(2.0);
    for i in 0..point.len() {
        let original = point[i];
        point[i] = original + h;
        let plus = f(&point)?;
        point[i] = original - h;
        let minus = f(&point)?;
        point[i] = original;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!(
                "objective during finite differences at coordinate {i}"
            )));
        }
        let numeric = (plus - minus) / (two * h);
        let rel = relative_error(analytic[i], numeric);
        if rel > report.max_rel_err {
            report.max_rel_err = rel;
            report.worst_index = i;
            report.analytic_at_worst = analytic[i];
            report.numeric_at_worst = numeric;
        }
    }
    Ok(report)
}

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error<F: Scalar>(analytic: F, numeric: F) -> F {
    let denom = analytic.abs().max(numeric.abs()).max(F::c(REL_FLOOR));
    (analytic - numeric).abs() / denom
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_function_is_exact() {
        // f(w) = sum(w): gradient is all ones.
        let theta = vec![0.3f64, -1.2, 4.0, 0.0];
        let analytic = vec![1.0; 4];
        let report = fd_gradient_check(&theta, &analytic, 1e-5, |w| Ok(w.iter().sum())).unwrap();
        assert!(report.max_rel_err < 1e-9, "err {}", report.max_rel_err);
    }

    #[test]
    fn quadratic_norm_matches() {
        // f(w) = ||W x||^2 for a flattened 4x4 W and fixed x.
        let x = [0.5f64, -1.0, 2.0, 0.25];
        let theta: Vec<f64> = (0..16).map(|i| ((i * 7 % 11) as f64 - 5.0) / 3.0).collect();
        let eval = |w: &[f64]| -> Result<f64> {
            let mut total = 0.0;
            for i in 0..4 {
                let mut acc = 0.0;
                for j in 0..4 {
                    acc += w[i * 4 + j] * x[j];
                }
                total += acc * acc;
            }
            Ok(total)
        };
        // analytic: d/dW_ij = 2 (W x)_i x_j
        let mut analytic = vec![0.0; 16];
        for i in 0..4 {
            let mut acc = 0.0;
            for j in 0..4 {
                acc += theta[i * 4 + j] * x[j];
            }
            for j in 0..4 {
                analytic[i * 4 + j] = 2.0 * acc * x[j];
            }
        }
        let report = fd_gradient_check(&theta, &analytic, 1e-5, eval).unwrap();
        assert!(report.max_rel_err < 1e-6, "err {}", report.max_rel_err);
    }

    #[test]
    fn corrupted_gradient_is_detected() {
        let theta = vec![1.0f64, 2.0, 3.0];
        let mut analytic = vec![1.0; 3];
        analytic[1] *= 2.0; // fault injection
        let report = fd_gradient_check(&theta, &analytic, 1e-5, |w| Ok(w.iter().sum())).unwrap();
        assert!(report.max_rel_err > 0.1);
        assert_eq!(report.worst_index, 1);
    }

    #[test]
    fn non_finite_objective_is_an_error() {
        let theta = vec![1.0f64];
        let analytic = vec![1.0f64];
        let res = fd_gradient_check(&theta, &analytic, 1e-5, |_| Ok(f64::NAN));
        assert!(res.is_err());
    }
}
