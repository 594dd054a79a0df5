//! Element-wise nonlinearities and their derivatives.
//!
//! Derivatives are expressed in terms of the cached forward outputs, which is
//! what the backward passes retain on their tapes.

use crate::scalar::Scalar;

/// Numerically stable logistic sigmoid.
pub fn sigmoid<F: Scalar>(x: F) -> F {
    if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    }
}

/// Sigmoid derivative given the forward output `y = sigmoid(x)`.
pub fn sigmoid_grad_from_output<F: Scalar>(y: F) -> F {
    y * (F::one() - y)
}

/// Hyperbolic tangent derivative given the forward output `y = tanh(x)`.
pub fn tanh_grad_from_output<F: Scalar>(y: F) -> F {
    F::one() - y * y
}

pub fn sigmoid_slice<F: Scalar>(xs: &[F]) -> Vec<F> {
    xs.iter().map(|&x| sigmoid(x)).collect()
}

pub fn tanh_slice<F: Scalar>(xs: &[F]) -> Vec<F> {
    xs.iter().map(|&x| x.tanh()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn values_at_zero() {
        assert_eq!(sigmoid(0.0f64), 0.5);
        assert_eq!(0.0f64.tanh(), 0.0);
        assert_eq!(sigmoid_grad_from_output(0.5), 0.25);
        assert_eq!(tanh_grad_from_output(0.0), 1.0);
    }

    #[test]
    fn saturation_is_finite() {
        let lo = sigmoid(-800.0f64);
        assert_eq!(lo, 0.0);
        assert!(lo.is_finite());
        let hi = sigmoid(800.0f64);
        assert_eq!(hi, 1.0);
        // moderate negative tail against the closed form e^x / (1 + e^x)
        let y = sigmoid(-40.0f64);
        let expected = 4.248354255291589e-18;
        assert!((y - expected).abs() / expected < 1e-12);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let h = 1e-6f64;
        for &x in &[-3.0, -0.7, 0.0, 0.9, 2.5] {
            let ds = (sigmoid(x + h) - sigmoid(x - h)) / (2.0 * h);
            assert!((ds - sigmoid_grad_from_output(sigmoid(x))).abs() < 1e-9);
            let dt = ((x + h).tanh() - (x - h).tanh()) / (2.0 * h);
            assert!((dt - tanh_grad_from_output(x.tanh())).abs() < 1e-9);
        }
    }
}
