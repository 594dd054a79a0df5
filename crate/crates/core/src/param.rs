//! Trainable parameters, support-mask enforcement, and the RMSProp update.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::SupportMask;
use crate::matrix::DenseMatrix;
use crate::scalar::Scalar;

/// RMSProp hyperparameters. Defaults follow the training recipe: learning
/// rate 1e-5, smoothing constant 0.99, denominator epsilon 1e-8.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimizerConfig<F> {
    pub learning_rate: F,
    pub alpha: F,
    pub epsilon: F,
}

impl<F: Scalar> Default for OptimizerConfig<F> {
    fn default() -> Self {
        OptimizerConfig {
            learning_rate: F::c(1e-5),
            alpha: F::c(0.99),
            epsilon: F::c(1e-8),
        }
    }
}

impl<F: Scalar> OptimizerConfig<F> {
    pub fn with_learning_rate(learning_rate: F) -> Self {
        OptimizerConfig {
            learning_rate,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate <= F::zero() {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        if self.alpha <= F::zero() || self.alpha >= F::one() {
            return Err(Error::InvalidArgument("alpha must lie in (0, 1)".into()));
        }
        if !self.epsilon.is_finite() || self.epsilon <= F::zero() {
            return Err(Error::InvalidArgument("epsilon must be positive".into()));
        }
        Ok(())
    }
}

/// A trainable dense matrix bundled with its gradient accumulator, RMSProp
/// state, and an optional {0,1} support mask. Masked entries of `value` are
/// exactly zero at rest and stay zero across optimizer steps.
#[derive(Debug, Clone)]
pub struct Parameter<F> {
    pub name: String,
    pub value: DenseMatrix<F>,
    pub grad: DenseMatrix<F>,
    pub rms: DenseMatrix<F>,
    pub mask: Option<Arc<SupportMask>>,
}

impl<F: Scalar> Parameter<F> {
    pub fn zeros(name: impl Into<String>, rows: usize, cols: usize) -> Self {
        Parameter {
            name: name.into(),
            value: DenseMatrix::zeros(rows, cols),
            grad: DenseMatrix::zeros(rows, cols),
            rms: DenseMatrix::zeros(rows, cols),
            mask: None,
        }
    }

    /// Uniform init in [-1/sqrt(fan_in), +1/sqrt(fan_in)], then the mask (if
    /// any) zeroes off-support entries.
    pub fn uniform(
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        fan_in: usize,
        rng: &mut impl Rng,
        mask: Option<Arc<SupportMask>>,
    ) -> Self {
        let bound = 1.0 / (fan_in as f64).sqrt();
        let value = DenseMatrix::from_fn(rows, cols, |_, _| F::c(rng.random_range(-bound..=bound)));
        let mut p = Parameter {
            name: name.into(),
            value,
            grad: DenseMatrix::zeros(rows, cols),
            rms: DenseMatrix::zeros(rows, cols),
            mask,
        };
        p.apply_mask();
        p
    }

    /// All-ones on the mask support, zero elsewhere: the neighborhood
    /// cell-state gate starts out passing neighbor states through unscaled.
    pub fn ones_on_support(name: impl Into<String>, mask: Arc<SupportMask>) -> Self {
        let n = mask.node_count();
        let value = mask.values().to_dense();
        let mut p = Parameter {
            name: name.into(),
            value,
            grad: DenseMatrix::zeros(n, n),
            rms: DenseMatrix::zeros(n, n),
            mask: Some(mask),
        };
        p.apply_mask();
        p
    }

    pub fn from_matrix(name: impl Into<String>, value: DenseMatrix<F>, mask: Option<Arc<SupportMask>>) -> Self {
        let (rows, cols) = value.shape();
        let mut p = Parameter {
            name: name.into(),
            value,
            grad: DenseMatrix::zeros(rows, cols),
            rms: DenseMatrix::zeros(rows, cols),
            mask,
        };
        p.apply_mask();
        p
    }

    pub fn rows(&self) -> usize {
        self.value.rows()
    }

    pub fn cols(&self) -> usize {
        self.value.cols()
    }

    pub fn len(&self) -> usize {
        self.value.as_slice().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Zeroes `value` outside the mask support.
    pub fn apply_mask(&mut self) {
        if let Some(mask) = self.mask.clone() {
            let m = mask.values();
            for i in 0..self.value.rows() {
                for j in 0..self.value.cols() {
                    if !m.get(i, j) {
                        self.value.set(i, j, F::zero());
                    }
                }
            }
        }
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(F::zero());
    }

    pub fn grad_norm_sq(&self) -> F {
        self.grad.as_slice().iter().map(|&g| g * g).sum()
    }

    /// Uncentered RMSProp:
    /// `s <- alpha * s + (1 - alpha) * g^2`,
    /// `value <- value - lr * g / (sqrt(s) + eps)`,
    /// then mask re-application and gradient reset. Entries with a zero
    /// gradient keep their value (the state still decays).
    pub fn rmsprop_step(&mut self, cfg: &OptimizerConfig<F>) {
        let one_minus = F::one() - cfg.alpha;
        let values = self.value.as_mut_slice();
        let grads = self.grad.as_mut_slice();
        let states = self.rms.as_mut_slice();
        for ((v, g), s) in values.iter_mut().zip(grads.iter()).zip(states.iter_mut()) {
            *s = cfg.alpha * *s + one_minus * *g * *g;
            if !g.is_zero() {
                *v = *v - cfg.learning_rate * *g / (s.sqrt() + cfg.epsilon);
            }
        }
        self.apply_mask();
        self.zero_grad();
    }
}

/// Scales every gradient so the global L2 norm does not exceed `max_norm`.
/// Returns the pre-clip norm.
pub fn clip_global_norm<'a, F: Scalar>(
    params: impl IntoIterator<Item = &'a mut Parameter<F>>,
    max_norm: F,
) -> F {
    let params: Vec<&'a mut Parameter<F>> = params.into_iter().collect();
    let total: F = params.iter().map(|p| p.grad_norm_sq()).sum();
    let norm = total.sqrt();
    if norm > max_norm && norm > F::zero() {
        let scale = max_norm / norm;
        for p in params {
            p.grad.scale_assign(scale);
        }
    }
    norm
}

/// Forward pass of a masked linear map: `y = (W ⊙ M) x` (plain `W x` when no
/// mask is attached).
pub fn masked_linear_forward<F: Scalar>(param: &Parameter<F>, x: &[F]) -> Result<Vec<F>> {
    if param.cols() != x.len() {
        return Err(Error::shape(
            "masked_linear_forward",
            format!("{}x{}", param.rows(), param.cols()),
            format!("len {}", x.len()),
        ));
    }
    match &param.mask {
        None => param.value.matvec(x),
        Some(mask) => {
            let m = mask.values();
            let mut out = Vec::with_capacity(param.rows());
            for i in 0..param.rows() {
                let mut acc = F::zero();
                for (j, (&w, &xj)) in param.value.row(i).iter().zip(x).enumerate() {
                    if m.get(i, j) {
                        acc = acc + w * xj;
                    }
                }
                out.push(acc);
            }
            Ok(out)
        }
    }
}

/// Backward pass of the masked linear map. Accumulates
/// `dW = (g x^T) ⊙ M` into the parameter gradient (bitwise zero outside the
/// support) and returns `dx = (W ⊙ M)^T g`.
pub fn masked_linear_backward<F: Scalar>(
    param: &mut Parameter<F>,
    x: &[F],
    upstream: &[F],
) -> Result<Vec<F>> {
    if param.cols() != x.len() || param.rows() != upstream.len() {
        return Err(Error::shape(
            "masked_linear_backward",
            format!("{}x{}", param.rows(), param.cols()),
            format!("x len {}, g len {}", x.len(), upstream.len()),
        ));
    }
    let mask = param.mask.clone();
    let mask_values = mask.as_ref().map(|m| m.values());
    param.grad.add_outer_assign(upstream, x, mask_values)?;
    let mut dx = vec![F::zero(); x.len()];
    for (i, &gi) in upstream.iter().enumerate() {
        let row = param.value.row(i);
        match mask_values {
            None => {
                for (d, &w) in dx.iter_mut().zip(row) {
                    *d = *d + w * gi;
                }
            }
            Some(m) => {
                for (j, (d, &w)) in dx.iter_mut().zip(row).enumerate() {
                    if m.get(i, j) {
                        *d = *d + w * gi;
                    }
                }
            }
        }
    }
    Ok(dx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::BoolMatrix;

    fn mask_from(rows: Vec<Vec<bool>>) -> Arc<SupportMask> {
        let r = rows.len();
        let c = rows[0].len();
        let values = BoolMatrix::from_fn(r, c, |i, j| rows[i][j]);
        Arc::new(SupportMask::from_values(1, values))
    }

    #[test]
    fn masked_forward_identity_mask() {
        let mask = mask_from(vec![vec![true, false], vec![false, true]]);
        let p = Parameter::from_matrix("w", DenseMatrix::filled(2, 2, 1.0), Some(mask));
        let y = masked_linear_forward(&p, &[2.0, 5.0]).unwrap();
        assert_eq!(y, vec![2.0, 5.0]);
    }

    #[test]
    fn masked_forward_hand_example() {
        let mask = mask_from(vec![vec![true, false], vec![true, true]]);
        let w = DenseMatrix::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let p = Parameter::from_matrix("w", w, Some(mask));
        let y = masked_linear_forward(&p, &[1.0, 1.0]).unwrap();
        assert_eq!(y, vec![1.0, 7.0]);
    }

    #[test]
    fn masked_backward_zero_outside_support() {
        let mask = mask_from(vec![vec![true, false], vec![true, true]]);
        let w = DenseMatrix::from_rows(vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let mut p = Parameter::from_matrix("w", w, Some(mask));
        let dx = masked_linear_backward(&mut p, &[1.0, 2.0], &[1.0, 1.0]).unwrap();
        // off-support gradient must be bitwise zero
        assert_eq!(p.grad.get(0, 1), 0.0);
        assert_eq!(p.grad.get(0, 0), 1.0);
        assert_eq!(p.grad.get(1, 1), 2.0);
        // dx = (W ⊙ M)^T g = [1 + 3, 0 + 4]
        assert_eq!(dx, vec![4.0, 4.0]);
    }

    #[test]
    fn rmsprop_hand_example() {
        // s = 0, g = 1, alpha = 0.99, lr = 0.1, eps = 0:
        // s -> 0.01, step = -0.1 / sqrt(0.01) = -1.0
        let mut p = Parameter::<f64>::zeros("w", 1, 1);
        p.grad.set(0, 0, 1.0);
        let cfg = OptimizerConfig {
            learning_rate: 0.1,
            alpha: 0.99,
            epsilon: 0.0,
        };
        p.rmsprop_step(&cfg);
        assert!((p.rms.get(0, 0) - 0.01).abs() < 1e-15);
        assert!((p.value.get(0, 0) + 1.0).abs() < 1e-12);
        assert_eq!(p.grad.get(0, 0), 0.0);
    }

    #[test]
    fn rmsprop_zero_gradient_decays_state_only() {
        let mut p = Parameter::<f64>::zeros("w", 1, 1);
        p.value.set(0, 0, 3.0);
        p.rms.set(0, 0, 1.0);
        let cfg = OptimizerConfig::default();
        p.rmsprop_step(&cfg);
        assert_eq!(p.value.get(0, 0), 3.0);
        assert!((p.rms.get(0, 0) - 0.99).abs() < 1e-15);
    }

    #[test]
    fn rmsprop_keeps_masked_entries_zero() {
        let mask = mask_from(vec![vec![true, false], vec![false, true]]);
        let mut p = Parameter::from_matrix("w", DenseMatrix::filled(2, 2, 1.0), Some(mask));
        // a stray gradient outside the support must not move the value
        p.grad.set(0, 1, 10.0);
        p.grad.set(0, 0, 1.0);
        p.rmsprop_step(&OptimizerConfig::with_learning_rate(0.1));
        assert_eq!(p.value.get(0, 1), 0.0);
        assert_ne!(p.value.get(0, 0), 1.0);
    }

    #[test]
    fn global_norm_clip() {
        let mut a = Parameter::<f64>::zeros("a", 1, 2);
        a.grad.as_mut_slice().copy_from_slice(&[3.0, 0.0]);
        let mut b = Parameter::<f64>::zeros("b", 1, 1);
        b.grad.set(0, 0, 4.0);
        let norm = clip_global_norm(vec![&mut a, &mut b], 5.0);
        assert_eq!(norm, 5.0); // 3-4-5 triangle, exactly at the limit
        assert_eq!(a.grad.get(0, 0), 3.0);

        let mut c = Parameter::<f64>::zeros("c", 1, 1);
        c.grad.set(0, 0, 10.0);
        let norm = clip_global_norm(vec![&mut c], 5.0);
        assert_eq!(norm, 10.0);
        assert!((c.grad.get(0, 0) - 5.0).abs() < 1e-12);
    }

    #[test]
    fn optimizer_config_validation() {
        assert!(OptimizerConfig::<f64>::default().validate().is_ok());
        let bad = OptimizerConfig {
            learning_rate: 0.0,
            ..OptimizerConfig::<f64>::default()
        };
        assert!(bad.validate().is_err());
        let bad = OptimizerConfig {
            alpha: 1.0,
            ..OptimizerConfig::<f64>::default()
        };
        assert!(bad.validate().is_err());
    }
}
