//! Unified handle over the three forecasters so training, evaluation, and
//! checkpointing share one code path.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::baselines::{LsgcLstm, VanillaLstm};
use crate::error::{Error, Result};
use crate::graph::{GraphMatrices, SupportMask};
use crate::lstm::TgcLstm;
use crate::matrix::DenseMatrix;
use crate::param::{clip_global_norm, OptimizerConfig, Parameter};
use crate::scalar::Scalar;
use crate::tgc::{reg_feature_l2, reg_weight_l1, TgcFeatures};
use crate::training::{mse_with_grad, total_loss};

/// Which forecaster a model or checkpoint holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    TgcLstm,
    Lstm,
    LsgcLstm,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::TgcLstm => "tgc-lstm",
            ModelKind::Lstm => "lstm",
            ModelKind::LsgcLstm => "lsgc-lstm",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tgc-lstm" => Ok(ModelKind::TgcLstm),
            "lstm" => Ok(ModelKind::Lstm),
            "lsgc-lstm" => Ok(ModelKind::LsgcLstm),
            other => Err(Error::InvalidArgument(format!(
                "unknown model '{other}' (expected tgc-lstm, lstm, or lsgc-lstm)"
            ))),
        }
    }
}

/// A forecaster of any of the three supported kinds.
#[derive(Debug, Clone)]
pub enum Model<F: Scalar> {
    TgcLstm(TgcLstm<F>),
    Lstm(VanillaLstm<F>),
    LsgcLstm(LsgcLstm<F>),
}

impl<F: Scalar> Model<F> {
    /// Builds a freshly initialized model of the requested kind from the
    /// graph-derived matrices, seeded for reproducibility.
    pub fn build(kind: ModelKind, matrices: &GraphMatrices<F>, seed: u64) -> Result<Model<F>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = matrices.adjacency.node_count();
        match kind {
            ModelKind::TgcLstm => {
                let masks: Vec<Arc<SupportMask>> =
                    matrices.masks.iter().cloned().map(Arc::new).collect();
                Ok(Model::TgcLstm(TgcLstm::new(masks, &mut rng)?))
            }
            ModelKind::Lstm => Ok(Model::Lstm(VanillaLstm::new(n, &mut rng))),
            ModelKind::LsgcLstm => Ok(Model::LsgcLstm(LsgcLstm::new(
                &matrices.adjacency,
                matrices.masks.len(),
                &mut rng,
            )?)),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Model::TgcLstm(_) => ModelKind::TgcLstm,
            Model::Lstm(_) => ModelKind::Lstm,
            Model::LsgcLstm(_) => ModelKind::LsgcLstm,
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Model::TgcLstm(m) => m.node_count(),
            Model::Lstm(m) => m.node_count(),
            Model::LsgcLstm(m) => m.node_count(),
        }
    }

    /// Hop order of the graph convolution (1 for the vanilla LSTM).
    pub fn order(&self) -> usize {
        match self {
            Model::TgcLstm(m) => m.order(),
            Model::Lstm(_) => 1,
            Model::LsgcLstm(m) => m.lsgc().order(),
        }
    }

    /// One-step-ahead prediction from a T x N window (normalized units).
    pub fn predict(&self, window: &DenseMatrix<F>) -> Result<Vec<F>> {
        Ok(self.predict_with_features(window)?.0)
    }

    /// Prediction plus, for the TGC-LSTM, the final step's convolution
    /// features (used for feature-consistency reporting).
    pub fn predict_with_features(
        &self,
        window: &DenseMatrix<F>,
    ) -> Result<(Vec<F>, Option<TgcFeatures<F>>)> {
        match self {
            Model::TgcLstm(m) => {
                let (h, tape) = m.forward_sequence(window)?;
                let features =
                    TgcFeatures::from_flat(m.node_count(), tape.final_features().to_vec())?;
                Ok((h, Some(features)))
            }
            Model::Lstm(m) => Ok((m.forward_sequence(window)?.0, None)),
            Model::LsgcLstm(m) => Ok((m.forward_sequence(window)?.0, None)),
        }
    }

    /// Per-sample training objective, without touching gradients. For the
    /// TGC-LSTM this is MSE + lambda1 * R1 + lambda2 * R2; the baselines use
    /// plain MSE (the regularizers are defined on TGC weights and features).
    pub fn regularized_loss(
        &self,
        window: &DenseMatrix<F>,
        target: &[F],
        lambda1: F,
        lambda2: F,
    ) -> Result<F> {
        match self {
            Model::TgcLstm(m) => {
                let (h, tape) = m.forward_sequence(window)?;
                let features =
                    TgcFeatures::from_flat(m.node_count(), tape.final_features().to_vec())?;
                let breakdown = total_loss(&h, target, m.tgc(), &features, lambda1, lambda2)?;
                Ok(breakdown.total)
            }
            _ => {
                let prediction = self.predict(window)?;
                Ok(mse_with_grad(&prediction, target)?.0)
            }
        }
    }

    /// Forward + backward for one sample: accumulates parameter gradients in
    /// place and returns the sample loss.
    pub fn accumulate_gradients(
        &mut self,
        window: &DenseMatrix<F>,
        target: &[F],
        lambda1: F,
        lambda2: F,
    ) -> Result<F> {
        match self {
            Model::TgcLstm(m) => {
                let (h, tape) = m.forward_sequence(window)?;
                let features =
                    TgcFeatures::from_flat(m.node_count(), tape.final_features().to_vec())?;
                let breakdown = total_loss(&h, target, m.tgc(), &features, lambda1, lambda2)?;
                // weight-sparsity subgradient goes straight onto the TGC weights
                if !lambda1.is_zero() {
                    let (_, subgrads) = reg_weight_l1(m.tgc());
                    for (w, sub) in m.tgc_mut().weights_mut().iter_mut().zip(&subgrads) {
                        w.grad.add_scaled_assign(sub, lambda1)?;
                    }
                }
                let d_features: Option<Vec<F>> = if lambda2.is_zero() {
                    None
                } else {
                    let (_, mut d_feat) = reg_feature_l2(&features);
                    for d in &mut d_feat {
                        *d = *d * lambda2;
                    }
                    Some(d_feat)
                };
                m.backward_sequence(tape, &breakdown.d_prediction, d_features.as_deref())?;
                Ok(breakdown.total)
            }
            Model::Lstm(m) => {
                let (h, tape) = m.forward_sequence(window)?;
                let (loss, d_pred) = mse_with_grad(&h, target)?;
                m.backward_sequence(tape, &d_pred)?;
                Ok(loss)
            }
            Model::LsgcLstm(m) => {
                let (h, tape) = m.forward_sequence(window)?;
                let (loss, d_pred) = mse_with_grad(&h, target)?;
                m.backward_sequence(tape, &d_pred)?;
                Ok(loss)
            }
        }
    }

    /// Parameters in a fixed canonical order (the checkpoint and gradient
    /// vector order).
    pub fn params(&self) -> Vec<&Parameter<F>> {
        match self {
            Model::TgcLstm(m) => m.params(),
            Model::Lstm(m) => m.params(),
            Model::LsgcLstm(m) => m.params(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter<F>> {
        match self {
            Model::TgcLstm(m) => m.params_mut(),
            Model::Lstm(m) => m.params_mut(),
            Model::LsgcLstm(m) => m.params_mut(),
        }
    }

    pub fn zero_grads(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    pub fn scale_grads(&mut self, scale: F) {
        for p in self.params_mut() {
            p.grad.scale_assign(scale);
        }
    }

    /// Optional global-norm clip followed by one RMSProp step on every
    /// parameter (which also re-applies masks and clears gradients).
    pub fn optimizer_step(&mut self, cfg: &OptimizerConfig<F>, clip_norm: Option<F>) {
        if let Some(max_norm) = clip_norm {
            clip_global_norm(self.params_mut(), max_norm);
        }
        for p in self.params_mut() {
            p.rmsprop_step(cfg);
        }
    }

    /// All parameter values flattened in canonical order.
    pub fn param_vector(&self) -> Vec<F> {
        self.params()
            .iter()
            .flat_map(|p| p.value.as_slice().iter().copied())
            .collect()
    }

    /// All accumulated gradients flattened in canonical order.
    pub fn grad_vector(&self) -> Vec<F> {
        self.params()
            .iter()
            .flat_map(|p| p.grad.as_slice().iter().copied())
            .collect()
    }

    /// Overwrites every parameter value from a flat vector in canonical
    /// order (the gradient checker uses this to probe the loss surface).
    pub fn set_param_vector(&mut self, values: &[F]) -> Result<()> {
        let expected: usize = self.params().iter().map(|p| p.len()).sum();
        if values.len() != expected {
            return Err(Error::shape(
                "set_param_vector",
                format!("{expected}"),
                format!("{}", values.len()),
            ));
        }
        let mut cursor = 0;
        for p in self.params_mut() {
            let len = p.len();
            p.value
                .as_mut_slice()
                .copy_from_slice(&values[cursor..cursor + len]);
            cursor += len;
        }
        Ok(())
    }
}
