//! Traffic graph convolution: masked per-hop linear maps over the node
//! signal, plus the weight-sparsity and feature-consistency regularizers.
//!
//! For hop order k the convolution computes `GC^k = (W_k ⊙ Ahat^k ⊙ FFR) x`,
//! so each learned weight only connects node pairs that are both within k
//! hops and reachable at free-flow speed inside the configured horizon. The
//! per-hop outputs are concatenated hop-major into one feature vector.

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::SupportMask;
use crate::matrix::DenseMatrix;
use crate::param::{masked_linear_backward, masked_linear_forward, Parameter};
use crate::scalar::Scalar;

/// Concatenated multi-hop convolution features. `flat[(k-1)*N + i]` holds
/// hop k's output at node i.
#[derive(Debug, Clone, PartialEq)]
pub struct TgcFeatures<F> {
    node_count: usize,
    flat: Vec<F>,
}

impl<F: Scalar> TgcFeatures<F> {
    pub fn from_flat(node_count: usize, flat: Vec<F>) -> Result<Self> {
        if node_count == 0 || !flat.len().is_multiple_of(node_count) {
            return Err(Error::shape(
                "tgc_features",
                format!("{node_count} nodes"),
                format!("{} values", flat.len()),
            ));
        }
        Ok(TgcFeatures { node_count, flat })
    }

    pub fn order(&self) -> usize {
        self.flat.len() / self.node_count
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    /// Hop outputs for order `k` (1-based).
    pub fn hop(&self, k: usize) -> &[F] {
        let n = self.node_count;
        &self.flat[(k - 1) * n..k * n]
    }

    pub fn flat(&self) -> &[F] {
        &self.flat
    }

    pub fn into_flat(self) -> Vec<F> {
        self.flat
    }
}

/// One traffic graph convolution layer: K masked N x N weight matrices, one
/// per hop order, each confined to its support mask.
#[derive(Debug, Clone)]
pub struct TgcLayer<F> {
    weights: Vec<Parameter<F>>,
    masks: Vec<Arc<SupportMask>>,
}

impl<F: Scalar> TgcLayer<F> {
    /// Builds a layer from the hop-ordered support masks; weights start
    /// uniform in +-1/sqrt(N) restricted to each mask.
    pub fn new(masks: Vec<Arc<SupportMask>>, rng: &mut impl Rng) -> Result<Self> {
        if masks.is_empty() {
            return Err(Error::InvalidArgument("TGC layer needs at least one hop".into()));
        }
        let n = masks[0].node_count();
        for (idx, m) in masks.iter().enumerate() {
            if m.node_count() != n {
                return Err(Error::shape(
                    "tgc_layer",
                    format!("{n} nodes"),
                    format!("mask {idx} has {}", m.node_count()),
                ));
            }
        }
        let weights = masks
            .iter()
            .enumerate()
            .map(|(idx, mask)| {
                Parameter::uniform(
                    format!("w_gc_{}", idx + 1),
                    n,
                    n,
                    n,
                    rng,
                    Some(Arc::clone(mask)),
                )
            })
            .collect();
        Ok(TgcLayer { weights, masks })
    }

    /// Rebuilds a layer from already-initialized weights (checkpoint load).
    pub fn from_weights(weights: Vec<Parameter<F>>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidArgument("TGC layer needs at least one hop".into()));
        }
        let masks = weights
            .iter()
            .map(|w| {
                w.mask
                    .clone()
                    .ok_or_else(|| Error::Checkpoint(format!("TGC weight {} lacks its mask", w.name)))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TgcLayer { weights, masks })
    }

    pub fn order(&self) -> usize {
        self.weights.len()
    }

    pub fn node_count(&self) -> usize {
        self.weights[0].rows()
    }

    pub fn weights(&self) -> &[Parameter<F>] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [Parameter<F>] {
        &mut self.weights
    }

    pub fn masks(&self) -> &[Arc<SupportMask>] {
        &self.masks
    }

    /// Forward convolution: per hop `GC^k = (W_k ⊙ mask_k) x`, concatenated
    /// hop-major.
    pub fn forward(&self, x: &[F]) -> Result<TgcFeatures<F>> {
        let n = self.node_count();
        if x.len() != n {
            return Err(Error::shape("tgc_forward", format!("{n} nodes"), format!("len {}", x.len())));
        }
        let mut flat = Vec::with_capacity(self.order() * n);
        for w in &self.weights {
            flat.extend(masked_linear_forward(w, x)?);
        }
        TgcFeatures::from_flat(n, flat)
    }

    /// Backward convolution. `upstream` is the loss gradient with respect to
    /// the flattened features; weight gradients accumulate in place
    /// (restricted to each mask's support) and the input gradient
    /// `sum_k (W_k ⊙ mask_k)^T g_k` is returned.
    pub fn backward(&mut self, x: &[F], upstream: &[F]) -> Result<Vec<F>> {
        let n = self.node_count();
        if upstream.len() != self.order() * n {
            return Err(Error::shape(
                "tgc_backward",
                format!("{} features", self.order() * n),
                format!("len {}", upstream.len()),
            ));
        }
        let mut dx = vec![F::zero(); n];
        for (k, w) in self.weights.iter_mut().enumerate() {
            let g_k = &upstream[k * n..(k + 1) * n];
            let dx_k = masked_linear_backward(w, x, g_k)?;
            for (d, v) in dx.iter_mut().zip(dx_k) {
                *d = *d + v;
            }
        }
        Ok(dx)
    }
}

/// Entrywise L1 norm of the convolution weights over their mask supports,
/// with its subgradient (`sign(w)` on support, zero at zero and off
/// support). Pushing this toward zero makes the learned weights sparse.
pub fn reg_weight_l1<F: Scalar>(layer: &TgcLayer<F>) -> (F, Vec<DenseMatrix<F>>) {
    let mut value = F::zero();
    let mut subgrads = Vec::with_capacity(layer.order());
    for w in layer.weights() {
        let mask = w.mask.as_ref().expect("TGC weights are masked");
        let mut sub = DenseMatrix::zeros(w.rows(), w.cols());
        for i in 0..w.rows() {
            for j in 0..w.cols() {
                if !mask.values().get(i, j) {
                    continue;
                }
                let v = w.value.get(i, j);
                value = value + v.abs();
                if v > F::zero() {
                    sub.set(i, j, F::one());
                } else if v < F::zero() {
                    sub.set(i, j, -F::one());
                }
            }
        }
        subgrads.push(sub);
    }
    (value, subgrads)
}

/// L2-style consistency penalty between adjacent hop features:
/// `sqrt(sum_k sum_i (GC^k_i - GC^(k+1)_i)^2)`, zero when K = 1, with its
/// gradient with respect to the flattened features (zero at the kink).
pub fn reg_feature_l2<F: Scalar>(features: &TgcFeatures<F>) -> (F, Vec<F>) {
    let n = features.node_count();
    let order = features.order();
    let mut grad = vec![F::zero(); n * order];
    if order < 2 {
        return (F::zero(), grad);
    }
    let mut sum_sq = F::zero();
    for k in 1..order {
        let lo = features.hop(k);
        let hi = features.hop(k + 1);
        for (a, b) in lo.iter().zip(hi) {
            let d = *a - *b;
            sum_sq = sum_sq + d * d;
        }
    }
    let value = sum_sq.sqrt();
    if value > F::zero() {
        for k in 1..order {
            for i in 0..n {
                let d = (features.hop(k)[i] - features.hop(k + 1)[i]) / value;
                grad[(k - 1) * n + i] = grad[(k - 1) * n + i] + d;
                grad[k * n + i] = grad[k * n + i] - d;
            }
        }
    }
    (value, grad)
}
