//! Mini-batch training with the regularized loss, early stopping, and
//! best-checkpoint selection.

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::PreparedData;
use crate::error::{Error, Result};
use crate::metrics::{evaluate_model_on_split, MetricsResult};
use crate::model::Model;
use crate::param::OptimizerConfig;
use crate::scalar::Scalar;
use crate::tgc::{reg_feature_l2, reg_weight_l1, TgcFeatures, TgcLayer};

/// Training recipe. Defaults: batch size 10, both penalty rates 0.01,
/// early-stopping patience 10, RMSProp at learning rate 1e-5 with a global
/// gradient-norm clip of 5.
#[derive(Debug, Clone)]
pub struct TrainConfig<F> {
    pub batch_size: usize,
    pub lambda1: F,
    pub lambda2: F,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
    pub optimizer: OptimizerConfig<F>,
    pub clip_norm: Option<F>,
}

impl<F: Scalar> Default for TrainConfig<F> {
    fn default() -> Self {
        TrainConfig {
            batch_size: 10,
            lambda1: F::c(0.01),
            lambda2: F::c(0.01),
            max_epochs: 100,
            patience: 10,
            seed: 42,
            optimizer: OptimizerConfig::default(),
            clip_norm: Some(F::c(5.0)),
        }
    }
}

impl<F: Scalar> TrainConfig<F> {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::InvalidArgument("batch size must be >= 1".into()));
        }
        if self.patience == 0 {
            return Err(Error::InvalidArgument("patience must be >= 1".into()));
        }
        if self.max_epochs == 0 {
            return Err(Error::InvalidArgument("max epochs must be >= 1".into()));
        }
        if self.lambda1 < F::zero() || self.lambda2 < F::zero() {
            return Err(Error::InvalidArgument("penalty rates must be nonnegative".into()));
        }
        self.optimizer.validate()
    }
}

/// Mean squared error over the nodes, with its gradient wrt the prediction.
pub fn mse_with_grad<F: Scalar>(prediction: &[F], target: &[F]) -> Result<(F, Vec<F>)> {
    if prediction.len() != target.len() || prediction.is_empty() {
        return Err(Error::shape(
            "mse",
            format!("{}", prediction.len()),
            format!("{}", target.len()),
        ));
    }
    let n = F::from_usize(prediction.len()).expect("length fits scalar");
    let mut loss = F::zero();
    let mut grad = Vec::with_capacity(prediction.len());
    for (&p, &t) in prediction.iter().zip(target) {
        let e = p - t;
        loss = loss + e * e;
        grad.push(F::c(2.0) * e / n);
    }
    Ok((loss / n, grad))
}

/// The regularized training objective for one sample, split into its terms.
#[derive(Debug, Clone)]
pub struct LossBreakdown<F> {
    pub total: F,
    pub mse: F,
    pub weight_l1: F,
    pub feature_l2: F,
    pub d_prediction: Vec<F>,
}

/// Total loss `MSE(prediction, target) + lambda1 * R1 + lambda2 * R2` with
/// the prediction gradient. R1 is the masked entrywise L1 of the TGC
/// weights, R2 the adjacent-hop feature consistency penalty at the final
/// step.
pub fn total_loss<F: Scalar>(
    prediction: &[F],
    target: &[F],
    layer: &TgcLayer<F>,
    features: &TgcFeatures<F>,
    lambda1: F,
    lambda2: F,
) -> Result<LossBreakdown<F>> {
    let (mse, d_prediction) = mse_with_grad(prediction, target)?;
    let weight_l1 = if lambda1.is_zero() {
        F::zero()
    } else {
        reg_weight_l1(layer).0
    };
    let feature_l2 = if lambda2.is_zero() {
        F::zero()
    } else {
        reg_feature_l2(features).0
    };
    Ok(LossBreakdown {
        total: mse + lambda1 * weight_l1 + lambda2 * feature_l2,
        mse,
        weight_l1,
        feature_l2,
        d_prediction,
    })
}

/// One epoch's summary.
#[derive(Debug, Clone)]
pub struct EpochStats<F> {
    pub epoch: usize,
    pub train_loss: F,
    pub val_loss: F,
    pub seconds: f64,
}

/// Per-epoch losses, the early-stopping outcome, and the best model's
/// test-split metrics (in mph).
#[derive(Debug, Clone)]
pub struct TrainReport<F> {
    pub epochs: Vec<EpochStats<F>>,
    pub best_epoch: usize,
    pub best_val_loss: F,
    pub test_metrics: Option<MetricsResult<F>>,
}

/// Trains with shuffled mini-batches and batch-averaged gradients. The
/// validation loss (plain MSE in normalized units) drives early stopping:
/// when it fails to improve for `patience` consecutive epochs, training
/// stops and the best-validation model is returned along with the report.
pub fn train<F: Scalar>(
    model: &mut Model<F>,
    data: &PreparedData<F>,
    cfg: &TrainConfig<F>,
) -> Result<(Model<F>, TrainReport<F>)> {
    cfg.validate()?;
    if data.splits.train.is_empty() {
        return Err(Error::Data("train split has no windows".into()));
    }
    if data.splits.val.is_empty() {
        return Err(Error::Data("validation split has no windows (early stopping needs one)".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order = data.splits.train.clone();
    let mut best_model = model.clone();
    let mut best_val = F::infinity();
    let mut best_epoch = 0;
    let mut epochs_since_best = 0;
    let mut epochs = Vec::new();

    for epoch in 1..=cfg.max_epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut loss_sum = F::zero();
        for (batch_idx, batch) in order.chunks(cfg.batch_size).enumerate() {
            model.zero_grads();
            for &start in batch {
                let input = data.input(start);
                let target = data.target(start);
                let loss =
                    model.accumulate_gradients(&input, target, cfg.lambda1, cfg.lambda2)?;
                if !loss.is_finite() {
                    return Err(Error::NonFiniteLoss {
                        epoch,
                        batch: batch_idx,
                    });
                }
                loss_sum = loss_sum + loss;
            }
            let batch_len = F::from_usize(batch.len()).expect("batch size fits scalar");
            model.scale_grads(F::one() / batch_len);
            model.optimizer_step(&cfg.optimizer, cfg.clip_norm);
        }
        let train_count = F::from_usize(order.len()).expect("window count fits scalar");
        let train_loss = loss_sum / train_count;
        let val_loss = validation_loss(model, data)?;
        epochs.push(EpochStats {
            epoch,
            train_loss,
            val_loss,
            seconds: started.elapsed().as_secs_f64(),
        });
        if val_loss < best_val {
            best_val = val_loss;
            best_epoch = epoch;
            best_model = model.clone();
            epochs_since_best = 0;
        } else {
            epochs_since_best += 1;
            if epochs_since_best >= cfg.patience {
                break;
            }
        }
    }

    let test_metrics = if data.splits.test.is_empty() {
        None
    } else {
        Some(evaluate_model_on_split(&best_model, data, &data.splits.test)?)
    };
    Ok((
        best_model.clone(),
        TrainReport {
            epochs,
            best_epoch,
            best_val_loss: best_val,
            test_metrics,
        },
    ))
}

/// Mean MSE over the validation windows, in normalized units.
pub fn validation_loss<F: Scalar>(model: &Model<F>, data: &PreparedData<F>) -> Result<F> {
    split_mse(model, data, &data.splits.val)
}

/// Mean MSE of the model over the given window starts.
pub fn split_mse<F: Scalar>(model: &Model<F>, data: &PreparedData<F>, windows: &[usize]) -> Result<F> {
    if windows.is_empty() {
        return Err(Error::Data("empty split".into()));
    }
    let mut total = F::zero();
    for &start in windows {
        let input = data.input(start);
        let prediction = model.predict(&input)?;
        total = total + mse_with_grad(&prediction, data.target(start))?.0;
    }
    Ok(total / F::from_usize(windows.len()).expect("window count fits scalar"))
}
