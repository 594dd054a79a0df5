//! Forecast evaluation metrics and the averaged-weight interpretability
//! export.

use std::path::Path;

use crate::data::PreparedData;
use crate::error::{Error, Result};
use crate::graph::write_file;
use crate::matrix::DenseMatrix;
use crate::model::Model;
use crate::scalar::Scalar;
use crate::tgc::TgcLayer;

/// Observations at or below this speed (mph) are excluded from the MAPE
/// mean; dividing by a near-zero observation makes the percentage
/// meaningless. Excluded cells are counted in the result.
pub const MAPE_MIN_SPEED_MPH: f64 = 1.0;

/// MAE / MAPE / RMSE over all (sample, node) cells, in mph.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricsResult<F> {
    pub mae: F,
    pub mape_percent: F,
    pub rmse: F,
    pub samples: usize,
    pub per_node_mae: Vec<F>,
    pub mape_excluded_cells: usize,
}

/// Computes MAE, MAPE (guarded), and RMSE between predicted and observed
/// speeds. Inputs are lists of per-sample node vectors in mph.
pub fn evaluate<F: Scalar>(predictions: &[Vec<F>], targets: &[Vec<F>]) -> Result<MetricsResult<F>> {
    if predictions.is_empty() || predictions.len() != targets.len() {
        return Err(Error::shape(
            "evaluate",
            format!("{} predictions", predictions.len()),
            format!("{} targets", targets.len()),
        ));
    }
    let n = predictions[0].len();
    if n == 0 {
        return Err(Error::InvalidArgument("evaluate needs at least one node".into()));
    }
    let mape_floor = F::c(MAPE_MIN_SPEED_MPH);
    let mut abs_sum = F::zero();
    let mut sq_sum = F::zero();
    let mut mape_sum = F::zero();
    let mut mape_count = 0usize;
    let mut mape_excluded = 0usize;
    let mut per_node_abs = vec![F::zero(); n];
    for (p, t) in predictions.iter().zip(targets) {
        if p.len() != n || t.len() != n {
            return Err(Error::shape("evaluate", format!("{n} nodes"), format!("{}x{}", p.len(), t.len())));
        }
        for (j, (&pj, &tj)) in p.iter().zip(t).enumerate() {
            let err = (tj - pj).abs();
            abs_sum = abs_sum + err;
            sq_sum = sq_sum + err * err;
            per_node_abs[j] = per_node_abs[j] + err;
            if tj > mape_floor {
                mape_sum = mape_sum + err / tj;
                mape_count += 1;
            } else {
                mape_excluded += 1;
            }
        }
    }
    let samples = predictions.len();
    let cells = F::from_usize(samples * n).expect("cell count fits scalar");
    let per_node_mae = per_node_abs
        .into_iter()
        .map(|v| v / F::from_usize(samples).expect("sample count fits scalar"))
        .collect();
    let mape_percent = if mape_count == 0 {
        F::zero()
    } else {
        mape_sum / F::from_usize(mape_count).expect("count fits scalar") * F::c(100.0)
    };
    Ok(MetricsResult {
        mae: abs_sum / cells,
        mape_percent,
        rmse: (sq_sum / cells).sqrt(),
        samples,
        per_node_mae,
        mape_excluded_cells: mape_excluded,
    })
}

/// Runs the model over the given window starts of a prepared dataset and
/// scores the denormalized predictions against the mph targets.
pub fn evaluate_model_on_split<F: Scalar>(
    model: &Model<F>,
    data: &PreparedData<F>,
    windows: &[usize],
) -> Result<MetricsResult<F>> {
    if windows.is_empty() {
        return Err(Error::Data("empty evaluation split".into()));
    }
    if model.node_count() != data.dataset.node_count() {
        return Err(Error::shape(
            "evaluate_model",
            format!("model over {} nodes", model.node_count()),
            format!("dataset with {}", data.dataset.node_count()),
        ));
    }
    let mut predictions = Vec::with_capacity(windows.len());
    let mut targets = Vec::with_capacity(windows.len());
    for &start in windows {
        let input = data.input(start);
        let pred = model.predict(&input)?;
        predictions.push(data.record.denormalize(&pred));
        targets.push(data.record.denormalize(data.target(start)));
    }
    evaluate(&predictions, &targets)
}

/// The interpretability export: the element-wise average of the masked TGC
/// weight matrices, `(1/K) sum_k W_k ⊙ mask_k`. Entries outside the
/// reachability support are exactly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedWeightMatrix<F> {
    pub values: DenseMatrix<F>,
}

pub fn export_avg_weights<F: Scalar>(layer: &TgcLayer<F>) -> AveragedWeightMatrix<F> {
    let n = layer.node_count();
    let order = layer.order();
    let mut values = DenseMatrix::zeros(n, n);
    for w in layer.weights() {
        let mask = w.mask.as_ref().expect("TGC weights are masked");
        for i in 0..n {
            for j in 0..n {
                if mask.values().get(i, j) {
                    values.set(i, j, values.get(i, j) + w.value.get(i, j));
                }
            }
        }
    }
    values.scale_assign(F::one() / F::from_usize(order).expect("order fits scalar"));
    AveragedWeightMatrix { values }
}

/// Writes the averaged weight matrix as CSV with node-id header and row
/// labels, aligned with the network's node order.
pub fn write_avg_weights_csv<F: Scalar>(
    path: &Path,
    avg: &AveragedWeightMatrix<F>,
    node_ids: &[String],
) -> Result<()> {
    let n = avg.values.rows();
    if node_ids.len() != n {
        return Err(Error::shape(
            "write_avg_weights_csv",
            format!("{n} rows"),
            format!("{} ids", node_ids.len()),
        ));
    }
    let mut out = String::from("node");
    for id in node_ids {
        out.push(',');
        out.push_str(id);
    }
    out.push('\n');
    for (i, id) in node_ids.iter().enumerate() {
        out.push_str(id);
        for &v in avg.values.row(i) {
            out.push(',');
            out.push_str(&format!("{v}"));
        }
        out.push('\n');
    }
    write_file(path, out.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::SupportMask;
    use crate::matrix::BoolMatrix;
    use crate::param::Parameter;
    use std::sync::Arc;

    #[test]
    fn metrics_hand_example() {
        let y: Vec<Vec<f64>> = vec![vec![60.0, 50.0]];
        let yhat = vec![vec![58.0, 54.0]];
        let m = evaluate(&yhat, &y).unwrap();
        assert!((m.mae - 3.0).abs() < 1e-12);
        assert!((m.mape_percent - 5.666666666666667).abs() < 1e-9);
        assert!((m.rmse - 10.0f64.sqrt()).abs() < 1e-12);
        assert_eq!(m.samples, 1);
        assert_eq!(m.per_node_mae, vec![2.0, 4.0]);
        assert_eq!(m.mape_excluded_cells, 0);
    }

    #[test]
    fn perfect_prediction_scores_zero() {
        let y = vec![vec![60.0, 50.0], vec![40.0, 45.0]];
        let m = evaluate(&y, &y).unwrap();
        assert_eq!(m.mae, 0.0);
        assert_eq!(m.mape_percent, 0.0);
        assert_eq!(m.rmse, 0.0);
    }

    #[test]
    fn mape_guard_excludes_stopped_traffic() {
        let targets: Vec<Vec<f64>> = vec![vec![0.5, 50.0]];
        let preds = vec![vec![5.0, 45.0]];
        let m = evaluate(&preds, &targets).unwrap();
        assert_eq!(m.mape_excluded_cells, 1);
        assert!((m.mape_percent - 10.0).abs() < 1e-12);
    }

    #[test]
    fn evaluate_rejects_empty_or_mismatched() {
        assert!(evaluate::<f64>(&[], &[]).is_err());
        let a = vec![vec![1.0]];
        let b = vec![vec![1.0], vec![2.0]];
        assert!(evaluate(&a, &b).is_err());
    }

    #[test]
    fn rmse_at_least_mae_on_random_inputs() {
        let mut state = 123456789u64;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) * 60.0
        };
        for _ in 0..50 {
            let preds: Vec<Vec<f64>> = (0..4).map(|_| (0..3).map(|_| next()).collect()).collect();
            let targets: Vec<Vec<f64>> = (0..4).map(|_| (0..3).map(|_| next() + 1.5).collect()).collect();
            let m = evaluate(&preds, &targets).unwrap();
            assert!(m.rmse >= m.mae - 1e-12);
        }
    }

    fn two_hop_layer(values: [f64; 2]) -> TgcLayer<f64> {
        let mask1 = Arc::new(SupportMask::from_values(
            1,
            BoolMatrix::from_fn(2, 2, |i, j| i == j),
        ));
        let mask2 = Arc::new(SupportMask::from_values(2, BoolMatrix::filled(2, 2, true)));
        let w1 = Parameter::from_matrix(
            "w_gc_1",
            DenseMatrix::filled(2, 2, values[0]),
            Some(mask1),
        );
        let w2 = Parameter::from_matrix(
            "w_gc_2",
            DenseMatrix::filled(2, 2, values[1]),
            Some(mask2),
        );
        TgcLayer::from_weights(vec![w1, w2]).unwrap()
    }

    #[test]
    fn averaged_weights_zero_and_identity_cases() {
        let layer = two_hop_layer([0.0, 0.0]);
        let avg = export_avg_weights(&layer);
        assert!(avg.values.as_slice().iter().all(|&v| v == 0.0));

        // K = 1 with the weight equal to its mask gives back the mask
        let mask = Arc::new(SupportMask::from_values(
            1,
            BoolMatrix::from_fn(2, 2, |i, j| i == j),
        ));
        let w = Parameter::from_matrix("w_gc_1", mask.values().to_dense::<f64>(), Some(Arc::clone(&mask)));
        let layer = TgcLayer::from_weights(vec![w]).unwrap();
        let avg = export_avg_weights(&layer);
        assert_eq!(avg.values, mask.values().to_dense());
    }

    #[test]
    fn averaged_weights_respect_masks() {
        let layer = two_hop_layer([1.0, 0.5]);
        let avg = export_avg_weights(&layer);
        // diagonal: (1.0 + 0.5) / 2; off-diagonal: only hop 2 contributes
        assert_eq!(avg.values.get(0, 0), 0.75);
        assert_eq!(avg.values.get(0, 1), 0.25);
    }

    #[test]
    fn averaged_weights_zero_off_support_even_with_stray_values() {
        let mut layer = two_hop_layer([1.0, 0.5]);
        // plant a stray value outside hop 1's support; the export applies
        // the mask, so it must not leak through
        layer.weights_mut()[0].value.set(0, 1, 123.0);
        let avg = export_avg_weights(&layer);
        assert_eq!(avg.values.get(0, 1), 0.25); // hop-2 contribution only
    }

    #[test]
    fn avg_weight_csv_has_row_labels() {
        let dir = tempfile::tempdir().unwrap();
        let layer = two_hop_layer([1.0, 0.5]);
        let avg = export_avg_weights(&layer);
        let path = dir.path().join("avg.csv");
        let ids = vec!["a".to_string(), "b".to_string()];
        write_avg_weights_csv(&path, &avg, &ids).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), "node,a,b");
        assert!(lines.next().unwrap().starts_with("a,0.75,"));
    }
}
