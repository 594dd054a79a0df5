//! Finite-difference verification of every analytic gradient in the crate:
//! the masked linear map, the graph convolution, both regularizers, the
//! TGC-LSTM (including the neighborhood cell-state gate), the vanilla LSTM,
//! the LSGC layer and its stacked model, and the full training objective.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::gradcheck::fd_gradient_check;
use crate::graph::{build_graph_matrices, Edge, GraphMatrices, NodeSpeeds, SupportMask, TrafficGraph};
use crate::matrix::{BoolMatrix, DenseMatrix};
use crate::model::{Model, ModelKind};
use crate::param::{masked_linear_backward, masked_linear_forward, Parameter};
use crate::scalar::Scalar;
use crate::tgc::{reg_feature_l2, reg_weight_l1, TgcFeatures, TgcLayer};

const FD_STEP: f64 = 1e-5;

/// One verified gradient path.
#[derive(Debug, Clone)]
pub struct SuiteComponent<F> {
    pub name: &'static str,
    pub max_rel_err: F,
}

/// Worst relative error per component for one suite run.
#[derive(Debug, Clone)]
pub struct SuiteReport<F> {
    pub components: Vec<SuiteComponent<F>>,
}

impl<F: Scalar> SuiteReport<F> {
    pub fn max_rel_err(&self) -> F {
        self.components
            .iter()
            .map(|c| c.max_rel_err)
            .fold(F::zero(), |a, b| a.max(b))
    }

    pub fn passes(&self, tolerance: F) -> bool {
        self.max_rel_err() < tolerance
    }
}

/// Random connected graph with random edge lengths and a random reachability
/// horizon: ring backbone plus a few chords.
fn random_matrices<F: Scalar>(n: usize, k: usize, rng: &mut ChaCha8Rng) -> Result<GraphMatrices<F>> {
    let mut edges = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for i in 0..n {
        let j = (i + 1) % n;
        seen.insert((i.min(j), i.max(j)));
        edges.push(Edge {
            a: i,
            b: j,
            length_miles: F::c(rng.random_range(0.5..2.0)),
        });
    }
    for _ in 0..n / 2 {
        let a = rng.random_range(0..n);
        let b = rng.random_range(0..n);
        if a != b && seen.insert((a.min(b), a.max(b))) {
            edges.push(Edge {
                a,
                b,
                length_miles: F::c(rng.random_range(0.5..2.0)),
            });
        }
    }
    let graph = TrafficGraph::new(n, edges, NodeSpeeds::Uniform(F::c(60.0)))?;
    let horizon = rng.random_range(1..=3);
    build_graph_matrices(&graph, k, horizon, F::c(5.0))
}

/// Uniform magnitude in [0.05, 0.5] with random sign: far enough from zero
/// that the central difference never crosses the |w| kink of the L1 term.
fn away_from_zero<F: Scalar>(rng: &mut ChaCha8Rng) -> F {
    let magnitude = 0.05 + 0.45 * rng.random::<f64>();
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    F::c(sign * magnitude)
}

fn randomize_params<F: Scalar>(model: &mut Model<F>, rng: &mut ChaCha8Rng) -> Result<()> {
    let count = model.param_vector().len();
    let values: Vec<F> = (0..count).map(|_| away_from_zero(rng)).collect();
    model.set_param_vector(&values)
}

fn random_window<F: Scalar>(t: usize, n: usize, rng: &mut ChaCha8Rng) -> DenseMatrix<F> {
    DenseMatrix::from_fn(t, n, |_, _| F::c(rng.random_range(0.05..0.95)))
}

fn random_vec<F: Scalar>(len: usize, rng: &mut ChaCha8Rng) -> Vec<F> {
    (0..len).map(|_| F::c(rng.random_range(0.1..0.9))).collect()
}

fn check_masked_linear<F: Scalar>(rng: &mut ChaCha8Rng) -> Result<SuiteComponent<F>> {
    let n = 5;
    let mask = Arc::new(SupportMask::from_values(
        1,
        BoolMatrix::from_fn(n, n, |i, j| i == j || rng.random::<bool>()),
    ));
    let value = DenseMatrix::from_fn(n, n, |_, _| away_from_zero::<F>(rng));
    let mut param = Parameter::from_matrix("w", value, Some(mask));
    let x = random_vec::<F>(n, rng);
    let weight_on_output = random_vec::<F>(n, rng);

    masked_linear_backward(&mut param, &x, &weight_on_output)?;
    let theta: Vec<F> = param.value.as_slice().to_vec();
    let analytic: Vec<F> = param.grad.as_slice().to_vec();
    let base = param.clone();
    let report = fd_gradient_check(&theta, &analytic, F::c(FD_STEP), move |v| {
        let mut probe = base.clone();
        probe.value.as_mut_slice().copy_from_slice(v);
        let y = masked_linear_forward(&probe, &x)?;
        Ok(y.iter().zip(&weight_on_output).map(|(&a, &b)| a * b).sum())
    })?;
    Ok(SuiteComponent {
        name: "masked-linear",
        max_rel_err: report.max_rel_err,
    })
}

fn layer_theta<F: Scalar>(layer: &TgcLayer<F>) -> Vec<F> {
    layer
        .weights()
        .iter()
        .flat_map(|w| w.value.as_slice().iter().copied())
        .collect()
}

fn layer_set_theta<F: Scalar>(layer: &mut TgcLayer<F>, values: &[F]) {
    let mut cursor = 0;
    for w in layer.weights_mut() {
        let len = w.len();
        w.value.as_mut_slice().copy_from_slice(&values[cursor..cursor + len]);
        cursor += len;
    }
}

fn check_tgc<F: Scalar>(
    matrices: &GraphMatrices<F>,
    rng: &mut ChaCha8Rng,
) -> Result<[SuiteComponent<F>; 2]> {
    let masks: Vec<Arc<SupportMask>> = matrices.masks.iter().cloned().map(Arc::new).collect();
    let mut layer = TgcLayer::new(masks, rng)?;
    let n = layer.node_count();
    let randomized: Vec<F> = (0..layer_theta(&layer).len()).map(|_| away_from_zero(rng)).collect();
    layer_set_theta(&mut layer, &randomized);
    let x = random_vec::<F>(n, rng);
    let upstream = random_vec::<F>(layer.order() * n, rng);

    let dx = layer.backward(&x, &upstream)?;
    let analytic_w: Vec<F> = layer
        .weights()
        .iter()
        .flat_map(|w| w.grad.as_slice().iter().copied())
        .collect();

    let theta = layer_theta(&layer);
    let base = layer.clone();
    let x_for_weights = x.clone();
    let upstream_for_weights = upstream.clone();
    let weights_report = fd_gradient_check(&theta, &analytic_w, F::c(FD_STEP), move |v| {
        let mut probe = base.clone();
        layer_set_theta(&mut probe, v);
        let features = probe.forward(&x_for_weights)?;
        Ok(features
            .flat()
            .iter()
            .zip(&upstream_for_weights)
            .map(|(&a, &b)| a * b)
            .sum())
    })?;

    let base = layer.clone();
    let inputs_report = fd_gradient_check(&x, &dx, F::c(FD_STEP), move |v| {
        let features = base.forward(v)?;
        Ok(features.flat().iter().zip(&upstream).map(|(&a, &b)| a * b).sum())
    })?;

    Ok([
        SuiteComponent {
            name: "tgc-weights",
            max_rel_err: weights_report.max_rel_err,
        },
        SuiteComponent {
            name: "tgc-inputs",
            max_rel_err: inputs_report.max_rel_err,
        },
    ])
}

fn check_regularizers<F: Scalar>(
    matrices: &GraphMatrices<F>,
    rng: &mut ChaCha8Rng,
) -> Result<[SuiteComponent<F>; 2]> {
    let masks: Vec<Arc<SupportMask>> = matrices.masks.iter().cloned().map(Arc::new).collect();
    let mut layer = TgcLayer::new(masks, rng)?;
    let randomized: Vec<F> = (0..layer_theta(&layer).len()).map(|_| away_from_zero(rng)).collect();
    layer_set_theta(&mut layer, &randomized);

    // weight L1 over the masked support
    let (_, subgrads) = reg_weight_l1(&layer);
    let analytic: Vec<F> = subgrads.iter().flat_map(|m| m.as_slice().iter().copied()).collect();
    let theta = layer_theta(&layer);
    let base = layer.clone();
    let l1_report = fd_gradient_check(&theta, &analytic, F::c(FD_STEP), move |v| {
        let mut probe = base.clone();
        layer_set_theta(&mut probe, v);
        Ok(reg_weight_l1(&probe).0)
    })?;

    // feature consistency penalty at a random (nonzero) feature point
    let n = layer.node_count();
    let flat = random_vec::<F>(layer.order().max(2) * n, rng);
    let features = TgcFeatures::from_flat(n, flat.clone())?;
    let (_, grad) = reg_feature_l2(&features);
    let l2_report = fd_gradient_check(&flat, &grad, F::c(FD_STEP), move |v| {
        let f = TgcFeatures::from_flat(n, v.to_vec())?;
        Ok(reg_feature_l2(&f).0)
    })?;

    Ok([
        SuiteComponent {
            name: "reg-weight-l1",
            max_rel_err: l1_report.max_rel_err,
        },
        SuiteComponent {
            name: "reg-feature-l2",
            max_rel_err: l2_report.max_rel_err,
        },
    ])
}

/// FD over the parameters of any model against the training objective.
fn check_model_params<F: Scalar>(
    name: &'static str,
    model: &Model<F>,
    window: &DenseMatrix<F>,
    target: &[F],
    lambda1: F,
    lambda2: F,
) -> Result<SuiteComponent<F>> {
    let mut scored = model.clone();
    scored.zero_grads();
    scored.accumulate_gradients(window, target, lambda1, lambda2)?;
    let analytic = scored.grad_vector();
    let theta = scored.param_vector();
    let base = model.clone();
    let window = window.clone();
    let target = target.to_vec();
    let report = fd_gradient_check(&theta, &analytic, F::c(FD_STEP), move |v| {
        let mut probe = base.clone();
        probe.set_param_vector(v)?;
        probe.regularized_loss(&window, &target, lambda1, lambda2)
    })?;
    Ok(SuiteComponent {
        name,
        max_rel_err: report.max_rel_err,
    })
}

fn check_tgc_lstm_inputs<F: Scalar>(
    model: &Model<F>,
    window: &DenseMatrix<F>,
) -> Result<SuiteComponent<F>> {
    let cell = match model {
        Model::TgcLstm(m) => m.clone(),
        _ => unreachable!("caller passes a tgc-lstm"),
    };
    let mut scored = cell.clone();
    let (h, tape) = scored.forward_sequence(window)?;
    let dh: Vec<F> = h.iter().map(|&v| F::c(2.0) * v).collect();
    let dx = scored.backward_sequence(tape, &dh, None)?;
    let analytic: Vec<F> = dx.into_iter().flatten().collect();
    let flat: Vec<F> = (0..window.rows()).flat_map(|t| window.row(t).to_vec()).collect();
    let (rows, cols) = window.shape();
    let report = fd_gradient_check(&flat, &analytic, F::c(FD_STEP), move |v| {
        let probe_window = DenseMatrix::from_vec(rows, cols, v.to_vec())?;
        let (h, _) = cell.forward_sequence(&probe_window)?;
        Ok(h.iter().map(|&x| x * x).sum())
    })?;
    Ok(SuiteComponent {
        name: "tgc-lstm-inputs",
        max_rel_err: report.max_rel_err,
    })
}

/// Runs the whole suite at problem size (n, k, t) for one seed.
pub fn run_suite<F: Scalar>(n: usize, k: usize, t: usize, seed: u64) -> Result<SuiteReport<F>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let matrices = random_matrices::<F>(n, k, &mut rng)?;
    let mut components = Vec::new();

    components.push(check_masked_linear::<F>(&mut rng)?);
    components.extend(check_tgc(&matrices, &mut rng)?);
    components.extend(check_regularizers(&matrices, &mut rng)?);

    let window = random_window::<F>(t, n, &mut rng);
    let target = random_vec::<F>(n, &mut rng);

    let mut tgc_lstm = Model::<F>::build(ModelKind::TgcLstm, &matrices, seed)?;
    randomize_params(&mut tgc_lstm, &mut rng)?;
    components.push(check_model_params(
        "tgc-lstm-params",
        &tgc_lstm,
        &window,
        &target,
        F::zero(),
        F::zero(),
    )?);
    components.push(check_tgc_lstm_inputs(&tgc_lstm, &window)?);
    components.push(check_model_params(
        "total-loss",
        &tgc_lstm,
        &window,
        &target,
        F::c(0.01),
        F::c(0.01),
    )?);

    let mut vanilla = Model::<F>::build(ModelKind::Lstm, &matrices, seed)?;
    randomize_params(&mut vanilla, &mut rng)?;
    components.push(check_model_params(
        "vanilla-lstm-params",
        &vanilla,
        &window,
        &target,
        F::zero(),
        F::zero(),
    )?);

    let mut lsgc = Model::<F>::build(ModelKind::LsgcLstm, &matrices, seed)?;
    randomize_params(&mut lsgc, &mut rng)?;
    components.push(check_model_params(
        "lsgc-lstm-params",
        &lsgc,
        &window,
        &target,
        F::zero(),
        F::zero(),
    )?);

    Ok(SuiteReport { components })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_passes_at_default_size() {
        let report = run_suite::<f64>(5, 2, 3, 1).unwrap();
        assert!(
            report.passes(1e-4),
            "max err {} at {:?}",
            report.max_rel_err(),
            report
                .components
                .iter()
                .max_by(|a, b| a.max_rel_err.partial_cmp(&b.max_rel_err).unwrap())
                .map(|c| c.name)
        );
        assert_eq!(report.components.len(), 10);
    }

    #[test]
    fn every_backward_op_passes_on_twenty_seeds() {
        for seed in 1..=20u64 {
            let report = run_suite::<f64>(4, 2, 2, seed).unwrap();
            assert!(report.passes(1e-4), "seed {seed}: {}", report.max_rel_err());
        }
    }
}
