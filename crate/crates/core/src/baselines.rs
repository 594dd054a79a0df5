//! Baseline forecasters: a vanilla LSTM and a localized spectral graph
//! convolution (LSGC) layer stacked under an LSTM.
//!
//! The vanilla cell is the TGC-LSTM with the graph convolution replaced by
//! the raw signal and the neighborhood cell-state gate replaced by the plain
//! previous cell state. The LSGC layer computes
//! `sum_{j=0..K-1} theta_j L^j x` over precomputed powers of the graph
//! Laplacian, so its receptive field is exactly the (K-1)-hop neighborhood.

use rand::Rng;

use crate::error::{Error, Result};
use crate::graph::AdjacencyMatrix;
use crate::lstm::{CoreStepTape, LstmCore, LstmState};
use crate::matrix::DenseMatrix;
use crate::param::Parameter;
use crate::scalar::Scalar;

/// Combinatorial graph Laplacian `L = D - A`.
pub fn laplacian<F: Scalar>(adjacency: &AdjacencyMatrix) -> DenseMatrix<F> {
    let n = adjacency.node_count();
    let degrees = adjacency.degrees();
    DenseMatrix::from_fn(n, n, |i, j| {
        if i == j {
            F::from_usize(degrees[i]).expect("degree fits scalar")
        } else if adjacency.values().get(i, j) {
            -F::one()
        } else {
            F::zero()
        }
    })
}

/// Localized spectral graph convolution with K scalar coefficients over the
/// Laplacian powers `L^0 .. L^(K-1)`.
#[derive(Debug, Clone)]
pub struct LsgcLayer<F> {
    theta: Parameter<F>,
    powers: Vec<DenseMatrix<F>>,
}

/// Retained per-step projections `L^j x` for the backward pass.
#[derive(Debug, Clone)]
pub struct LsgcTape<F> {
    projected: Vec<Vec<F>>,
}

impl<F: Scalar> LsgcLayer<F> {
    pub fn new(laplacian: &DenseMatrix<F>, order: usize, rng: &mut impl Rng) -> Result<Self> {
        if order == 0 {
            return Err(Error::InvalidArgument("LSGC order must be >= 1".into()));
        }
        if laplacian.rows() != laplacian.cols() {
            return Err(Error::shape(
                "lsgc",
                "square Laplacian".to_string(),
                format!("{}x{}", laplacian.rows(), laplacian.cols()),
            ));
        }
        let n = laplacian.rows();
        let mut powers = Vec::with_capacity(order);
        powers.push(DenseMatrix::identity(n));
        for j in 1..order {
            powers.push(powers[j - 1].matmul(laplacian)?);
        }
        let theta = Parameter::uniform("theta", order, 1, order, rng, None);
        Ok(LsgcLayer { theta, powers })
    }

    pub(crate) fn from_parts(theta: Parameter<F>, powers: Vec<DenseMatrix<F>>) -> Result<Self> {
        if theta.rows() != powers.len() || theta.cols() != 1 || powers.is_empty() {
            return Err(Error::Checkpoint(format!(
                "LSGC coefficients ({}x{}) do not match {} Laplacian powers",
                theta.rows(),
                theta.cols(),
                powers.len()
            )));
        }
        Ok(LsgcLayer { theta, powers })
    }

    pub fn order(&self) -> usize {
        self.powers.len()
    }

    pub fn node_count(&self) -> usize {
        self.powers[0].rows()
    }

    pub fn coefficients(&self) -> &Parameter<F> {
        &self.theta
    }

    pub fn coefficients_mut(&mut self) -> &mut Parameter<F> {
        &mut self.theta
    }

    pub(crate) fn powers(&self) -> &[DenseMatrix<F>] {
        &self.powers
    }

    /// `y = sum_j theta_j L^j x`.
    pub fn forward(&self, x: &[F]) -> Result<(Vec<F>, LsgcTape<F>)> {
        let n = self.node_count();
        if x.len() != n {
            return Err(Error::shape("lsgc_forward", format!("{n}"), format!("{}", x.len())));
        }
        let mut out = vec![F::zero(); n];
        let mut projected = Vec::with_capacity(self.order());
        for (j, power) in self.powers.iter().enumerate() {
            let lx = power.matvec(x)?;
            let theta_j = self.theta.value.get(j, 0);
            for (o, &v) in out.iter_mut().zip(&lx) {
                *o = *o + theta_j * v;
            }
            projected.push(lx);
        }
        Ok((out, LsgcTape { projected }))
    }

    /// Backward: `d theta_j = (L^j x) . g`, returns `dx = sum_j theta_j (L^j)^T g`.
    pub fn backward(&mut self, tape: &LsgcTape<F>, upstream: &[F]) -> Result<Vec<F>> {
        let n = self.node_count();
        if upstream.len() != n {
            return Err(Error::shape("lsgc_backward", format!("{n}"), format!("{}", upstream.len())));
        }
        let mut dx = vec![F::zero(); n];
        for (j, power) in self.powers.iter().enumerate() {
            let dot: F = tape.projected[j].iter().zip(upstream).map(|(&a, &b)| a * b).sum();
            let g = self.theta.grad.get(j, 0);
            self.theta.grad.set(j, 0, g + dot);
            let theta_j = self.theta.value.get(j, 0);
            let back = power.matvec_t(upstream)?;
            for (d, &v) in dx.iter_mut().zip(&back) {
                *d = *d + theta_j * v;
            }
        }
        Ok(dx)
    }
}

/// Standard LSTM over the raw node signal.
#[derive(Debug, Clone)]
pub struct VanillaLstm<F> {
    core: LstmCore<F>,
}

/// Forward tape of a vanilla LSTM sequence; moved into the backward pass.
#[derive(Debug, Clone)]
pub struct VanillaLstmTape<F> {
    steps: Vec<CoreStepTape<F>>,
}

impl<F: Scalar> VanillaLstm<F> {
    pub fn new(n: usize, rng: &mut impl Rng) -> Self {
        VanillaLstm {
            core: LstmCore::new(n, n, rng),
        }
    }

    pub(crate) fn from_core(core: LstmCore<F>) -> Result<Self> {
        if core.input_dim != core.n {
            return Err(Error::shape(
                "vanilla_lstm",
                format!("{0}x{0} input weights", core.n),
                format!("{}x{}", core.n, core.input_dim),
            ));
        }
        Ok(VanillaLstm { core })
    }

    pub fn node_count(&self) -> usize {
        self.core.n
    }

    pub(crate) fn params(&self) -> Vec<&Parameter<F>> {
        self.core.params()
    }

    pub(crate) fn params_mut(&mut self) -> Vec<&mut Parameter<F>> {
        self.core.params_mut()
    }

    /// One step: gates over `x_t` and `h_{t-1}`, cell state carried straight
    /// through (`C*_{t-1} = C_{t-1}`).
    pub fn cell_step(&self, x: &[F], prev: &LstmState<F>) -> Result<(LstmState<F>, CoreStepTape<F>)> {
        self.core.step(x, &prev.h, &prev.c, 0)
    }

    pub fn forward_sequence(&self, window: &DenseMatrix<F>) -> Result<(Vec<F>, VanillaLstmTape<F>)> {
        let n = self.core.n;
        if window.rows() == 0 || window.cols() != n {
            return Err(Error::shape(
                "forward_sequence",
                format!("T>=1 x {n}"),
                format!("{}x{}", window.rows(), window.cols()),
            ));
        }
        let mut state = LstmState::zeros(n);
        let mut steps = Vec::with_capacity(window.rows());
        for t in 0..window.rows() {
            let (next, tape) = self.core.step(window.row(t), &state.h, &state.c, t)?;
            steps.push(tape);
            state = next;
        }
        Ok((state.h, VanillaLstmTape { steps }))
    }

    pub fn backward_sequence(&mut self, tape: VanillaLstmTape<F>, d_h_last: &[F]) -> Result<Vec<Vec<F>>> {
        let n = self.core.n;
        if d_h_last.len() != n {
            return Err(Error::shape("backward_sequence", format!("{n}"), format!("{}", d_h_last.len())));
        }
        let steps = tape.steps;
        let mut dh = d_h_last.to_vec();
        let mut dc = vec![F::zero(); n];
        let mut dx_all = vec![Vec::new(); steps.len()];
        for (t, step) in steps.iter().enumerate().rev() {
            let grads = self.core.step_backward(step, &dh, &dc)?;
            dx_all[t] = grads.d_input;
            dh = grads.d_h_prev;
            dc = grads.d_c_star; // plain cell state: dC_{t-1} = dC*
        }
        Ok(dx_all)
    }
}

/// LSGC layer feeding a vanilla LSTM, trained end to end.
#[derive(Debug, Clone)]
pub struct LsgcLstm<F> {
    lsgc: LsgcLayer<F>,
    core: LstmCore<F>,
}

#[derive(Debug, Clone)]
pub struct LsgcLstmTape<F> {
    steps: Vec<(LsgcTape<F>, CoreStepTape<F>)>,
}

impl<F: Scalar> LsgcLstm<F> {
    pub fn new(adjacency: &AdjacencyMatrix, order: usize, rng: &mut impl Rng) -> Result<Self> {
        let lap = laplacian::<F>(adjacency);
        let lsgc = LsgcLayer::new(&lap, order, rng)?;
        let n = lsgc.node_count();
        let core = LstmCore::new(n, n, rng);
        Ok(LsgcLstm { lsgc, core })
    }

    pub(crate) fn from_parts(lsgc: LsgcLayer<F>, core: LstmCore<F>) -> Result<Self> {
        if core.n != lsgc.node_count() || core.input_dim != lsgc.node_count() {
            return Err(Error::shape(
                "lsgc_lstm",
                format!("{0} nodes", lsgc.node_count()),
                format!("core {}x{}", core.n, core.input_dim),
            ));
        }
        Ok(LsgcLstm { lsgc, core })
    }

    pub fn node_count(&self) -> usize {
        self.core.n
    }

    pub fn lsgc(&self) -> &LsgcLayer<F> {
        &self.lsgc
    }

    pub fn lsgc_mut(&mut self) -> &mut LsgcLayer<F> {
        &mut self.lsgc
    }

    pub(crate) fn params(&self) -> Vec<&Parameter<F>> {
        let mut all = vec![self.lsgc.coefficients()];
        all.extend(self.core.params());
        all
    }

    pub(crate) fn params_mut(&mut self) -> Vec<&mut Parameter<F>> {
        let mut all = vec![&mut self.lsgc.theta];
        all.extend(self.core.params_mut());
        all
    }

    pub fn forward_sequence(&self, window: &DenseMatrix<F>) -> Result<(Vec<F>, LsgcLstmTape<F>)> {
        let n = self.core.n;
        if window.rows() == 0 || window.cols() != n {
            return Err(Error::shape(
                "forward_sequence",
                format!("T>=1 x {n}"),
                format!("{}x{}", window.rows(), window.cols()),
            ));
        }
        let mut state = LstmState::zeros(n);
        let mut steps = Vec::with_capacity(window.rows());
        for t in 0..window.rows() {
            let (z, lsgc_tape) = self.lsgc.forward(window.row(t))?;
            let (next, core_tape) = self.core.step(&z, &state.h, &state.c, t)?;
            steps.push((lsgc_tape, core_tape));
            state = next;
        }
        Ok((state.h, LsgcLstmTape { steps }))
    }

    pub fn backward_sequence(&mut self, tape: LsgcLstmTape<F>, d_h_last: &[F]) -> Result<Vec<Vec<F>>> {
        let n = self.core.n;
        if d_h_last.len() != n {
            return Err(Error::shape("backward_sequence", format!("{n}"), format!("{}", d_h_last.len())));
        }
        let steps = tape.steps;
        let mut dh = d_h_last.to_vec();
        let mut dc = vec![F::zero(); n];
        let mut dx_all = vec![Vec::new(); steps.len()];
        for (t, (lsgc_tape, core_tape)) in steps.iter().enumerate().rev() {
            let grads = self.core.step_backward(core_tape, &dh, &dc)?;
            dx_all[t] = self.lsgc.backward(lsgc_tape, &grads.d_input)?;
            dh = grads.d_h_prev;
            dc = grads.d_c_star;
        }
        Ok(dx_all)
    }
}
