//! The traffic graph convolutional LSTM cell and its sequence forward /
//! backward passes.
//!
//! The cell follows the usual gated recurrence with two changes: the input
//! at each step is the flattened multi-hop TGC feature vector instead of the
//! raw signal, and the previous cell state passes through a masked
//! neighborhood gate `C*_{t-1} = (W_N ⊙ Ahat^K ⊙ FFR) C_{t-1}` before the
//! forget gate mixes it in, so each node's memory is blended with its
//! reachable neighbors' memories.
//!
//! The backward pass is hand-rolled reverse-mode differentiation through the
//! unrolled sequence. Tapes are consumed by value, so a tape can never be
//! replayed against parameters it no longer matches.

use std::sync::Arc;

use rand::Rng;

use crate::activation::{sigmoid_grad_from_output, sigmoid_slice, tanh_grad_from_output, tanh_slice};
use crate::error::{Error, Result};
use crate::graph::SupportMask;
use crate::matrix::DenseMatrix;
use crate::param::{masked_linear_backward, masked_linear_forward, Parameter};
use crate::scalar::Scalar;
use crate::tgc::TgcLayer;

/// Hidden and cell state vectors, both length N.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmState<F> {
    pub h: Vec<F>,
    pub c: Vec<F>,
}

impl<F: Scalar> LstmState<F> {
    pub fn zeros(n: usize) -> Self {
        LstmState {
            h: vec![F::zero(); n],
            c: vec![F::zero(); n],
        }
    }
}

fn ew_mul<F: Scalar>(a: &[F], b: &[F]) -> Vec<F> {
    a.iter().zip(b).map(|(&x, &y)| x * y).collect()
}

fn add_assign<F: Scalar>(acc: &mut [F], rhs: &[F]) {
    for (a, &b) in acc.iter_mut().zip(rhs) {
        *a = *a + b;
    }
}

fn check_finite<F: Scalar>(values: &[F], what: &str, t: usize) -> Result<()> {
    if values.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(format!("{what} at time step {}", t + 1)))
    }
}

/// The four-gate LSTM core shared by every recurrent model in this crate.
/// `input_dim` is N for the vanilla cell and K*N for the TGC cell.
#[derive(Debug, Clone)]
pub(crate) struct LstmCore<F> {
    pub n: usize,
    pub input_dim: usize,
    pub w_f: Parameter<F>,
    pub w_i: Parameter<F>,
    pub w_o: Parameter<F>,
    pub w_c: Parameter<F>,
    pub u_f: Parameter<F>,
    pub u_i: Parameter<F>,
    pub u_o: Parameter<F>,
    pub u_c: Parameter<F>,
    pub b_f: Parameter<F>,
    pub b_i: Parameter<F>,
    pub b_o: Parameter<F>,
    pub b_c: Parameter<F>,
}

/// Per-step intermediates retained for the backward pass. Opaque outside
/// the crate; consumed by the matching backward call.
#[derive(Debug, Clone)]
pub struct CoreStepTape<F> {
    pub(crate) input: Vec<F>,
    pub(crate) h_prev: Vec<F>,
    pub(crate) c_star: Vec<F>,
    pub(crate) f: Vec<F>,
    pub(crate) i: Vec<F>,
    pub(crate) o: Vec<F>,
    pub(crate) c_tilde: Vec<F>,
    pub(crate) tanh_c: Vec<F>,
}

/// Gradients a core step hands back to its caller.
pub(crate) struct CoreStepGrads<F> {
    pub d_input: Vec<F>,
    pub d_h_prev: Vec<F>,
    pub d_c_star: Vec<F>,
}

impl<F: Scalar> LstmCore<F> {
    pub fn new(n: usize, input_dim: usize, rng: &mut impl Rng) -> Self {
        // Parameters are drawn in declaration order so a fixed seed yields a
        // fixed model.
        let w_f = Parameter::uniform("w_f", n, input_dim, input_dim, rng, None);
        let w_i = Parameter::uniform("w_i", n, input_dim, input_dim, rng, None);
        let w_o = Parameter::uniform("w_o", n, input_dim, input_dim, rng, None);
        let w_c = Parameter::uniform("w_c", n, input_dim, input_dim, rng, None);
        let u_f = Parameter::uniform("u_f", n, n, n, rng, None);
        let u_i = Parameter::uniform("u_i", n, n, n, rng, None);
        let u_o = Parameter::uniform("u_o", n, n, n, rng, None);
        let u_c = Parameter::uniform("u_c", n, n, n, rng, None);
        LstmCore {
            n,
            input_dim,
            w_f,
            w_i,
            w_o,
            w_c,
            u_f,
            u_i,
            u_o,
            u_c,
            b_f: Parameter::zeros("b_f", n, 1),
            b_i: Parameter::zeros("b_i", n, 1),
            b_o: Parameter::zeros("b_o", n, 1),
            b_c: Parameter::zeros("b_c", n, 1),
        }
    }

    /// Reassembles a core from checkpointed parameters, in the canonical
    /// order produced by [`LstmCore::params`].
    pub fn from_params(params: Vec<Parameter<F>>) -> Result<Self> {
        let mut it = params.into_iter();
        let mut next = |expected: &str| -> Result<Parameter<F>> {
            let p = it
                .next()
                .ok_or_else(|| Error::Checkpoint(format!("missing parameter {expected}")))?;
            if p.name != expected {
                return Err(Error::Checkpoint(format!(
                    "expected parameter {expected}, found {}",
                    p.name
                )));
            }
            Ok(p)
        };
        let w_f = next("w_f")?;
        let w_i = next("w_i")?;
        let w_o = next("w_o")?;
        let w_c = next("w_c")?;
        let u_f = next("u_f")?;
        let u_i = next("u_i")?;
        let u_o = next("u_o")?;
        let u_c = next("u_c")?;
        let b_f = next("b_f")?;
        let b_i = next("b_i")?;
        let b_o = next("b_o")?;
        let b_c = next("b_c")?;
        let n = u_f.rows();
        let input_dim = w_f.cols();
        let core = LstmCore {
            n,
            input_dim,
            w_f,
            w_i,
            w_o,
            w_c,
            u_f,
            u_i,
            u_o,
            u_c,
            b_f,
            b_i,
            b_o,
            b_c,
        };
        core.validate_shapes()?;
        Ok(core)
    }

    fn validate_shapes(&self) -> Result<()> {
        let n = self.n;
        let d = self.input_dim;
        for w in [&self.w_f, &self.w_i, &self.w_o, &self.w_c] {
            if w.value.shape() != (n, d) {
                return Err(Error::shape("lstm_core", format!("{n}x{d}"), format!("{:?}", w.value.shape())));
            }
        }
        for u in [&self.u_f, &self.u_i, &self.u_o, &self.u_c] {
            if u.value.shape() != (n, n) {
                return Err(Error::shape("lstm_core", format!("{n}x{n}"), format!("{:?}", u.value.shape())));
            }
        }
        for b in [&self.b_f, &self.b_i, &self.b_o, &self.b_c] {
            if b.value.shape() != (n, 1) {
                return Err(Error::shape("lstm_core", format!("{n}x1"), format!("{:?}", b.value.shape())));
            }
        }
        Ok(())
    }

    pub fn params(&self) -> Vec<&Parameter<F>> {
        vec![
            &self.w_f, &self.w_i, &self.w_o, &self.w_c, &self.u_f, &self.u_i, &self.u_o,
            &self.u_c, &self.b_f, &self.b_i, &self.b_o, &self.b_c,
        ]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Parameter<F>> {
        vec![
            &mut self.w_f, &mut self.w_i, &mut self.w_o, &mut self.w_c, &mut self.u_f,
            &mut self.u_i, &mut self.u_o, &mut self.u_c, &mut self.b_f, &mut self.b_i,
            &mut self.b_o, &mut self.b_c,
        ]
    }

    fn gate_preactivation(
        &self,
        w: &Parameter<F>,
        u: &Parameter<F>,
        b: &Parameter<F>,
        input: &[F],
        h_prev: &[F],
    ) -> Result<Vec<F>> {
        let mut a = w.value.matvec(input)?;
        let rec = u.value.matvec(h_prev)?;
        for ((ai, &ri), &bi) in a.iter_mut().zip(&rec).zip(b.value.as_slice()) {
            *ai = *ai + ri + bi;
        }
        Ok(a)
    }

    /// One gated step. `c_star` is the (possibly neighborhood-mixed)
    /// previous cell state that the forget gate applies to.
    pub fn step(
        &self,
        input: &[F],
        h_prev: &[F],
        c_star: &[F],
        t: usize,
    ) -> Result<(LstmState<F>, CoreStepTape<F>)> {
        if input.len() != self.input_dim || h_prev.len() != self.n || c_star.len() != self.n {
            return Err(Error::shape(
                "lstm_step",
                format!("input {}, state {}", self.input_dim, self.n),
                format!("input {}, h {}, c* {}", input.len(), h_prev.len(), c_star.len()),
            ));
        }
        let f = sigmoid_slice(&self.gate_preactivation(&self.w_f, &self.u_f, &self.b_f, input, h_prev)?);
        check_finite(&f, "forget gate", t)?;
        let i = sigmoid_slice(&self.gate_preactivation(&self.w_i, &self.u_i, &self.b_i, input, h_prev)?);
        check_finite(&i, "input gate", t)?;
        let o = sigmoid_slice(&self.gate_preactivation(&self.w_o, &self.u_o, &self.b_o, input, h_prev)?);
        check_finite(&o, "output gate", t)?;
        let c_tilde = tanh_slice(&self.gate_preactivation(&self.w_c, &self.u_c, &self.b_c, input, h_prev)?);
        check_finite(&c_tilde, "input cell state", t)?;

        let mut c = ew_mul(&f, c_star);
        add_assign(&mut c, &ew_mul(&i, &c_tilde));
        check_finite(&c, "cell state", t)?;
        let tanh_c = tanh_slice(&c);
        let h = ew_mul(&o, &tanh_c);

        let tape = CoreStepTape {
            input: input.to_vec(),
            h_prev: h_prev.to_vec(),
            c_star: c_star.to_vec(),
            f,
            i,
            o,
            c_tilde,
            tanh_c,
        };
        Ok((LstmState { h, c }, tape))
    }

    /// Reverse-mode step. `dh` is the loss gradient reaching h_t, `dc` the
    /// gradient reaching C_t from the following step. Parameter gradients
    /// accumulate in place.
    pub fn step_backward(
        &mut self,
        tape: &CoreStepTape<F>,
        dh: &[F],
        dc_in: &[F],
    ) -> Result<CoreStepGrads<F>> {
        let do_gate = ew_mul(dh, &tape.tanh_c);
        // dC_t = dc_in + dh ⊙ o ⊙ tanh'(C_t)
        let mut dc = dc_in.to_vec();
        for ((d, (&dhi, &oi)), &th) in dc.iter_mut().zip(dh.iter().zip(&tape.o)).zip(&tape.tanh_c) {
            *d = *d + dhi * oi * tanh_grad_from_output(th);
        }
        let df = ew_mul(&dc, &tape.c_star);
        let d_c_star = ew_mul(&dc, &tape.f);
        let di = ew_mul(&dc, &tape.c_tilde);
        let dct = ew_mul(&dc, &tape.i);

        let da_f: Vec<F> = df.iter().zip(&tape.f).map(|(&d, &y)| d * sigmoid_grad_from_output(y)).collect();
        let da_i: Vec<F> = di.iter().zip(&tape.i).map(|(&d, &y)| d * sigmoid_grad_from_output(y)).collect();
        let da_o: Vec<F> = do_gate.iter().zip(&tape.o).map(|(&d, &y)| d * sigmoid_grad_from_output(y)).collect();
        let da_c: Vec<F> = dct.iter().zip(&tape.c_tilde).map(|(&d, &y)| d * tanh_grad_from_output(y)).collect();

        let mut d_input = vec![F::zero(); self.input_dim];
        let mut d_h_prev = vec![F::zero(); self.n];
        for (w, u, b, da) in [
            (&mut self.w_f, &mut self.u_f, &mut self.b_f, &da_f),
            (&mut self.w_i, &mut self.u_i, &mut self.b_i, &da_i),
            (&mut self.w_o, &mut self.u_o, &mut self.b_o, &da_o),
            (&mut self.w_c, &mut self.u_c, &mut self.b_c, &da_c),
        ] {
            w.grad.add_outer_assign(da, &tape.input, None)?;
            u.grad.add_outer_assign(da, &tape.h_prev, None)?;
            add_assign(b.grad.as_mut_slice(), da);
            add_assign(&mut d_input, &w.value.matvec_t(da)?);
            add_assign(&mut d_h_prev, &u.value.matvec_t(da)?);
        }
        Ok(CoreStepGrads {
            d_input,
            d_h_prev,
            d_c_star,
        })
    }
}

/// The TGC-LSTM cell: a TGC layer feeding the gates plus the masked
/// neighborhood cell-state gate `W_N`.
#[derive(Debug, Clone)]
pub struct TgcLstm<F> {
    tgc: TgcLayer<F>,
    w_n: Parameter<F>,
    core: LstmCore<F>,
}

/// One retained step of a TGC-LSTM forward pass.
#[derive(Debug, Clone)]
pub struct TgcStepTape<F> {
    x: Vec<F>,
    c_prev: Vec<F>,
    core: CoreStepTape<F>,
}

/// Tape of a whole forward sequence; consumed (moved) by the backward pass.
#[derive(Debug, Clone)]
pub struct TgcLstmTape<F> {
    steps: Vec<TgcStepTape<F>>,
}

impl<F: Scalar> TgcLstmTape<F> {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// The TGC features of the final step, flattened hop-major.
    pub fn final_features(&self) -> &[F] {
        &self.steps.last().expect("tape has at least one step").core.input
    }
}

impl<F: Scalar> TgcLstm<F> {
    /// Builds a cell over the hop-ordered support masks. The highest-order
    /// mask also constrains the cell-state gate, whose weights start as ones
    /// on the support.
    pub fn new(masks: Vec<Arc<SupportMask>>, rng: &mut impl Rng) -> Result<Self> {
        let tgc = TgcLayer::new(masks, rng)?;
        let n = tgc.node_count();
        let k = tgc.order();
        let top_mask = Arc::clone(tgc.masks().last().expect("at least one mask"));
        let w_n = Parameter::ones_on_support("w_n", top_mask);
        let core = LstmCore::new(n, k * n, rng);
        Ok(TgcLstm { tgc, w_n, core })
    }

    pub(crate) fn from_parts(tgc: TgcLayer<F>, w_n: Parameter<F>, core: LstmCore<F>) -> Result<Self> {
        let n = tgc.node_count();
        if w_n.value.shape() != (n, n) || core.n != n || core.input_dim != tgc.order() * n {
            return Err(Error::shape(
                "tgc_lstm",
                format!("{n} nodes, order {}", tgc.order()),
                format!(
                    "w_n {:?}, core {}x{}",
                    w_n.value.shape(),
                    core.n,
                    core.input_dim
                ),
            ));
        }
        if w_n.mask.is_none() {
            return Err(Error::Checkpoint("cell-state gate lacks its support mask".into()));
        }
        Ok(TgcLstm { tgc, w_n, core })
    }

    pub fn node_count(&self) -> usize {
        self.tgc.node_count()
    }

    pub fn order(&self) -> usize {
        self.tgc.order()
    }

    pub fn tgc(&self) -> &TgcLayer<F> {
        &self.tgc
    }

    pub(crate) fn tgc_mut(&mut self) -> &mut TgcLayer<F> {
        &mut self.tgc
    }

    pub fn cell_state_gate(&self) -> &Parameter<F> {
        &self.w_n
    }

    pub(crate) fn params(&self) -> Vec<&Parameter<F>> {
        let mut all: Vec<&Parameter<F>> = self.tgc.weights().iter().collect();
        all.push(&self.w_n);
        all.extend(self.core.params());
        all
    }

    pub(crate) fn params_mut(&mut self) -> Vec<&mut Parameter<F>> {
        let mut all: Vec<&mut Parameter<F>> = self.tgc.weights_mut().iter_mut().collect();
        all.push(&mut self.w_n);
        all.extend(self.core.params_mut());
        all
    }

    /// One time step: TGC features, gates, the masked cell-state mixing, and
    /// the new hidden/cell state. Intermediates are retained for backward.
    pub fn cell_step(&self, x: &[F], prev: &LstmState<F>) -> Result<(LstmState<F>, TgcStepTape<F>)> {
        self.cell_step_at(x, prev, 0)
    }

    fn cell_step_at(&self, x: &[F], prev: &LstmState<F>, t: usize) -> Result<(LstmState<F>, TgcStepTape<F>)> {
        check_finite(x, "input signal", t)?;
        let features = self.tgc.forward(x)?;
        check_finite(features.flat(), "graph convolution features", t)?;
        let c_star = masked_linear_forward(&self.w_n, &prev.c)?;
        check_finite(&c_star, "cell state gate", t)?;
        let (state, core_tape) = self.core.step(features.flat(), &prev.h, &c_star, t)?;
        Ok((
            state,
            TgcStepTape {
                x: x.to_vec(),
                c_prev: prev.c.clone(),
                core: core_tape,
            },
        ))
    }

    /// Runs the cell over the rows of `window` (T x N) from zero initial
    /// state and returns the final hidden state (the one-step-ahead
    /// prediction) plus the tape for backpropagation through time.
    pub fn forward_sequence(&self, window: &DenseMatrix<F>) -> Result<(Vec<F>, TgcLstmTape<F>)> {
        let n = self.node_count();
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
            let (next, tape) = self.cell_step_at(window.row(t), &state, t)?;
            steps.push(tape);
            state = next;
        }
        Ok((state.h, TgcLstmTape { steps }))
    }

    /// Backpropagation through time. `d_h_last` is the loss gradient at the
    /// final hidden state; `d_final_features` optionally injects an extra
    /// gradient on the final step's flattened TGC features (the feature
    /// regularizer uses this). Parameter gradients accumulate in place; the
    /// per-step input gradients are returned in time order.
    ///
    /// The tape is consumed: reusing one is a compile-time move error.
    pub fn backward_sequence(
        &mut self,
        tape: TgcLstmTape<F>,
        d_h_last: &[F],
        d_final_features: Option<&[F]>,
    ) -> Result<Vec<Vec<F>>> {
        let n = self.node_count();
        if d_h_last.len() != n {
            return Err(Error::shape("backward_sequence", format!("{n}"), format!("{}", d_h_last.len())));
        }
        if let Some(df) = d_final_features {
            if df.len() != self.core.input_dim {
                return Err(Error::shape(
                    "backward_sequence",
                    format!("{} features", self.core.input_dim),
                    format!("{}", df.len()),
                ));
            }
        }
        let steps = tape.steps;
        let last = steps.len() - 1;
        let mut dh = d_h_last.to_vec();
        let mut dc = vec![F::zero(); n];
        let mut dx_all = vec![Vec::new(); steps.len()];
        for (t, step) in steps.iter().enumerate().rev() {
            let mut grads = self.core.step_backward(&step.core, &dh, &dc)?;
            if t == last {
                if let Some(df) = d_final_features {
                    add_assign(&mut grads.d_input, df);
                }
            }
            // cell-state gate: dW_N = (dC* C_{t-1}^T) ⊙ mask, dC_{t-1} = (W_N ⊙ mask)^T dC*
            let dc_prev = masked_linear_backward(&mut self.w_n, &step.c_prev, &grads.d_c_star)?;
            dx_all[t] = self.tgc.backward(&step.x, &grads.d_input)?;
            dh = grads.d_h_prev;
            dc = dc_prev;
        }
        Ok(dx_all)
    }
}
