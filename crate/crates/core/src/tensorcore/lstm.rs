//! LSTM layers and their reverse-mode gradients.
//!
//! Gates are packed along the last axis of `W`, `U` and `b` in the order
//! input, forget, candidate, output.

use super::{mat_vec_t_acc, outer_acc, sigmoid, vec_mat_acc, Real, Tensor};
use crate::error::{Error, Result};
use crate::rng::SplitMix64;

/// Squashing applied to the cell state before the output gate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Tanh,
    Sigmoid,
}

impl Activation {
    #[inline]
    fn apply<F: Real>(self, x: F) -> F {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Sigmoid => sigmoid(x),
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn grad_from_output<F: Real>(self, y: F) -> F {
        match self {
            Activation::Tanh => F::one() - y * y,
            Activation::Sigmoid => y * (F::one() - y),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams<F> {
    /// `[input_dim × 4·hidden]`
    pub w: Tensor<F>,
    /// `[hidden × 4·hidden]`
    pub u: Tensor<F>,
    /// `[4·hidden]`
    pub b: Tensor<F>,
    pub activation: Activation,
}

impl<F: Real> LstmParams<F> {
    pub fn zeros(input_dim: usize, hidden: usize, activation: Activation) -> Self {
        Self {
            w: Tensor::zeros(&[input_dim, 4 * hidden]),
            u: Tensor::zeros(&[hidden, 4 * hidden]),
            b: Tensor::zeros(&[4 * hidden]),
            activation,
        }
    }

    /// Glorot-uniform weights, zero biases except +1 on the forget gate.
    pub fn init(input_dim: usize, hidden: usize, activation: Activation, rng: &mut SplitMix64) -> Self {
        let glorot = |fan_in: usize, fan_out: usize| (6.0 / (fan_in + fan_out) as f64).sqrt();
        let w = Tensor::uniform(&[input_dim, 4 * hidden], glorot(input_dim, 4 * hidden), rng);
        let u = Tensor::uniform(&[hidden, 4 * hidden], glorot(hidden, 4 * hidden), rng);
        let mut b = Tensor::zeros(&[4 * hidden]);
        b.data_mut()[hidden..2 * hidden].fill(F::one());
        Self { w, u, b, activation }
    }

    pub fn hidden(&self) -> usize {
        self.u.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.w.rows()
    }

    pub fn param_count(&self) -> usize {
        self.w.len() + self.u.len() + self.b.len()
    }

    fn check(&self) -> Result<()> {
        let h = self.hidden();
        if self.u.shape() != [h, 4 * h] || self.w.cols() != 4 * h || self.b.shape() != [4 * h] {
            return Err(Error::Shape(format!(
                "inconsistent LSTM shapes W {:?}, U {:?}, b {:?}",
                self.w.shape(),
                self.u.shape(),
                self.b.shape()
            )));
        }
        Ok(())
    }
}

/// One LSTM step: returns `(h_t, c_t)`.
pub fn lstm_cell<F: Real>(x: &[F], h_prev: &[F], c_prev: &[F], params: &LstmParams<F>) -> Result<(Vec<F>, Vec<F>)> {
    params.check()?;
    let h = params.hidden();
    if x.len() != params.input_dim() || h_prev.len() != h || c_prev.len() != h {
        return Err(Error::Shape(format!(
            "lstm_cell: x {}, h {}, c {} against input {} hidden {h}",
            x.len(),
            h_prev.len(),
            c_prev.len(),
            params.input_dim()
        )));
    }
    let mut gates = params.b.data().to_vec();
    vec_mat_acc(x, &params.w, &mut gates);
    vec_mat_acc(h_prev, &params.u, &mut gates);
    let mut h_t = vec![F::zero(); h];
    let mut c_t = vec![F::zero(); h];
    for j in 0..h {
        let i = sigmoid(gates[j]);
        let f = sigmoid(gates[h + j]);
        let g = gates[2 * h + j].tanh();
        let o = sigmoid(gates[3 * h + j]);
        c_t[j] = f * c_prev[j] + i * g;
        h_t[j] = o * params.activation.apply(c_t[j]);
    }
    Ok((h_t, c_t))
}

/// Activations of one direction, stored in processing order.
#[derive(Debug, Clone)]
pub(crate) struct LstmTrace<F> {
    /// Inputs after the input dropout mask, `[T × input_dim]`.
    x: Tensor<F>,
    /// Post-nonlinearity gates `(i, f, g, o)`, `[T × 4h]`.
    gates: Tensor<F>,
    c: Tensor<F>,
    act_c: Tensor<F>,
    pub(crate) h: Tensor<F>,
    input_mask: Option<Vec<F>>,
    recurrent_mask: Option<Vec<F>>,
}

/// Runs the recurrence over the rows of `xs` in order, with optional
/// per-sequence dropout masks on the input and on the recurrent state.
pub(crate) fn run_direction<F: Real>(
    xs: &Tensor<F>,
    params: &LstmParams<F>,
    input_mask: Option<Vec<F>>,
    recurrent_mask: Option<Vec<F>>,
) -> Result<LstmTrace<F>> {
    params.check()?;
    let steps = xs.rows();
    let d = params.input_dim();
    let h = params.hidden();
    if xs.cols() != d {
        return Err(Error::Shape(format!("LSTM expects input width {d}, got {}", xs.cols())));
    }
    let mut x = xs.clone();
    if let Some(m) = &input_mask {
        for s in 0..steps {
            x.row_mut(s).iter_mut().zip(m).for_each(|(v, &k)| *v *= k);
        }
    }
    let mut gates = Tensor::zeros(&[steps, 4 * h]);
    let mut c = Tensor::zeros(&[steps, h]);
    let mut act_c = Tensor::zeros(&[steps, h]);
    let mut hs = Tensor::zeros(&[steps, h]);
    let mut h_prev = vec![F::zero(); h];
    let mut c_prev = vec![F::zero(); h];
    let mut z = vec![F::zero(); 4 * h];
    for s in 0..steps {
        z.copy_from_slice(params.b.data());
        vec_mat_acc(x.row(s), &params.w, &mut z);
        if let Some(m) = &recurrent_mask {
            h_prev.iter_mut().zip(m).for_each(|(v, &k)| *v *= k);
        }
        vec_mat_acc(&h_prev, &params.u, &mut z);
        let g_row = gates.row_mut(s);
        for j in 0..h {
            g_row[j] = sigmoid(z[j]);
            g_row[h + j] = sigmoid(z[h + j]);
            g_row[2 * h + j] = z[2 * h + j].tanh();
            g_row[3 * h + j] = sigmoid(z[3 * h + j]);
        }
        for j in 0..h {
            let (i, f, g, o) = (g_row[j], g_row[h + j], g_row[2 * h + j], g_row[3 * h + j]);
            let cj = f * c_prev[j] + i * g;
            let a = params.activation.apply(cj);
            c.row_mut(s)[j] = cj;
            act_c.row_mut(s)[j] = a;
            hs.row_mut(s)[j] = o * a;
        }
        h_prev.copy_from_slice(hs.row(s));
        c_prev.copy_from_slice(c.row(s));
    }
    Ok(LstmTrace {
        x,
        gates,
        c,
        act_c,
        h: hs,
        input_mask,
        recurrent_mask,
    })
}

/// Backpropagation through time for one direction.
///
/// `d_h` holds the loss gradient with respect to each step's output, in
/// processing order. Parameter gradients are accumulated into `grads`; the
/// gradient with respect to the (unmasked) inputs is returned.
pub(crate) fn backward_direction<F: Real>(
    trace: &LstmTrace<F>,
    d_h: &Tensor<F>,
    params: &LstmParams<F>,
    grads: &mut LstmParams<F>,
) -> Tensor<F> {
    let steps = trace.h.rows();
    let h = params.hidden();
    let mut d_x = Tensor::zeros(&[steps, params.input_dim()]);
    let mut dh_next = vec![F::zero(); h];
    let mut dc_next = vec![F::zero(); h];
    let mut dz = vec![F::zero(); 4 * h];
    let mut h_prev_masked = vec![F::zero(); h];
    for s in (0..steps).rev() {
        let g = trace.gates.row(s);
        let a = trace.act_c.row(s);
        let dh_out = d_h.row(s);
        for j in 0..h {
            let (i, f, cand, o) = (g[j], g[h + j], g[2 * h + j], g[3 * h + j]);
            let c_prev = if s > 0 { trace.c.row(s - 1)[j] } else { F::zero() };
            let dh = dh_out[j] + dh_next[j];
            let d_o = dh * a[j];
            let dc = dc_next[j] + dh * o * params.activation.grad_from_output(a[j]);
            dz[j] = dc * cand * i * (F::one() - i);
            dz[h + j] = dc * c_prev * f * (F::one() - f);
            dz[2 * h + j] = dc * i * (F::one() - cand * cand);
            dz[3 * h + j] = d_o * o * (F::one() - o);
            dc_next[j] = dc * f;
        }

        grads.b.data_mut().iter_mut().zip(&dz).for_each(|(gb, &d)| *gb += d);
        outer_acc(trace.x.row(s), &dz, &mut grads.w);
        if s > 0 {
            h_prev_masked.copy_from_slice(trace.h.row(s - 1));
            if let Some(m) = &trace.recurrent_mask {
                h_prev_masked.iter_mut().zip(m).for_each(|(v, &k)| *v *= k);
            }
            outer_acc(&h_prev_masked, &dz, &mut grads.u);
        }

        let dx_row = d_x.row_mut(s);
        mat_vec_t_acc(&params.w, &dz, dx_row);
        if let Some(m) = &trace.input_mask {
            dx_row.iter_mut().zip(m).for_each(|(v, &k)| *v *= k);
        }

        dh_next.iter_mut().for_each(|v| *v = F::zero());
        mat_vec_t_acc(&params.u, &dz, &mut dh_next);
        if let Some(m) = &trace.recurrent_mask {
            dh_next.iter_mut().zip(m).for_each(|(v, &k)| *v *= k);
        }
    }
    d_x
}

/// Bidirectional layer without dropout.
///
/// Returns `[T × 2h]` when `return_sequences` is set, otherwise `[2h]`
/// holding the forward state at the last step and the backward state at
/// the first step.
pub fn bilstm_forward<F: Real>(
    xs: &Tensor<F>,
    fwd: &LstmParams<F>,
    bwd: &LstmParams<F>,
    return_sequences: bool,
) -> Result<Tensor<F>> {
    let f = run_direction(xs, fwd, None, None)?;
    let b = run_direction(&xs.reversed_rows(), bwd, None, None)?;
    Ok(concat_directions(&f.h, &b.h, return_sequences))
}

/// Joins forward and (processing-order) backward outputs.
pub(crate) fn concat_directions<F: Real>(fwd_h: &Tensor<F>, bwd_h: &Tensor<F>, return_sequences: bool) -> Tensor<F> {
    let steps = fwd_h.rows();
    let (hf, hb) = (fwd_h.cols(), bwd_h.cols());
    if return_sequences {
        let mut out = Tensor::zeros(&[steps, hf + hb]);
        for t in 0..steps {
            let row = out.row_mut(t);
            row[..hf].copy_from_slice(fwd_h.row(t));
            row[hf..].copy_from_slice(bwd_h.row(steps - 1 - t));
        }
        out
    } else {
        let mut out = Tensor::zeros(&[hf + hb]);
        if steps > 0 {
            out.data_mut()[..hf].copy_from_slice(fwd_h.row(steps - 1));
            out.data_mut()[hf..].copy_from_slice(bwd_h.row(steps - 1));
        }
        out
    }
}
