//! Dense-array numerical core for the embedding → 3×BiLSTM → dense network.
//!
//! Everything is generic over [`Real`] so the same code runs in `f32` for
//! training and in `f64` for gradient checking.

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign, SubAssign};

use num_traits::{Float, FromPrimitive};

use crate::error::{Error, Result};
use crate::rng::{self, SplitMix64};

mod format;
mod lstm;
mod model;

pub use format::{read_model, write_model, FORMAT_VERSION, MAGIC};
pub use lstm::{bilstm_forward, lstm_cell, Activation, LstmParams};
pub use model::{
    backward, backward_logits_into, forward, forward_with_masks, BiLstm, DropoutMasks, ForwardTrace, Mode, ModelConfig,
    ModelParams, ModelSummary, ParamCounts, TABLE_DENSE_PARAMS,
};

pub trait Real:
    Float + FromPrimitive + Debug + Default + Send + Sync + Sum + AddAssign + SubAssign + MulAssign + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Converts an `f64` constant into the working precision.
#[inline]
pub fn real<F: Real>(x: f64) -> F {
    F::from_f64(x).expect("finite constant")
}

/// Row-major dense array.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<F> {
    shape: Vec<usize>,
    data: Vec<F>,
}

impl<F: Real> Tensor<F> {
    pub fn zeros(shape: &[usize]) -> Self {
        Self {
            shape: shape.to_vec(),
            data: vec![F::zero(); shape.iter().product()],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<F>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(Error::Shape(format!(
                "shape {shape:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn uniform(shape: &[usize], limit: f64, rng: &mut SplitMix64) -> Self {
        let n = shape.iter().product();
        let data = (0..n).map(|_| real(limit * (2.0 * rng::unit_f64(rng) - 1.0))).collect();
        Self {
            shape: shape.to_vec(),
            data,
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[F] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [F] {
        &mut self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// Width of the last axis.
    pub fn cols(&self) -> usize {
        *self.shape.last().unwrap_or(&1)
    }

    pub fn rows(&self) -> usize {
        if self.shape.is_empty() {
            1
        } else {
            self.len() / self.cols()
        }
    }

    pub fn row(&self, r: usize) -> &[F] {
        let c = self.cols();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [F] {
        let c = self.cols();
        &mut self.data[r * c..(r + 1) * c]
    }

    pub fn fill_zero(&mut self) {
        self.data.iter_mut().for_each(|x| *x = F::zero());
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }

    pub fn cast<G: Real>(&self) -> Tensor<G> {
        Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .map(|x| G::from_f64(x.to_f64().unwrap()).unwrap())
                .collect(),
        }
    }

    /// Rows in reverse order.
    pub fn reversed_rows(&self) -> Self {
        let mut out = Self::zeros(&self.shape);
        let n = self.rows();
        for r in 0..n {
            out.row_mut(r).copy_from_slice(self.row(n - 1 - r));
        }
        out
    }
}

/// `out += x · m` for a row vector `x` and a row-major matrix `m`.
#[inline]
pub(crate) fn vec_mat_acc<F: Real>(x: &[F], m: &Tensor<F>, out: &mut [F]) {
    debug_assert_eq!(x.len(), m.rows());
    for (k, &xk) in x.iter().enumerate() {
        if xk == F::zero() {
            continue;
        }
        for (o, &w) in out.iter_mut().zip(m.row(k)) {
            *o += xk * w;
        }
    }
}

/// `out[k] += m[k] · y` (product with the transpose of `m`).
#[inline]
pub(crate) fn mat_vec_t_acc<F: Real>(m: &Tensor<F>, y: &[F], out: &mut [F]) {
    for (k, o) in out.iter_mut().enumerate() {
        let mut s = F::zero();
        for (&w, &yy) in m.row(k).iter().zip(y) {
            s += w * yy;
        }
        *o += s;
    }
}

/// `m[k] += x[k] * y` (outer-product accumulation).
#[inline]
pub(crate) fn outer_acc<F: Real>(x: &[F], y: &[F], m: &mut Tensor<F>) {
    for (k, &xk) in x.iter().enumerate() {
        if xk == F::zero() {
            continue;
        }
        for (g, &yy) in m.row_mut(k).iter_mut().zip(y) {
            *g += xk * yy;
        }
    }
}

pub fn sigmoid<F: Real>(x: F) -> F {
    F::one() / (F::one() + (-x).exp())
}

/// Inverted-dropout multipliers: 0 with probability `rate`, otherwise
/// `1 / (1 - rate)`.
pub fn dropout_mask<F: Real>(len: usize, rate: f64, rng: &mut SplitMix64) -> Result<Vec<F>> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::DropoutRate(rate));
    }
    let keep: F = real(1.0 / (1.0 - rate));
    Ok((0..len)
        .map(|_| if rng::unit_f64(rng) < rate { F::zero() } else { keep })
        .collect())
}

/// Applies inverted dropout in training mode; identity (all-ones mask)
/// otherwise.
pub fn dropout<F: Real>(x: &Tensor<F>, rate: f64, rng: &mut SplitMix64, training: bool) -> Result<(Tensor<F>, Vec<F>)> {
    if !(0.0..1.0).contains(&rate) {
        return Err(Error::DropoutRate(rate));
    }
    let mask = if training && rate > 0.0 {
        dropout_mask(x.len(), rate, rng)?
    } else {
        vec![F::one(); x.len()]
    };
    let mut out = x.clone();
    for (o, &m) in out.data_mut().iter_mut().zip(&mask) {
        *o *= m;
    }
    Ok((out, mask))
}

/// Numerically stable softmax (max subtracted first).
pub fn softmax<F: Real>(logits: &[F]) -> Vec<F> {
    let max = logits.iter().copied().fold(F::neg_infinity(), F::max);
    let exps: Vec<F> = logits.iter().map(|&z| (z - max).exp()).collect();
    let sum: F = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn dense_logits<F: Real>(h: &[F], w: &Tensor<F>, b: &Tensor<F>) -> Result<Vec<F>> {
    if w.rows() != h.len() || w.cols() != b.len() {
        return Err(Error::Shape(format!(
            "dense: input {} against weights {:?} and bias {:?}",
            h.len(),
            w.shape(),
            b.shape()
        )));
    }
    let mut logits = b.data().to_vec();
    vec_mat_acc(h, w, &mut logits);
    Ok(logits)
}

pub fn dense_softmax<F: Real>(h: &[F], w: &Tensor<F>, b: &Tensor<F>) -> Result<Vec<F>> {
    dense_logits(h, w, b).map(|z| softmax(&z))
}

/// Looks up one embedding row per index.
pub fn embedding_forward<F: Real>(indices: &[usize], table: &Tensor<F>) -> Result<Tensor<F>> {
    let width = table.cols();
    let mut out = Tensor::zeros(&[indices.len(), width]);
    for (t, &idx) in indices.iter().enumerate() {
        if idx >= table.rows() {
            return Err(Error::IndexOutOfRange {
                index: idx,
                size: table.rows(),
            });
        }
        out.row_mut(t).copy_from_slice(table.row(idx));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_shape_checks() {
        assert!(Tensor::<f64>::from_vec(&[2, 3], vec![0.0; 5]).is_err());
        let t = Tensor::<f64>::from_vec(&[2, 3], (0..6).map(f64::from).collect()).unwrap();
        assert_eq!(t.row(1), &[3.0, 4.0, 5.0]);
        assert_eq!(t.reversed_rows().row(0), &[3.0, 4.0, 5.0]);
        assert_eq!(t.rows(), 2);
    }

    #[test]
    fn softmax_cases() {
        let p = softmax(&[0.0f64, 0.0, 0.0]);
        for x in &p {
            assert!((x - 1.0 / 3.0).abs() < 1e-15);
        }
        let p = softmax(&[10.0f64, 0.0, 0.0]);
        // 1 / (1 + 2e^-10) and e^-10 / (1 + 2e^-10), evaluated by hand
        assert!((p[0] - 0.999_909_208_0).abs() < 1e-9);
        assert!((p[1] - 4.539_580_8e-5).abs() < 1e-12);
        let a = softmax(&[1.0f64, -2.0, 0.5]);
        let b = softmax(&[1.0f64 + 37.0, -2.0 + 37.0, 0.5 + 37.0]);
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn softmax_normalized_for_wide_logits() {
        let mut r = rng::seeded(11);
        for _ in 0..1000 {
            let z: Vec<f64> = (0..3).map(|_| 100.0 * rng::unit_f64(&mut r) - 50.0).collect();
            let p = softmax(&z);
            let s: f64 = p.iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
            assert!(p.iter().all(|&x| x > 0.0 && x < 1.0 + 1e-15));
        }
    }

    #[test]
    fn dropout_modes() {
        let x = Tensor::<f64>::from_vec(&[4], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut r = rng::seeded(1);
        assert_eq!(dropout(&x, 0.0, &mut r, true).unwrap().0, x);
        assert_eq!(dropout(&x, 0.9, &mut r, false).unwrap().0, x);
        assert!(matches!(dropout(&x, 1.0, &mut r, true), Err(Error::DropoutRate(_))));
        assert!(dropout_mask::<f64>(3, -0.1, &mut r).is_err());
    }

    #[test]
    fn dropout_preserves_expectation() {
        // Monte-Carlo check of E[mask] = 1 at the architecture's rate.
        let mut r = rng::seeded(2024);
        let mask = dropout_mask::<f64>(100_000, 0.45, &mut r).unwrap();
        let mean = mask.iter().sum::<f64>() / mask.len() as f64;
        assert!((mean - 1.0).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn embedding_lookup() {
        let table = Tensor::<f64>::from_vec(&[3, 2], vec![1.0, 0.0, 0.0, 1.0, 5.0, 5.0]).unwrap();
        let out = embedding_forward(&[0, 0], &table).unwrap();
        assert_eq!(out.data(), &[1.0, 0.0, 1.0, 0.0]);
        assert!(matches!(
            embedding_forward(&[3], &table),
            Err(Error::IndexOutOfRange { index: 3, size: 3 })
        ));
    }
}
