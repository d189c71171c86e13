//! Loss, class weighting, Nadam and the training loop.

use std::io::Write;

use crate::corpus::{Label, LabelCounts};
use crate::encoder::EncodedExample;
use crate::error::{Error, Result};
use crate::rng::{self, SplitMix64};
use crate::tensorcore::{backward_logits_into, forward, real, Mode, ModelParams, Real, Tensor};

/// Floor added inside the logarithm of the cross-entropy.
pub const LOG_FLOOR: f64 = 1e-12;

/// Consecutive worsening epochs that stop training.
pub const EARLY_STOP_WINDOW: usize = 2;

/// Per-class loss multipliers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassWeights {
    weights: [f64; 3],
}

impl ClassWeights {
    pub fn uniform() -> Self {
        Self { weights: [1.0; 3] }
    }

    pub fn get(&self, label: Label) -> f64 {
        self.weights[label.index()]
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.weights
    }
}

/// `N / (K · count_c)`: inversely proportional to class frequency, with
/// mean 1 when classes are balanced.
pub fn class_weights(counts: &LabelCounts) -> Result<ClassWeights> {
    let total = counts.total() as f64;
    let k = Label::ALL.len() as f64;
    let mut weights = [0.0; 3];
    for label in Label::ALL {
        let n = counts.get(label);
        if n == 0 {
            return Err(Error::ZeroClassCount(label));
        }
        weights[label.index()] = total / (k * n as f64);
    }
    Ok(ClassWeights { weights })
}

/// Weighted categorical cross-entropy and its gradient with respect to the
/// logits (softmax and log-loss fused).
pub fn weighted_cross_entropy<F: Real>(probs: &[F], gold: Label, weights: &ClassWeights) -> (F, Vec<F>) {
    let w: F = real(weights.get(gold));
    let g = gold.index();
    let loss = -w * (probs[g] + real(LOG_FLOOR)).ln();
    let grad = probs
        .iter()
        .enumerate()
        .map(|(j, &p)| w * (if j == g { p - F::one() } else { p }))
        .collect();
    (loss, grad)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NadamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for NadamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// First and second moments for every parameter array.
#[derive(Debug, Clone)]
pub struct NadamState<F> {
    pub config: NadamConfig,
    pub step: u64,
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
}

impl<F: Real> NadamState<F> {
    pub fn new(config: NadamConfig, sizes: impl IntoIterator<Item = usize>) -> Self {
        let (m, v) = sizes
            .into_iter()
            .map(|n| (vec![F::zero(); n], vec![F::zero(); n]))
            .unzip();
        Self { config, step: 0, m, v }
    }

    pub fn for_model(config: NadamConfig, params: &ModelParams<F>) -> Self {
        Self::new(config, params.arrays().iter().map(|t| t.len()))
    }

    pub fn second_moments(&self) -> impl Iterator<Item = &[F]> {
        self.v.iter().map(Vec::as_slice)
    }

    /// One Nadam update over parallel lists of parameter and gradient
    /// arrays. Nothing is modified if any gradient is non-finite; the error
    /// carries the offending array's position.
    pub fn apply(&mut self, params: &mut [&mut Tensor<F>], grads: &[&Tensor<F>]) -> Result<(), usize> {
        assert_eq!(params.len(), self.m.len());
        assert_eq!(grads.len(), self.m.len());
        if let Some(bad) = grads.iter().position(|g| !g.is_finite()) {
            return Err(bad);
        }
        self.step += 1;
        let t = self.step as i32;
        let c = &self.config;
        let (b1, b2): (F, F) = (real(c.beta1), real(c.beta2));
        let one = F::one();
        let bias1: F = real(1.0 - c.beta1.powi(t));
        let bias2: F = real(1.0 - c.beta2.powi(t));
        let (lr, eps): (F, F) = (real(c.learning_rate), real(c.epsilon));
        for (k, (theta, g)) in params.iter_mut().zip(grads).enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for (((p, &gi), mi), vi) in theta
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *mi = b1 * *mi + (one - b1) * gi;
                *vi = b2 * *vi + (one - b2) * gi * gi;
                let m_hat = *mi / bias1;
                let v_hat = *vi / bias2;
                let nesterov = b1 * m_hat + (one - b1) * gi / bias1;
                *p -= lr * nesterov / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

pub fn nadam_step<F: Real>(
    params: &mut ModelParams<F>,
    grads: &ModelParams<F>,
    state: &mut NadamState<F>,
) -> Result<()> {
    let mut p = params.arrays_mut();
    let g = grads.arrays();
    state.apply(&mut p, &g).map_err(|k| Error::NonFiniteGradient {
        array: ModelParams::<F>::array_names()[k].clone(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainConfig {
    pub max_epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 20,
            batch_size: 32,
            seed: 42,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs == 0 {
            return Err(Error::Config("max_epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

/// A labeled index sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sample {
    pub indices: Vec<usize>,
    pub label: Label,
}

impl TryFrom<&EncodedExample> for Sample {
    type Error = Error;

    fn try_from(e: &EncodedExample) -> Result<Self> {
        let label = e.label.ok_or_else(|| Error::Unlabeled { id: e.id.clone() })?;
        Ok(Sample {
            indices: e.indices.clone(),
            label,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_acc: f64,
}

pub fn write_history<W: Write>(history: &[EpochRecord], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["epoch", "train_loss", "val_loss", "val_acc"])?;
    for r in history {
        out.write_record([
            r.epoch.to_string(),
            r.train_loss.to_string(),
            r.val_loss.to_string(),
            r.val_acc.to_string(),
        ])?;
    }
    out.flush()?;
    Ok(())
}

/// Tracks validation metrics, keeps the lowest-loss checkpoint and decides
/// when to stop.
///
/// Training stops after epoch `t` when validation loss rose at both `t-1`
/// and `t` while validation accuracy fell at both.
#[derive(Debug, Clone)]
pub struct EarlyStopping<T> {
    losses: Vec<f64>,
    accs: Vec<f64>,
    best: Option<(usize, f64, T)>,
}

impl<T: Clone> Default for EarlyStopping<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Clone> EarlyStopping<T> {
    pub fn new() -> Self {
        Self {
            losses: Vec::new(),
            accs: Vec::new(),
            best: None,
        }
    }

    /// Records one epoch (1-based) and returns true when training should
    /// stop.
    pub fn observe(&mut self, epoch: usize, val_loss: f64, val_acc: f64, checkpoint: &T) -> bool {
        self.losses.push(val_loss);
        self.accs.push(val_acc);
        if self.best.as_ref().is_none_or(|(_, best, _)| val_loss < *best) {
            self.best = Some((epoch, val_loss, checkpoint.clone()));
        }
        let n = self.losses.len();
        if n <= EARLY_STOP_WINDOW {
            return false;
        }
        (n - EARLY_STOP_WINDOW..n).all(|i| self.losses[i] > self.losses[i - 1] && self.accs[i] < self.accs[i - 1])
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best.as_ref().map(|b| b.0)
    }

    pub fn into_best(self) -> Option<(usize, T)> {
        self.best.map(|(e, _, t)| (e, t))
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome<F> {
    pub params: ModelParams<F>,
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub history: Vec<EpochRecord>,
}

/// Mean unweighted cross-entropy and accuracy in inference mode.
pub fn evaluate<F: Real>(params: &ModelParams<F>, data: &[Sample]) -> Result<(f64, f64)> {
    if data.is_empty() {
        return Err(Error::Config("cannot evaluate on an empty dataset".into()));
    }
    let uniform = ClassWeights::uniform();
    let mut loss = 0.0;
    let mut correct = 0usize;
    for s in data {
        let (label, probs) = predict(params, &s.indices)?;
        loss += weighted_cross_entropy(&probs, s.label, &uniform).0.to_f64().unwrap();
        correct += usize::from(label == s.label);
    }
    let n = data.len() as f64;
    Ok((loss / n, correct as f64 / n))
}

/// Mini-batch training with seeded shuffling, batch-averaged gradients and
/// Nadam updates. Returns the parameters of the epoch with the lowest
/// validation loss.
pub fn train<F: Real>(
    train_data: &[Sample],
    val_data: &[Sample],
    init: ModelParams<F>,
    cfg: &TrainConfig,
    weights: &ClassWeights,
) -> Result<TrainOutcome<F>> {
    train_with_progress(train_data, val_data, init, cfg, weights, |_| {})
}

/// [`train`] with a callback invoked after every epoch.
pub fn train_with_progress<F: Real>(
    train_data: &[Sample],
    val_data: &[Sample],
    init: ModelParams<F>,
    cfg: &TrainConfig,
    weights: &ClassWeights,
    mut on_epoch: impl FnMut(&EpochRecord),
) -> Result<TrainOutcome<F>> {
    cfg.validate()?;
    if train_data.is_empty() || val_data.is_empty() {
        return Err(Error::Config("training and validation sets must be nonempty".into()));
    }
    let mut rng: SplitMix64 = rng::seeded(cfg.seed);
    let mut params = init;
    let mut grads = params.zeros_like();
    let mut state = NadamState::for_model(NadamConfig::default(), &params);
    let mut stopper = EarlyStopping::new();
    let mut history = Vec::new();
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    let mut stopped_early = false;

    for epoch in 1..=cfg.max_epochs {
        rng::shuffle(&mut order, &mut rng);
        let mut epoch_loss = 0.0;
        for (batch_no, batch) in order.chunks(cfg.batch_size).enumerate() {
            let wrap = |source: Error| Error::Training {
                epoch,
                batch: batch_no + 1,
                source: Box::new(source),
            };
            grads.arrays_mut().into_iter().for_each(Tensor::fill_zero);
            for &i in batch {
                let sample = &train_data[i];
                let (_, trace) = forward(&sample.indices, &params, Mode::Training(&mut rng)).map_err(wrap)?;
                let trace = trace.ok_or(Error::MissingTrace).map_err(wrap)?;
                let (loss, grad_logits) = weighted_cross_entropy(&trace.probs, sample.label, weights);
                epoch_loss += loss.to_f64().unwrap();
                backward_logits_into(&trace, &grad_logits, &params, &mut grads).map_err(wrap)?;
            }
            let scale: F = real(1.0 / batch.len() as f64);
            for g in grads.arrays_mut() {
                g.data_mut().iter_mut().for_each(|x| *x *= scale);
            }
            nadam_step(&mut params, &grads, &mut state).map_err(wrap)?;
        }

        let (val_loss, val_acc) = evaluate(&params, val_data)?;
        let record = EpochRecord {
            epoch,
            train_loss: epoch_loss / train_data.len() as f64,
            val_loss,
            val_acc,
        };
        history.push(record);
        on_epoch(&record);
        if stopper.observe(epoch, val_loss, val_acc, &params) {
            stopped_early = true;
            break;
        }
    }

    let (best_epoch, params) = stopper.into_best().expect("at least one epoch ran");
    Ok(TrainOutcome {
        params,
        best_epoch,
        stopped_early,
        history,
    })
}

/// Most probable class; ties go to the earliest class in `IND, GRP, OTH`.
pub fn argmax_label<F: Real>(probs: &[F]) -> Label {
    let mut best = 0;
    for (j, &p) in probs.iter().enumerate().skip(1) {
        if p > probs[best] {
            best = j;
        }
    }
    Label::from_index(best).expect("three classes")
}

pub fn predict<F: Real>(params: &ModelParams<F>, indices: &[usize]) -> Result<(Label, Vec<F>)> {
    let (probs, _) = forward(indices, params, Mode::Inference)?;
    Ok((argmax_label(&probs), probs))
}
