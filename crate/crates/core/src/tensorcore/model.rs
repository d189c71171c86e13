//! The full classifier: embedding → BiLSTM(seq) → BiLSTM(seq, dropout,
//! sigmoid cell output) → dropout → BiLSTM(last) → dense → softmax.

use std::fmt;

use super::lstm::{backward_direction, concat_directions, run_direction, Activation, LstmParams, LstmTrace};
use super::{dense_logits, dropout_mask, embedding_forward, mat_vec_t_acc, outer_acc, softmax, Real, Tensor};
use crate::error::{Error, Result};
use crate::rng::{self, SplitMix64};

/// Parameter count printed for the output layer in the reference
/// architecture summary. A 3-unit layer on 256 inputs actually has 771.
pub const TABLE_DENSE_PARAMS: usize = 514;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub vocab_size: usize,
    pub embed_dim: usize,
    /// Per-direction hidden sizes of the three BiLSTM layers.
    pub hidden: [usize; 3],
    /// Rate of the second layer's input/recurrent dropout and of the
    /// standalone dropout after it.
    pub dropout: f64,
}

impl ModelConfig {
    pub const NUM_CLASSES: usize = 3;
    pub const ACTIVATIONS: [Activation; 3] = [Activation::Tanh, Activation::Sigmoid, Activation::Tanh];
    pub const DEFAULT_DROPOUT: f64 = 0.45;

    /// Published dimensions: 128-wide embedding, hidden 128/256/128.
    pub fn full(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            embed_dim: 128,
            hidden: [128, 256, 128],
            dropout: Self::DEFAULT_DROPOUT,
        }
    }

    /// Small dimensions for gradient checks and smoke tests.
    pub fn reduced(vocab_size: usize) -> Self {
        Self {
            vocab_size,
            embed_dim: 8,
            hidden: [4, 6, 4],
            dropout: Self::DEFAULT_DROPOUT,
        }
    }

    pub fn layer_input_dims(&self) -> [usize; 3] {
        [self.embed_dim, 2 * self.hidden[0], 2 * self.hidden[1]]
    }

    pub fn validate(&self) -> Result<()> {
        if self.vocab_size == 0 || self.embed_dim == 0 || self.hidden.contains(&0) {
            return Err(Error::Shape(format!("all model dimensions must be positive: {self:?}")));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::DropoutRate(self.dropout));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiLstm<F> {
    pub fwd: LstmParams<F>,
    pub bwd: LstmParams<F>,
}

impl<F: Real> BiLstm<F> {
    pub fn param_count(&self) -> usize {
        self.fwd.param_count() + self.bwd.param_count()
    }
}

/// All trainable arrays. Also used to hold gradients and optimizer moments.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams<F> {
    pub config: ModelConfig,
    /// `[vocab × embed]`
    pub embedding: Tensor<F>,
    pub layers: [BiLstm<F>; 3],
    /// `[2·hidden3 × 3]`
    pub dense_w: Tensor<F>,
    /// `[3]`
    pub dense_b: Tensor<F>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamCounts {
    pub embedding: usize,
    pub bilstm: [usize; 3],
    pub dense: usize,
}

impl ParamCounts {
    pub fn total(&self) -> usize {
        self.embedding + self.bilstm.iter().sum::<usize>() + self.dense
    }
}

impl<F: Real> ModelParams<F> {
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let dims = config.layer_input_dims();
        let layer = |k: usize| BiLstm {
            fwd: LstmParams::zeros(dims[k], config.hidden[k], ModelConfig::ACTIVATIONS[k]),
            bwd: LstmParams::zeros(dims[k], config.hidden[k], ModelConfig::ACTIVATIONS[k]),
        };
        Ok(Self {
            config,
            embedding: Tensor::zeros(&[config.vocab_size, config.embed_dim]),
            layers: [layer(0), layer(1), layer(2)],
            dense_w: Tensor::zeros(&[2 * config.hidden[2], ModelConfig::NUM_CLASSES]),
            dense_b: Tensor::zeros(&[ModelConfig::NUM_CLASSES]),
        })
    }

    /// Embedding uniform in ±0.05, Glorot-uniform weights, zero biases
    /// except the LSTM forget gates (+1).
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = rng::seeded(seed);
        let embedding = Tensor::uniform(&[config.vocab_size, config.embed_dim], 0.05, &mut rng);
        let dims = config.layer_input_dims();
        let mut layer = |k: usize| BiLstm {
            fwd: LstmParams::init(dims[k], config.hidden[k], ModelConfig::ACTIVATIONS[k], &mut rng),
            bwd: LstmParams::init(dims[k], config.hidden[k], ModelConfig::ACTIVATIONS[k], &mut rng),
        };
        let layers = [layer(0), layer(1), layer(2)];
        let fan_in = 2 * config.hidden[2];
        let limit = (6.0 / (fan_in + ModelConfig::NUM_CLASSES) as f64).sqrt();
        let dense_w = Tensor::uniform(&[fan_in, ModelConfig::NUM_CLASSES], limit, &mut rng);
        Ok(Self {
            config,
            embedding,
            layers,
            dense_w,
            dense_b: Tensor::zeros(&[ModelConfig::NUM_CLASSES]),
        })
    }

    pub fn zeros_like(&self) -> Self {
        Self::zeros(self.config).expect("config already validated")
    }

    /// Array names in serialization order.
    pub fn array_names() -> Vec<String> {
        let mut names = vec!["embedding".to_string()];
        for k in 1..=3 {
            for dir in ["fwd", "bwd"] {
                for part in ["W", "U", "b"] {
                    names.push(format!("bilstm{k}.{dir}.{part}"));
                }
            }
        }
        names.push("dense.W".to_string());
        names.push("dense.b".to_string());
        names
    }

    pub fn arrays(&self) -> Vec<&Tensor<F>> {
        let mut out = vec![&self.embedding];
        for layer in &self.layers {
            for dir in [&layer.fwd, &layer.bwd] {
                out.extend([&dir.w, &dir.u, &dir.b]);
            }
        }
        out.extend([&self.dense_w, &self.dense_b]);
        out
    }

    pub fn arrays_mut(&mut self) -> Vec<&mut Tensor<F>> {
        let mut out = vec![&mut self.embedding];
        for layer in &mut self.layers {
            for dir in [&mut layer.fwd, &mut layer.bwd] {
                out.push(&mut dir.w);
                out.push(&mut dir.u);
                out.push(&mut dir.b);
            }
        }
        out.push(&mut self.dense_w);
        out.push(&mut self.dense_b);
        out
    }

    /// Rebuilds a model from arrays in serialization order.
    pub fn from_arrays(arrays: Vec<Tensor<F>>, dropout: f64) -> Result<Self> {
        let names = Self::array_names();
        if arrays.len() != names.len() {
            return Err(Error::Shape(format!(
                "expected {} arrays, got {}",
                names.len(),
                arrays.len()
            )));
        }
        let shape2 = |t: &Tensor<F>, name: &str| -> Result<(usize, usize)> {
            match t.shape() {
                [r, c] => Ok((*r, *c)),
                s => Err(Error::Shape(format!("{name} must be rank 2, got {s:?}"))),
            }
        };
        let (vocab_size, embed_dim) = shape2(&arrays[0], "embedding")?;
        let mut hidden = [0; 3];
        for (k, h) in hidden.iter_mut().enumerate() {
            *h = shape2(&arrays[1 + 6 * k + 1], &names[1 + 6 * k + 1])?.0;
        }
        let config = ModelConfig {
            vocab_size,
            embed_dim,
            hidden,
            dropout,
        };
        let mut model = Self::zeros(config)?;
        for ((slot, array), name) in model.arrays_mut().into_iter().zip(arrays).zip(&names) {
            if slot.shape() != array.shape() {
                return Err(Error::Shape(format!(
                    "{name}: expected shape {:?}, got {:?}",
                    slot.shape(),
                    array.shape()
                )));
            }
            *slot = array;
        }
        Ok(model)
    }

    pub fn cast<G: Real>(&self) -> ModelParams<G> {
        let arrays = self.arrays().into_iter().map(Tensor::cast).collect();
        ModelParams::from_arrays(arrays, self.config.dropout).expect("same shapes")
    }

    pub fn param_count(&self) -> ParamCounts {
        ParamCounts {
            embedding: self.embedding.len(),
            bilstm: [0, 1, 2].map(|k| self.layers[k].param_count()),
            dense: self.dense_w.len() + self.dense_b.len(),
        }
    }

    /// Architecture table with per-layer output shapes and parameter counts.
    pub fn summary(&self, seq_len: usize) -> ModelSummary {
        ModelSummary {
            config: self.config,
            counts: self.param_count(),
            seq_len,
        }
    }
}

pub struct ModelSummary {
    config: ModelConfig,
    counts: ParamCounts,
    seq_len: usize,
}

impl fmt::Display for ModelSummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = &self.config;
        let t = self.seq_len;
        let rule = "_".repeat(66);
        let rows = [
            (
                "embedding_1 (Embedding)",
                format!("(None, {t}, {})", c.embed_dim),
                self.counts.embedding,
            ),
            (
                "bidirectional_1 (Bidirection)",
                format!("(None, {t}, {})", 2 * c.hidden[0]),
                self.counts.bilstm[0],
            ),
            (
                "bidirectional_2 (Bidirection)",
                format!("(None, {t}, {})", 2 * c.hidden[1]),
                self.counts.bilstm[1],
            ),
            ("dropout_1 (Dropout)", format!("(None, {t}, {})", 2 * c.hidden[1]), 0),
            (
                "bidirectional_3 (Bidirection)",
                format!("(None, {})", 2 * c.hidden[2]),
                self.counts.bilstm[2],
            ),
            (
                "dense_1 (Dense)",
                format!("(None, {})", ModelConfig::NUM_CLASSES),
                self.counts.dense,
            ),
        ];
        writeln!(f, "{rule}")?;
        writeln!(f, "{:<32}{:<22}{:>12}", "Layer (type)", "Output Shape", "Param #")?;
        writeln!(f, "{}", "=".repeat(66))?;
        for (name, shape, count) in rows {
            writeln!(f, "{name:<32}{shape:<22}{count:>12}")?;
            writeln!(f, "{rule}")?;
        }
        writeln!(f, "Total params: {}", self.counts.total())?;
        writeln!(f, "Trainable params: {}", self.counts.total())?;
        writeln!(f, "Non-trainable params: 0")?;
        write!(
            f,
            "note: dense_1 maps {} inputs to {} classes, so it has {} parameters; \
             the reference architecture listing prints {TABLE_DENSE_PARAMS}, which matches a 2-unit layer",
            2 * c.hidden[2],
            ModelConfig::NUM_CLASSES,
            self.counts.dense
        )
    }
}

/// Dropout multipliers for one training example.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks<F> {
    /// Second layer input masks for the forward and backward directions.
    pub input: [Vec<F>; 2],
    /// Second layer recurrent-state masks for the forward and backward directions.
    pub recurrent: [Vec<F>; 2],
    /// Standalone dropout on the second layer's `[T × 2·hidden2]` output.
    pub between: Tensor<F>,
}

impl<F: Real> DropoutMasks<F> {
    /// Input and recurrent masks are drawn once per sequence and shared by
    /// every time step; the standalone mask is elementwise.
    pub fn sample(config: &ModelConfig, seq_len: usize, rng: &mut SplitMix64) -> Result<Self> {
        let rate = config.dropout;
        let in_dim = 2 * config.hidden[0];
        let h = config.hidden[1];
        Ok(Self {
            input: [dropout_mask(in_dim, rate, rng)?, dropout_mask(in_dim, rate, rng)?],
            recurrent: [dropout_mask(h, rate, rng)?, dropout_mask(h, rate, rng)?],
            between: Tensor::from_vec(&[seq_len, 2 * h], dropout_mask(seq_len * 2 * h, rate, rng)?)?,
        })
    }
}

/// Activations kept from a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct ForwardTrace<F> {
    indices: Vec<usize>,
    layers: [[LstmTrace<F>; 2]; 3],
    between: Option<Tensor<F>>,
    final_h: Vec<F>,
    pub logits: Vec<F>,
    pub probs: Vec<F>,
}

pub enum Mode<'a> {
    Inference,
    Training(&'a mut SplitMix64),
}

/// Input and recurrent masks, one per direction.
type DirectionMasks<'a, F> = (&'a [Vec<F>; 2], &'a [Vec<F>; 2]);

fn run_bidirectional<F: Real>(
    xs: &Tensor<F>,
    layer: &BiLstm<F>,
    masks: Option<DirectionMasks<'_, F>>,
) -> Result<[LstmTrace<F>; 2]> {
    let (in_m, rec_m) = match masks {
        Some((i, r)) => (
            [Some(i[0].clone()), Some(i[1].clone())],
            [Some(r[0].clone()), Some(r[1].clone())],
        ),
        None => ([None, None], [None, None]),
    };
    let [in_f, in_b] = in_m;
    let [rec_f, rec_b] = rec_m;
    let f = run_direction(xs, &layer.fwd, in_f, rec_f)?;
    let b = run_direction(&xs.reversed_rows(), &layer.bwd, in_b, rec_b)?;
    Ok([f, b])
}

/// Forward pass with fixed dropout masks (`None` disables dropout), keeping
/// every activation needed by [`backward`].
pub fn forward_with_masks<F: Real>(
    indices: &[usize],
    params: &ModelParams<F>,
    masks: Option<DropoutMasks<F>>,
) -> Result<ForwardTrace<F>> {
    if indices.is_empty() {
        return Err(Error::Shape("empty index sequence".into()));
    }
    let emb = embedding_forward(indices, &params.embedding)?;
    let l1 = run_bidirectional(&emb, &params.layers[0], None)?;
    let out1 = concat_directions(&l1[0].h, &l1[1].h, true);
    let l2 = run_bidirectional(
        &out1,
        &params.layers[1],
        masks.as_ref().map(|m| (&m.input, &m.recurrent)),
    )?;
    let mut out2 = concat_directions(&l2[0].h, &l2[1].h, true);
    let between = match masks {
        Some(m) => {
            if m.between.shape() != out2.shape() {
                return Err(Error::Shape(format!(
                    "dropout mask {:?} does not match activations {:?}",
                    m.between.shape(),
                    out2.shape()
                )));
            }
            out2.data_mut()
                .iter_mut()
                .zip(m.between.data())
                .for_each(|(v, &k)| *v *= k);
            Some(m.between)
        }
        None => None,
    };
    let l3 = run_bidirectional(&out2, &params.layers[2], None)?;
    let final_h = concat_directions(&l3[0].h, &l3[1].h, false).data().to_vec();
    let logits = dense_logits(&final_h, &params.dense_w, &params.dense_b)?;
    let probs = softmax(&logits);
    Ok(ForwardTrace {
        indices: indices.to_vec(),
        layers: [l1, l2, l3],
        between,
        final_h,
        logits,
        probs,
    })
}

/// Class probabilities; in training mode dropout masks are drawn from the
/// supplied generator and the trace is returned.
pub fn forward<F: Real>(
    indices: &[usize],
    params: &ModelParams<F>,
    mode: Mode<'_>,
) -> Result<(Vec<F>, Option<ForwardTrace<F>>)> {
    match mode {
        Mode::Inference => {
            let trace = forward_with_masks(indices, params, None)?;
            Ok((trace.probs, None))
        }
        Mode::Training(rng) => {
            let masks = DropoutMasks::sample(&params.config, indices.len(), rng)?;
            let trace = forward_with_masks(indices, params, Some(masks))?;
            Ok((trace.probs.clone(), Some(trace)))
        }
    }
}

/// Splits a `[T × (hf + hb)]` gradient into forward-direction and
/// processing-order backward-direction parts.
fn split_directions<F: Real>(d: &Tensor<F>, hf: usize) -> (Tensor<F>, Tensor<F>) {
    let steps = d.rows();
    let hb = d.cols() - hf;
    let mut df = Tensor::zeros(&[steps, hf]);
    let mut db = Tensor::zeros(&[steps, hb]);
    for t in 0..steps {
        df.row_mut(t).copy_from_slice(&d.row(t)[..hf]);
        db.row_mut(steps - 1 - t).copy_from_slice(&d.row(t)[hf..]);
    }
    (df, db)
}

fn backward_bidirectional<F: Real>(
    traces: &[LstmTrace<F>; 2],
    d_fwd: &Tensor<F>,
    d_bwd: &Tensor<F>,
    layer: &BiLstm<F>,
    grads: &mut BiLstm<F>,
) -> Tensor<F> {
    let mut dx = backward_direction(&traces[0], d_fwd, &layer.fwd, &mut grads.fwd);
    let dx_b = backward_direction(&traces[1], d_bwd, &layer.bwd, &mut grads.bwd).reversed_rows();
    dx.data_mut().iter_mut().zip(dx_b.data()).for_each(|(a, &b)| *a += b);
    dx
}

/// Accumulates the parameter gradients for a loss whose gradient with
/// respect to the logits is `grad_logits`.
pub fn backward_logits_into<F: Real>(
    trace: &ForwardTrace<F>,
    grad_logits: &[F],
    params: &ModelParams<F>,
    grads: &mut ModelParams<F>,
) -> Result<()> {
    if grad_logits.len() != ModelConfig::NUM_CLASSES || grads.config != params.config {
        return Err(Error::Shape("gradient buffers do not match the model".into()));
    }
    grads
        .dense_b
        .data_mut()
        .iter_mut()
        .zip(grad_logits)
        .for_each(|(g, &d)| *g += d);
    outer_acc(&trace.final_h, grad_logits, &mut grads.dense_w);
    let mut d_final = vec![F::zero(); trace.final_h.len()];
    mat_vec_t_acc(&params.dense_w, grad_logits, &mut d_final);

    let steps = trace.indices.len();
    let h3 = params.config.hidden[2];
    let mut d_f = Tensor::zeros(&[steps, h3]);
    let mut d_b = Tensor::zeros(&[steps, h3]);
    d_f.row_mut(steps - 1).copy_from_slice(&d_final[..h3]);
    d_b.row_mut(steps - 1).copy_from_slice(&d_final[h3..]);
    let mut d_out2 = backward_bidirectional(&trace.layers[2], &d_f, &d_b, &params.layers[2], &mut grads.layers[2]);

    if let Some(mask) = &trace.between {
        d_out2
            .data_mut()
            .iter_mut()
            .zip(mask.data())
            .for_each(|(v, &k)| *v *= k);
    }
    let (d_f, d_b) = split_directions(&d_out2, params.config.hidden[1]);
    let d_out1 = backward_bidirectional(&trace.layers[1], &d_f, &d_b, &params.layers[1], &mut grads.layers[1]);

    let (d_f, d_b) = split_directions(&d_out1, params.config.hidden[0]);
    let d_emb = backward_bidirectional(&trace.layers[0], &d_f, &d_b, &params.layers[0], &mut grads.layers[0]);

    for (t, &idx) in trace.indices.iter().enumerate() {
        grads
            .embedding
            .row_mut(idx)
            .iter_mut()
            .zip(d_emb.row(t))
            .for_each(|(g, &d)| *g += d);
    }
    Ok(())
}

/// Exact gradients of a scalar loss given its gradient with respect to the
/// output probabilities.
pub fn backward<F: Real>(
    trace: Option<&ForwardTrace<F>>,
    grad_probs: &[F],
    params: &ModelParams<F>,
) -> Result<ModelParams<F>> {
    let trace = trace.ok_or(Error::MissingTrace)?;
    let p = &trace.probs;
    let dot: F = p.iter().zip(grad_probs).map(|(&a, &b)| a * b).sum();
    let grad_logits: Vec<F> = p.iter().zip(grad_probs).map(|(&pj, &gj)| pj * (gj - dot)).collect();
    let mut grads = params.zeros_like();
    backward_logits_into(trace, &grad_logits, params, &mut grads)?;
    Ok(grads)
}
