#![allow(dead_code)]

use offtarget_core::optimizer::{class_weights, weighted_cross_entropy, Sample};
use offtarget_core::rng;
use offtarget_core::tensorcore::{backward_logits_into, forward_with_masks, DropoutMasks};
use offtarget_core::{Label, LabelCounts, ModelConfig, ModelParams};

pub const FD_STEP: f64 = 1e-4;
/// Central differences at this step carry about 1e-12 of roundoff, so
/// gradients below this magnitude are compared on an absolute scale.
pub const REL_FLOOR: f64 = 1e-7;

/// Ten length-7 sequences per class; class `c` draws from its own token
/// range and every third token is shared noise.
pub fn synthetic(seed: u64) -> Vec<Sample> {
    let mut r = rng::seeded(seed);
    let mut out = Vec::new();
    for label in Label::ALL {
        let base = 10 + 10 * label.index();
        for _ in 0..10 {
            let indices = (0..7)
                .map(|t| {
                    let u = rng::unit_f64(&mut r);
                    if t % 3 == 2 {
                        40 + (u * 10.0) as usize
                    } else {
                        base + (u * 10.0) as usize
                    }
                })
                .collect();
            out.push(Sample { indices, label });
        }
    }
    out
}

/// Relative error with the denominator floored so that two vanishing
/// gradients compare as equal.
pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(REL_FLOOR)
}

/// Every parameter uniform in ±0.5; the default initialization keeps the
/// embedding within ±0.05, which pushes early-layer gradients down to the
/// finite-difference noise floor.
pub fn probe_point(seed: u64) -> ModelParams<f64> {
    let mut params = ModelParams::<f64>::zeros(ModelConfig::reduced(50)).unwrap();
    let mut r = rng::seeded(seed);
    for array in params.arrays_mut() {
        for v in array.data_mut() {
            *v = rng::unit_f64(&mut r) - 0.5;
        }
    }
    params
}

pub struct GradCheck {
    pub checked: usize,
    pub max_rel: f64,
    pub worst_at: String,
    /// Plain relative error restricted to components with |g| >= 1e-4.
    pub max_rel_large: f64,
}

/// Compares every analytic parameter gradient of the weighted loss against
/// central finite differences on the reduced model at T = 7.
pub fn gradient_check(masks: Option<DropoutMasks<f64>>, seed: u64) -> GradCheck {
    let params = probe_point(seed);
    let idx = [3, 17, 0, 49, 17, 1, 8];
    let gold = Label::Grp;
    let weights = class_weights(&LabelCounts::new(10, 3, 5)).unwrap();
    let w = weights.get(gold);
    let loss = |p: &ModelParams<f64>| {
        let trace = forward_with_masks(&idx, p, masks.clone()).unwrap();
        -w * trace.probs[gold.index()].ln()
    };

    let trace = forward_with_masks(&idx, &params, masks.clone()).unwrap();
    let (_, grad_logits) = weighted_cross_entropy(&trace.probs, gold, &weights);
    let mut analytic = params.zeros_like();
    backward_logits_into(&trace, &grad_logits, &params, &mut analytic).unwrap();

    let names = ModelParams::<f64>::array_names();
    let mut out = GradCheck {
        checked: 0,
        max_rel: 0.0,
        worst_at: String::new(),
        max_rel_large: 0.0,
    };
    let mut probe = params.clone();
    for (k, name) in names.iter().enumerate() {
        for i in 0..params.arrays()[k].len() {
            let orig = params.arrays()[k].data()[i];
            probe.arrays_mut()[k].data_mut()[i] = orig + FD_STEP;
            let up = loss(&probe);
            probe.arrays_mut()[k].data_mut()[i] = orig - FD_STEP;
            let down = loss(&probe);
            probe.arrays_mut()[k].data_mut()[i] = orig;
            let numeric = (up - down) / (2.0 * FD_STEP);
            let a = analytic.arrays()[k].data()[i];
            out.checked += 1;
            if a.abs() >= 1e-4 {
                out.max_rel_large = out.max_rel_large.max((a - numeric).abs() / a.abs());
            }
            let e = rel_err(a, numeric);
            if e > out.max_rel {
                out.max_rel = e;
                out.worst_at = format!("{name}[{i}]: analytic {a:e}, numeric {numeric:e}");
            }
        }
    }
    out
}
