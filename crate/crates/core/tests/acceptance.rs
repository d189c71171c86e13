//! Acceptance criteria. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use offtarget_core::metrics::{confusion, macro_average, report, ConfusionMatrix};
use offtarget_core::optimizer::{
    class_weights, evaluate, train, write_history, ClassWeights, EarlyStopping, NadamConfig, NadamState, TrainConfig,
};
use offtarget_core::rng;
use offtarget_core::tensorcore::{write_model, DropoutMasks, TABLE_DENSE_PARAMS};
use offtarget_core::textprep::preprocess;
use offtarget_core::{EmoticonTable, Label, LabelCounts, ModelConfig, ModelParams, Tensor};
use rand_xoshiro::SplitMix64;

// Pinned tolerances and budgets.
const GRAD_REL_TOL: f64 = 1e-4;
const NADAM_FIRST_STEP: f64 = 0.0019;
const NADAM_FIRST_STEP_TOL: f64 = 1e-6;
const NADAM_TRAJECTORY_TOL: f64 = 1e-10;
const NADAM_TRAJECTORY_STEPS: usize = 100;
const OVERFIT_ACC: f64 = 0.99;
const OVERFIT_MAX_EPOCHS: usize = 200;
const WEIGHT_REL_TOL: f64 = 1e-9;
const TABLE_MACRO_F1: f64 = 0.4776;
const MACRO_F1_ROUNDING_TOL: f64 = 0.01;
const METRIC_ORACLE_TOL: f64 = 1e-12;
const METRIC_ORACLE_CASES: usize = 1000;
const FUZZ_CASES: usize = 10_000;

const BUDGET_COUNTS: Duration = Duration::from_secs(1);
const BUDGET_GRADIENT: Duration = Duration::from_secs(120);
const BUDGET_NADAM: Duration = Duration::from_secs(1);
const BUDGET_OVERFIT: Duration = Duration::from_secs(300);

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn within_budget(detail: String, start: Instant, budget: Duration) -> Outcome {
    let took = start.elapsed();
    if took > budget {
        Err(format!("{detail}; took {took:.2?}, budget {budget:?}"))
    } else {
        Ok(format!("{detail} ({took:.2?})"))
    }
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn parameter_counts() -> Outcome {
    let start = Instant::now();
    let model = ModelParams::<f32>::zeros(ModelConfig::full(50_000)).map_err(|e| e.to_string())?;
    let c = model.param_count();
    check(c.embedding == 6_400_000, || format!("embedding {}", c.embedding))?;
    check(c.bilstm == [263_168, 1_050_624, 656_384], || {
        format!("bilstm {:?}", c.bilstm)
    })?;
    check(c.dense == 771, || format!("dense {}", c.dense))?;
    let summary = model.summary(100).to_string();
    check(
        summary.contains("771") && summary.contains(&TABLE_DENSE_PARAMS.to_string()),
        || "summary does not document the dense-layer discrepancy".into(),
    )?;
    within_budget(
        format!(
            "embedding {} bilstm {}/{}/{} dense {} (listed {TABLE_DENSE_PARAMS})",
            c.embedding, c.bilstm[0], c.bilstm[1], c.bilstm[2], c.dense
        ),
        start,
        BUDGET_COUNTS,
    )
}

fn gradient_check() -> Outcome {
    let start = Instant::now();
    let plain = common::gradient_check(None, 21);
    let masks = DropoutMasks::sample(&ModelConfig::reduced(50), 7, &mut rng::seeded(99)).map_err(|e| e.to_string())?;
    let masked = common::gradient_check(Some(masks), 22);
    for (what, r) in [("no dropout", &plain), ("frozen masks", &masked)] {
        check(r.max_rel < GRAD_REL_TOL, || {
            format!("{what}: max relative error {:e} at {}", r.max_rel, r.worst_at)
        })?;
    }
    within_budget(
        format!(
            "{} parameters, max relative error {:.2e} / {:.2e} (tolerance {GRAD_REL_TOL:e})",
            plain.checked, plain.max_rel, masked.max_rel
        ),
        start,
        BUDGET_GRADIENT,
    )
}

/// Scalar Nadam written out directly from its recurrences.
fn reference_nadam(theta0: f64, steps: usize) -> Vec<f64> {
    let (lr, b1, b2, eps) = (0.001, 0.9, 0.999, 1e-8);
    let (mut theta, mut m, mut v) = (theta0, 0.0, 0.0);
    let mut path = Vec::with_capacity(steps);
    for t in 1..=steps {
        let g = 2.0 * theta;
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let m_hat = m / (1.0 - f64::powi(b1, t as i32));
        let v_hat = v / (1.0 - f64::powi(b2, t as i32));
        let g_hat = g / (1.0 - f64::powi(b1, t as i32));
        theta -= lr * (b1 * m_hat + (1.0 - b1) * g_hat) / (v_hat.sqrt() + eps);
        path.push(theta);
    }
    path
}

fn nadam_oracle() -> Outcome {
    let start = Instant::now();
    let mut state = NadamState::<f64>::new(NadamConfig::default(), [1]);
    let mut theta = Tensor::from_vec(&[1], vec![0.0]).unwrap();
    let g = Tensor::from_vec(&[1], vec![1.0]).unwrap();
    state
        .apply(&mut [&mut theta], &[&g])
        .map_err(|k| format!("array {k} rejected"))?;
    let step = -theta.data()[0];
    check((step - NADAM_FIRST_STEP).abs() <= NADAM_FIRST_STEP_TOL, || {
        format!("first step {step}")
    })?;

    let expected = reference_nadam(1.0, NADAM_TRAJECTORY_STEPS);
    let mut state = NadamState::<f64>::new(NadamConfig::default(), [1]);
    let mut theta = Tensor::from_vec(&[1], vec![1.0]).unwrap();
    let mut worst = 0.0f64;
    for want in &expected {
        let g = Tensor::from_vec(&[1], vec![2.0 * theta.data()[0]]).unwrap();
        state
            .apply(&mut [&mut theta], &[&g])
            .map_err(|k| format!("array {k} rejected"))?;
        worst = worst.max((theta.data()[0] - want).abs());
    }
    check(worst <= NADAM_TRAJECTORY_TOL, || {
        format!("trajectory deviates by {worst:e}")
    })?;
    within_budget(
        format!("first step {step:.10}, {NADAM_TRAJECTORY_STEPS}-step trajectory max deviation {worst:.1e}"),
        start,
        BUDGET_NADAM,
    )
}

fn overfit() -> Outcome {
    let start = Instant::now();
    let data = common::synthetic(1);
    let params = ModelParams::<f32>::init(ModelConfig::reduced(50), 7).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        max_epochs: OVERFIT_MAX_EPOCHS,
        batch_size: 1,
        seed: 3,
    };
    let out = train(&data, &data, params, &cfg, &ClassWeights::uniform()).map_err(|e| e.to_string())?;
    let (_, acc) = evaluate(&out.params, &data).map_err(|e| e.to_string())?;
    let first = out.history.iter().find(|r| r.val_acc >= OVERFIT_ACC).map(|r| r.epoch);
    check(acc >= OVERFIT_ACC, || {
        format!("training accuracy {acc} after {} epochs", out.history.len())
    })?;
    within_budget(
        format!(
            "training accuracy {acc:.3} (first reached at epoch {}, limit {OVERFIT_MAX_EPOCHS})",
            first.map_or("-".into(), |e| e.to_string())
        ),
        start,
        BUDGET_OVERFIT,
    )
}

fn class_weight_identities() -> Outcome {
    let counts = LabelCounts::new(28319, 4619, 2062);
    let w = class_weights(&counts).map_err(|e| e.to_string())?;
    let products: Vec<f64> = Label::ALL.iter().map(|&l| w.get(l) * counts.get(l) as f64).collect();
    let worst = products
        .iter()
        .map(|p| (p - products[0]).abs() / products[0])
        .fold(0.0, f64::max);
    check(worst <= WEIGHT_REL_TOL, || format!("weight*count spread {worst:e}"))?;
    let ratio = w.get(Label::Oth) / w.get(Label::Ind);
    let want = 28319.0 / 2062.0;
    let ratio_err = (ratio - want).abs() / want;
    check(ratio_err <= WEIGHT_REL_TOL, || {
        format!("OTH/IND ratio {ratio} vs {want}")
    })?;
    Ok(format!(
        "weights IND {:.4} GRP {:.4} OTH {:.4}; product spread {worst:.1e}, ratio error {ratio_err:.1e}",
        w.get(Label::Ind),
        w.get(Label::Grp),
        w.get(Label::Oth)
    ))
}

/// Per-definition metrics computed from the expanded label pairs.
fn brute_force(gold: &[Label], pred: &[Label]) -> ([f64; 3], [f64; 3], [f64; 3], f64, f64) {
    let n = gold.len() as f64;
    let (mut p, mut r, mut f) = ([0.0; 3], [0.0; 3], [0.0; 3]);
    for c in Label::ALL {
        let k = c.index();
        let tp = gold.iter().zip(pred).filter(|(g, q)| **g == c && **q == c).count() as f64;
        let fp = gold.iter().zip(pred).filter(|(g, q)| **g != c && **q == c).count() as f64;
        let fnn = gold.iter().zip(pred).filter(|(g, q)| **g == c && **q != c).count() as f64;
        p[k] = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        r[k] = if tp + fnn > 0.0 { tp / (tp + fnn) } else { 0.0 };
        f[k] = if p[k] + r[k] > 0.0 {
            2.0 * p[k] * r[k] / (p[k] + r[k])
        } else {
            0.0
        };
    }
    let agree = gold.iter().zip(pred).filter(|(g, q)| g == q).count() as f64 / n;
    let chance: f64 = Label::ALL
        .iter()
        .map(|c| {
            let in_gold = gold.iter().filter(|g| *g == c).count() as f64 / n;
            let in_pred = pred.iter().filter(|q| *q == c).count() as f64 / n;
            in_gold * in_pred
        })
        .sum();
    let kappa = if chance == 1.0 {
        0.0
    } else {
        (agree - chance) / (1.0 - chance)
    };
    (p, r, f, agree, kappa)
}

fn metrics_oracle() -> Outcome {
    let table_f1 = macro_average([0.54, 0.85, 0.05]);
    check((table_f1 - 0.48).abs() < 1e-12, || format!("macro F1 {table_f1}"))?;
    check((table_f1 - TABLE_MACRO_F1).abs() <= MACRO_F1_ROUNDING_TOL, || {
        format!("macro F1 {table_f1} vs {TABLE_MACRO_F1}")
    })?;

    let mut constant = ConfusionMatrix::default();
    constant.counts[0][0] = 580;
    constant.counts[1][0] = 190;
    constant.counts[2][0] = 80;
    let r = report(&constant).map_err(|e| e.to_string())?;
    check(r.kappa == 0.0, || format!("constant-prediction kappa {}", r.kappa))?;

    let mut rng = rng::seeded(2024);
    let mut worst = 0.0f64;
    for _ in 0..METRIC_ORACLE_CASES {
        let (mut gold, mut pred) = (Vec::new(), Vec::new());
        for g in Label::ALL {
            for p in Label::ALL {
                // a third of the cells empty, to reach the zero-division paths
                let u = rng::unit_f64(&mut rng);
                let n = if u < 0.33 {
                    0
                } else {
                    (rng::unit_f64(&mut rng) * 40.0) as usize
                };
                gold.extend(std::iter::repeat_n(g, n));
                pred.extend(std::iter::repeat_n(p, n));
            }
        }
        if gold.is_empty() {
            gold.push(Label::Oth);
            pred.push(Label::Ind);
        }
        let r = report(&confusion(&gold, &pred).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        let (p, rc, f, acc, kappa) = brute_force(&gold, &pred);
        let mut diffs = vec![(r.accuracy - acc).abs(), (r.kappa - kappa).abs()];
        diffs.push((r.macro_precision - p.iter().sum::<f64>() / 3.0).abs());
        diffs.push((r.macro_recall - rc.iter().sum::<f64>() / 3.0).abs());
        diffs.push((r.macro_f1 - f.iter().sum::<f64>() / 3.0).abs());
        for k in 0..3 {
            diffs.push((r.per_class[k].precision - p[k]).abs());
            diffs.push((r.per_class[k].recall - rc[k]).abs());
            diffs.push((r.per_class[k].f1 - f[k]).abs());
        }
        worst = diffs.into_iter().fold(worst, f64::max);
    }
    check(worst <= METRIC_ORACLE_TOL, || format!("oracle deviation {worst:e}"))?;
    Ok(format!(
        "macro F1 {table_f1:.4} (listed {TABLE_MACRO_F1}); constant kappa {}; {METRIC_ORACLE_CASES} random matrices max deviation {worst:.1e}",
        r.kappa
    ))
}

fn below(r: &mut SplitMix64, n: usize) -> usize {
    (rng::unit_f64(r) * n as f64) as usize
}

fn fuzz_text(r: &mut SplitMix64) -> String {
    const PIECES: &[&str] = &[
        "@",
        "@user",
        ":",
        "-",
        ")",
        "(",
        ";",
        ",",
        "C",
        "D",
        "P",
        "<3",
        ":-)",
        ",-)",
        ":@",
        ";-(",
        "X",
        "XX",
        "xxx",
        "http://",
        "https://t.co/",
        "www.",
        "x.com",
        " ",
        "  ",
        "\t",
        "\n",
        "a",
        "you",
        "them",
        "é",
        "😂",
        "_",
        "!",
        "?",
        ".",
        "/",
        "'",
        "1",
    ];
    let len = below(r, 25);
    (0..len).map(|_| PIECES[below(r, PIECES.len())]).collect()
}

fn preprocessing() -> Outcome {
    let table = EmoticonTable::bundled();
    let golden = [
        (",-)", "winking happy"),
        (":-C", "real unhappy"),
        (";-(", "crying"),
        ("XX", "sexual"),
        ("XXX", "sexual"),
        ("so XX today", "so sexual today"),
        ("XXXX", "XXXX"),
    ];
    for (input, want) in golden {
        let got = preprocess(input, &table);
        check(got == want, || format!("{input:?} -> {got:?}, expected {want:?}"))?;
    }
    let mut rng = rng::seeded(7);
    for case in 0..FUZZ_CASES {
        let s = fuzz_text(&mut rng);
        let once = preprocess(&s, &table);
        let twice = preprocess(&once, &table);
        check(once == twice, || format!("case {case}: {s:?} -> {once:?} -> {twice:?}"))?;
    }
    Ok(format!(
        "{} golden mappings byte-exact; idempotent on {FUZZ_CASES} fuzz cases",
        golden.len()
    ))
}

fn early_stopping() -> Outcome {
    let losses = [1.0, 0.8, 0.9, 1.1];
    let accs = [0.5, 0.6, 0.55, 0.5];
    let mut stopper = EarlyStopping::new();
    let mut stopped_at = None;
    for (e, (&l, &a)) in losses.iter().zip(&accs).enumerate() {
        let epoch = e + 1;
        let checkpoint = ModelParams::<f32>::init(ModelConfig::reduced(20), epoch as u64).map_err(|e| e.to_string())?;
        if stopper.observe(epoch, l, a, &checkpoint) {
            stopped_at = Some(epoch);
            break;
        }
    }
    check(stopped_at == Some(4), || format!("stopped at {stopped_at:?}"))?;
    let (best_epoch, best) = stopper.into_best().ok_or("no checkpoint kept")?;
    let epoch2 = ModelParams::<f32>::init(ModelConfig::reduced(20), 2).map_err(|e| e.to_string())?;
    check(best_epoch == 2 && best == epoch2, || format!("kept epoch {best_epoch}"))?;
    Ok("stopped after epoch 4, kept the epoch-2 checkpoint".into())
}

fn train_bytes() -> Result<(Vec<u8>, Vec<u8>), String> {
    let data = common::synthetic(5);
    let val = common::synthetic(6);
    let params = ModelParams::<f32>::init(ModelConfig::reduced(50), 13).map_err(|e| e.to_string())?;
    let cfg = TrainConfig {
        max_epochs: 25,
        batch_size: 4,
        seed: 17,
    };
    let weights = class_weights(&LabelCounts::new(10, 10, 10)).map_err(|e| e.to_string())?;
    let out = train(&data, &val, params, &cfg, &weights).map_err(|e| e.to_string())?;
    let (mut history, mut model) = (Vec::new(), Vec::new());
    write_history(&out.history, &mut history).map_err(|e| e.to_string())?;
    write_model(&out.params, &mut model).map_err(|e| e.to_string())?;
    Ok((history, model))
}

fn determinism() -> Outcome {
    let (h1, m1) = train_bytes()?;
    let (h2, m2) = train_bytes()?;
    check(h1 == h2, || "history CSV differs between runs".into())?;
    check(m1 == m2, || "model file differs between runs".into())?;
    Ok(format!(
        "history ({} bytes) and model ({} bytes) identical across two runs",
        h1.len(),
        m1.len()
    ))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 9] = [
        ("parameter counts", parameter_counts),
        ("gradient check", gradient_check),
        ("Nadam oracle", nadam_oracle),
        ("overfit smoke test", overfit),
        ("class weights", class_weight_identities),
        ("metrics oracle", metrics_oracle),
        ("preprocessing golden and idempotence", preprocessing),
        ("early stopping", early_stopping),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (n, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("PASS  {}. {name}: {detail}", n + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL  {}. {name}: {detail}", n + 1);
            }
        }
    }
    println!(
        "{} of {} acceptance criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
