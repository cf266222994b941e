//! SGD step with optimizer variants, max-norm projection, and the
//! epoch training loop with validation-based model selection.

use rand::seq::SliceRandom;

use crate::dataset::{Label, LabeledRow};
use crate::eval::confusion;
use crate::seed::{derive_seed, stream_rng};

use super::{ArchSpec, DetectorError, Gradients, Model, OptimizerKind, TrainConfig};

/// Per-parameter optimizer state (momentum velocity, Adam moments).
#[derive(Debug, Clone)]
pub struct OptimizerState {
    velocity: Vec<f64>,
    adam_m: Vec<f64>,
    adam_v: Vec<f64>,
    step: u64,
}

const MOMENTUM: f64 = 0.9;
const ADAM_BETA1: f64 = 0.9;
const ADAM_BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;

impl OptimizerState {
    pub fn new(param_count: usize) -> Self {
        OptimizerState {
            velocity: vec![0.0; param_count],
            adam_m: vec![0.0; param_count],
            adam_v: vec![0.0; param_count],
            step: 0,
        }
    }
}

/// Applies one optimizer update then the per-row max-norm projection.
pub fn sgd_step(
    model: &mut Model,
    gradients: &Gradients,
    config: &TrainConfig,
    state: &mut OptimizerState,
) {
    state.step += 1;
    let eta = config.learning_rate;
    match config.optimizer {
        OptimizerKind::Sgd => {
            model.zip_params_mut(gradients, |_, w, g| {
                *w -= eta * g;
            });
        }
        OptimizerKind::Momentum => {
            let velocity = &mut state.velocity;
            model.zip_params_mut(gradients, |i, w, g| {
                velocity[i] = MOMENTUM * velocity[i] + g;
                *w -= eta * velocity[i];
            });
        }
        OptimizerKind::Adam => {
            let t = state.step as i32;
            let bias1 = 1.0 - ADAM_BETA1.powi(t);
            let bias2 = 1.0 - ADAM_BETA2.powi(t);
            let (m, v) = (&mut state.adam_m, &mut state.adam_v);
            model.zip_params_mut(gradients, |i, w, g| {
                m[i] = ADAM_BETA1 * m[i] + (1.0 - ADAM_BETA1) * g;
                v[i] = ADAM_BETA2 * v[i] + (1.0 - ADAM_BETA2) * g * g;
                let m_hat = m[i] / bias1;
                let v_hat = v[i] / bias2;
                *w -= eta * m_hat / (v_hat.sqrt() + ADAM_EPS);
            });
        }
    }

    if config.max_norm > 0.0 {
        let j = config.max_norm;
        model.for_each_weight_row_mut(|row| {
            let norm: f64 = row.iter().map(|w| w * w).sum::<f64>().sqrt();
            if norm > j {
                let scale = j / norm;
                for w in row {
                    *w *= scale;
                }
            }
        });
    }
}

/// One epoch's summary in the training history.
#[derive(Debug, Clone, Copy)]
pub struct EpochStats {
    pub epoch: u32,
    pub train_loss: f64,
    pub val_dr: f64,
    pub val_fa: f64,
    pub val_acc: f64,
    pub val_hd: f64,
}

/// The trained model (best epoch by validation HD) and the full history.
#[derive(Debug, Clone)]
pub struct TrainReport {
    pub model: Model,
    pub history: Vec<EpochStats>,
}

/// Epoch loop of shuffled mini-batches; keeps the epoch-best model by
/// validation HD.
pub fn train(
    arch: &ArchSpec,
    train_set: &[LabeledRow],
    valid_set: &[LabeledRow],
    config: &TrainConfig,
) -> Result<TrainReport, DetectorError> {
    if train_set.is_empty() {
        return Err(DetectorError::EmptySet("train"));
    }
    if valid_set.is_empty() {
        return Err(DetectorError::EmptySet("valid"));
    }

    let mut model = Model::build(arch, config.init, derive_seed(config.seed, &[0x141]));
    let mut state = OptimizerState::new(model.param_count());
    let mut history = Vec::with_capacity(config.epochs as usize);
    let mut best: Option<(f64, Model)> = None;

    let mut order: Vec<usize> = (0..train_set.len()).collect();
    for epoch in 0..config.epochs {
        let mut rng = stream_rng(config.seed, &[0x54f, epoch as u64]);
        order.shuffle(&mut rng);

        let mut loss_sum = 0.0;
        for (batch_idx, chunk) in order.chunks(config.batch_size.max(1)).enumerate() {
            let batch: Vec<(&[f64], Label)> = chunk
                .iter()
                .map(|&i| (train_set[i].features.as_slice(), train_set[i].label))
                .collect();
            let dropout_seed = derive_seed(config.seed, &[0xd0, epoch as u64, batch_idx as u64]);
            let (loss, grads) = model.loss_and_gradients(&batch, config, dropout_seed)?;
            if loss.is_nan() {
                return Err(DetectorError::Diverged { epoch });
            }
            loss_sum += loss * batch.len() as f64;
            sgd_step(&mut model, &grads, config, &mut state);
        }

        let stats = validate(&model, valid_set, epoch, loss_sum / train_set.len() as f64)?;
        if best.as_ref().is_none_or(|(hd, _)| stats.val_hd > *hd) {
            best = Some((stats.val_hd, model.clone()));
        }
        history.push(stats);
    }

    let (_, best_model) = best.expect("at least one epoch");
    Ok(TrainReport {
        model: best_model,
        history,
    })
}

/// Validation metrics with safe fallbacks for undefined denominators
/// (a model that predicts a single class early in training).
fn validate(
    model: &Model,
    valid_set: &[LabeledRow],
    epoch: u32,
    train_loss: f64,
) -> Result<EpochStats, DetectorError> {
    let labels: Vec<Label> = valid_set.iter().map(|r| r.label).collect();
    let mut predicted = Vec::with_capacity(valid_set.len());
    for row in valid_set {
        predicted.push(model.predict(&row.features)?.label());
    }
    let c = confusion(&labels, &predicted).expect("non-empty, equal lengths");
    let safe = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
    let dr = safe(c.true_pos, c.true_pos + c.false_pos);
    let fa = safe(c.false_pos, c.false_pos + c.true_neg);
    Ok(EpochStats {
        epoch,
        train_loss,
        val_dr: dr,
        val_fa: fa,
        val_acc: safe(c.true_pos + c.true_neg, c.total()),
        val_hd: dr - fa,
    })
}
