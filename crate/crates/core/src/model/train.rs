use super::metrics::{cross_entropy, score, Metric};
use super::network::{Dropout, SplineNet};
use super::optim::Adam;
use crate::error::{Error, Result};
use crate::spline::Spline;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainSettings {
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub metric: Metric,
    pub weight_decay: f64,
    /// Dropout on the classifier input; 0 disables it.
    pub dropout: f64,
    pub seed: u64,
    pub threads: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        TrainSettings {
            learning_rate: 1e-2,
            epochs: 100,
            batch_size: 32,
            patience: 15,
            metric: Metric::Accuracy,
            weight_decay: 0.0,
            dropout: 0.0,
            seed: 0,
            threads: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_metric: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub best_metric: f64,
    pub stopped_early: bool,
}

/// A prepared example: fitted spline and label.
pub type Example = (Spline, usize);

/// Builds a pool with `threads` workers (0 means one).
pub fn thread_pool(threads: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))
}

/// Inference-mode probabilities for a whole set, in order.
pub fn predict_all(model: &SplineNet, data: &[Example], chunk: usize) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(data.len());
    for part in data.chunks(chunk.max(1)) {
        let splines: Vec<Spline> = part.iter().map(|(s, _)| s.clone()).collect();
        out.extend(model.predict(&splines)?);
    }
    Ok(out)
}

pub fn evaluate(model: &SplineNet, data: &[Example], metric: Metric) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let probs = predict_all(model, data, 256)?;
    let labels: Vec<usize> = data.iter().map(|e| e.1).collect();
    score(&probs, &labels, metric)
}

fn check_finite(model: &SplineNet) -> Result<()> {
    match model.params().first_non_finite() {
        Some(name) => Err(Error::NonFinite(name.to_string())),
        None => Ok(()),
    }
}

/// Minibatch Adam with seeded shuffling and early stopping on the
/// validation metric. Returns the best-validation model and the history.
pub fn train(
    model: &SplineNet,
    train_set: &[Example],
    val_set: &[Example],
    settings: &TrainSettings,
) -> Result<(SplineNet, History)> {
    if train_set.is_empty() {
        return Err(Error::EmptyBatch);
    }
    if settings.batch_size == 0 {
        return Err(Error::Config("batch_size must be at least 1".into()));
    }
    if !(0.0..1.0).contains(&settings.dropout) {
        return Err(Error::Config("dropout must lie in [0, 1)".into()));
    }
    let pool = thread_pool(settings.threads)?;
    pool.install(|| train_inner(model, train_set, val_set, settings))
}

fn train_inner(
    model: &SplineNet,
    train_set: &[Example],
    val_set: &[Example],
    settings: &TrainSettings,
) -> Result<(SplineNet, History)> {
    let mut model = model.clone();
    let mut opt = Adam::new(model.params(), settings.learning_rate);
    opt.weight_decay = settings.weight_decay;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let val_labels: Vec<usize> = val_set.iter().map(|e| e.1).collect();

    let mut history = History {
        best_metric: f64::NEG_INFINITY,
        ..History::default()
    };
    let mut best = model.clone();
    let mut best_loss = f64::INFINITY;
    let mut stale = 0;
    let mut batch_no = 0u64;

    for epoch in 0..settings.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for idx in order.chunks(settings.batch_size) {
            let batch: Vec<(&Spline, usize)> = idx.iter().map(|&i| (&train_set[i].0, train_set[i].1)).collect();
            let dropout = (settings.dropout > 0.0).then(|| Dropout {
                rate: settings.dropout,
                seed: settings.seed ^ batch_no.wrapping_mul(0x9E37_79B9_7F4A_7C15),
            });
            batch_no += 1;
            let lg = model.loss_and_grad_with(&batch, dropout)?;
            if !lg.loss.is_finite() {
                let name = model
                    .params()
                    .first_non_finite()
                    .or(lg.grads.first_non_finite())
                    .unwrap_or("loss");
                return Err(Error::NonFinite(name.to_string()));
            }
            if let Some(name) = model.params().first_non_finite().or(lg.grads.first_non_finite()) {
                return Err(Error::NonFinite(name.to_string()));
            }
            opt.step(model.params_mut(), &lg.grads);
            check_finite(&model)?;
            model.update_running_stats(&lg.area_means);
            loss_sum += lg.loss * idx.len() as f64;
        }
        let train_loss = loss_sum / train_set.len() as f64;

        let (val_loss, val_metric) = if val_set.is_empty() {
            (train_loss, -train_loss)
        } else {
            let probs = predict_all(&model, val_set, 256)?;
            (cross_entropy(&probs, &val_labels), score(&probs, &val_labels, settings.metric)?)
        };
        if !val_loss.is_finite() {
            return Err(Error::NonFinite("validation loss".into()));
        }
        history.epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_metric,
        });
        let improved = val_metric > history.best_metric
            || (val_metric == history.best_metric && val_loss < best_loss);
        if improved {
            history.best_metric = val_metric;
            history.best_epoch = epoch;
            best_loss = val_loss;
            best = model.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= settings.patience {
                history.stopped_early = true;
                break;
            }
        }
    }
    Ok((best, history))
}
