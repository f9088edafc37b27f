use ndarray::Array2;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{
    adam_step, argmax_rows, backward, cross_entropy_labels, forward, one_hot_batch, AdamState, MlpModel, Mode,
};
use crate::error::{Error, Result};
use crate::rng::{domain, SimRng};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    pub validation_fraction: f64,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            batch_size: 2000,
            learning_rate: 5e-4,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
            max_epochs: 100,
            early_stop_patience: 2,
            validation_fraction: 0.1,
            seed: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::invalid("batch_size must be >= 1"));
        }
        if !(self.validation_fraction > 0.0 && self.validation_fraction < 1.0) {
            return Err(Error::invalid("validation_fraction must lie in (0, 1)"));
        }
        if !(self.learning_rate > 0.0) || !(self.adam_epsilon > 0.0) {
            return Err(Error::invalid("learning_rate and adam_epsilon must be positive"));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(Error::invalid("Adam betas must lie in [0, 1)"));
        }
        if self.max_epochs == 0 {
            return Err(Error::invalid("max_epochs must be >= 1"));
        }
        Ok(())
    }
}

/// Random-access labeled samples with raw (unscaled) features.
pub trait TrainingSet {
    fn len(&self) -> usize;
    fn feature_width(&self) -> usize;
    fn label(&self, index: usize) -> usize;
    fn write_features(&self, index: usize, out: &mut [f64]);

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

impl TrainingSet for (Array2<f64>, Vec<usize>) {
    fn len(&self) -> usize {
        self.1.len()
    }

    fn feature_width(&self) -> usize {
        self.0.ncols()
    }

    fn label(&self, index: usize) -> usize {
        self.1[index]
    }

    fn write_features(&self, index: usize, out: &mut [f64]) {
        for (o, v) in out.iter_mut().zip(self.0.row(index)) {
            *o = *v;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

/// Stops once the monitored loss has failed to improve for `patience` epochs in a row.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    best: f64,
    best_epoch: usize,
    stale: usize,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: 0,
            stale: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, loss: f64) -> StopDecision {
        if loss < self.best {
            self.best = loss;
            self.best_epoch = epoch;
            self.stale = 0;
            StopDecision::Improved
        } else {
            self.stale += 1;
            if self.stale >= self.patience {
                StopDecision::Stop
            } else {
                StopDecision::Continue
            }
        }
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_loss(&self) -> f64 {
        self.best
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub n_train: usize,
    pub n_validation: usize,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,train_loss,train_accuracy,val_loss,val_accuracy\n");
        for r in &self.epochs {
            s.push_str(&format!(
                "{},{:.8},{:.6},{:.8},{:.6}\n",
                r.epoch, r.train_loss, r.train_accuracy, r.val_loss, r.val_accuracy
            ));
        }
        s
    }
}

fn fill_batch<T: TrainingSet + ?Sized>(data: &T, indices: &[usize], scale: f64, batch: &mut Array2<f64>, labels: &mut Vec<usize>) {
    labels.clear();
    for (row, &i) in indices.iter().enumerate() {
        let mut out = batch.row_mut(row);
        let slice = out.as_slice_mut().unwrap();
        data.write_features(i, slice);
        if scale != 1.0 {
            slice.iter_mut().for_each(|v| *v *= scale);
        }
        labels.push(data.label(i));
    }
}

/// Mean loss and accuracy in inference mode.
fn evaluate<T: TrainingSet + ?Sized>(model: &MlpModel, data: &T, indices: &[usize], batch_size: usize) -> Result<(f64, f64)> {
    let width = data.feature_width();
    let mut labels = Vec::with_capacity(batch_size);
    let (mut loss, mut correct) = (0.0, 0usize);
    for chunk in indices.chunks(batch_size) {
        let mut batch = Array2::zeros((chunk.len(), width));
        fill_batch(data, chunk, model.feature_scale, &mut batch, &mut labels);
        let (probs, _) = forward(model, batch.view(), Mode::Infer)?;
        loss += cross_entropy_labels(probs.view(), &labels) * chunk.len() as f64;
        correct += argmax_rows(probs.view()).iter().zip(&labels).filter(|(p, l)| p == l).count();
    }
    let n = indices.len().max(1) as f64;
    Ok((loss / n, correct as f64 / n))
}

pub fn train<T: TrainingSet + ?Sized>(model: &mut MlpModel, data: &T, cfg: &TrainingConfig) -> Result<TrainingLog> {
    train_with_progress(model, data, cfg, |_| {})
}

/// Mini-batch Adam with early stopping on validation loss.
///
/// The validation split and every epoch's shuffle are drawn from a stream
/// derived from `cfg.seed`, so a fixed seed reproduces the log exactly. On
/// return `model` holds the parameters of the best validation epoch.
pub fn train_with_progress<T, F>(model: &mut MlpModel, data: &T, cfg: &TrainingConfig, mut progress: F) -> Result<TrainingLog>
where
    T: TrainingSet + ?Sized,
    F: FnMut(&EpochRecord),
{
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::invalid("training set is empty"));
    }
    if data.feature_width() != model.arch.input_width() {
        return Err(Error::invalid(format!(
            "training features have width {}, model expects {}",
            data.feature_width(),
            model.arch.input_width()
        )));
    }
    let n_classes = model.arch.n_classes();
    if let Some(bad) = (0..data.len()).map(|i| data.label(i)).find(|&l| l >= n_classes) {
        return Err(Error::invalid(format!("label {bad} out of range for {n_classes} classes")));
    }

    let mut rng = SimRng::substream(cfg.seed, domain::TRAINING, 0);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(&mut rng);
    let n_val = if data.len() < 2 {
        0
    } else {
        ((data.len() as f64 * cfg.validation_fraction).round() as usize).clamp(1, data.len() - 1)
    };
    let (val_idx, train_idx) = order.split_at(n_val);
    let val_idx = val_idx.to_vec();
    let mut train_idx = train_idx.to_vec();

    let mut adam = AdamState::new(model, cfg.learning_rate, cfg.adam_beta1, cfg.adam_beta2, cfg.adam_epsilon);
    let mut stopper = EarlyStopping::new(cfg.early_stop_patience.max(1));
    let mut best = model.clone();
    let mut log = TrainingLog {
        n_train: train_idx.len(),
        n_validation: val_idx.len(),
        ..TrainingLog::default()
    };
    let width = data.feature_width();
    let mut labels = Vec::with_capacity(cfg.batch_size);
    let mut step = 0u64;

    for epoch in 0..cfg.max_epochs {
        train_idx.shuffle(&mut rng);
        let (mut loss_sum, mut correct) = (0.0, 0usize);
        for chunk in train_idx.chunks(cfg.batch_size) {
            let mut batch = Array2::zeros((chunk.len(), width));
            fill_batch(data, chunk, model.feature_scale, &mut batch, &mut labels);
            let (probs, cache) = forward(model, batch.view(), Mode::Train)?;
            let cache = cache.expect("train mode caches activations");
            loss_sum += cross_entropy_labels(probs.view(), &labels) * chunk.len() as f64;
            correct += argmax_rows(probs.view()).iter().zip(&labels).filter(|(p, l)| p == l).count();
            let targets = one_hot_batch(&labels, n_classes)?;
            let grads = backward(model, &cache, targets.view())?;
            step += 1;
            adam_step(model, &grads, &mut adam, step)?;
            model.update_running_stats(&cache);
        }
        let n_train = train_idx.len() as f64;
        let (val_loss, val_accuracy) = if val_idx.is_empty() {
            (loss_sum / n_train, correct as f64 / n_train)
        } else {
            evaluate(model, data, &val_idx, cfg.batch_size)?
        };
        if !val_loss.is_finite() {
            return Err(Error::invalid(format!("validation loss diverged at epoch {epoch}")));
        }
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / n_train,
            train_accuracy: correct as f64 / n_train,
            val_loss,
            val_accuracy,
        };
        progress(&record);
        log.epochs.push(record);
        match stopper.observe(epoch, val_loss) {
            StopDecision::Improved => best = model.clone(),
            StopDecision::Continue => {}
            StopDecision::Stop => break,
        }
    }
    log.best_epoch = stopper.best_epoch();
    *model = best;
    Ok(log)
}
