//! Fully connected classifier mapping channel features to codeword labels.
//!
//! Every hidden layer is `affine → batch norm → LeakyReLU`; the output layer
//! is `affine → softmax`. Training uses cross-entropy on one-hot targets and
//! Adam. All arithmetic is `f64`.

mod adam;
mod io;
mod train;

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

pub use adam::{adam_step, AdamState};
pub use train::{train, train_with_progress, EarlyStopping, EpochRecord, StopDecision, TrainingConfig, TrainingLog, TrainingSet};

/// Floor applied to probabilities inside the log of the loss.
pub const LOG_EPSILON: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MlpArchitecture {
    /// `[input, hidden…, output]`
    pub layer_widths: Vec<usize>,
    pub leaky_slope: f64,
    pub batchnorm_epsilon: f64,
    pub batchnorm_momentum: f64,
}

impl MlpArchitecture {
    /// Codeword classifier shape: three hidden layers halving the width each time.
    pub fn codeword_classifier(input: usize, n_classes: usize) -> Self {
        let half = |d: f64| ((input as f64 / d).round() as usize).max(1);
        Self::with_widths(vec![input, half(2.0), half(4.0), half(8.0), n_classes])
    }

    pub fn with_widths(layer_widths: Vec<usize>) -> Self {
        MlpArchitecture {
            layer_widths,
            leaky_slope: 0.01,
            batchnorm_epsilon: 1e-5,
            batchnorm_momentum: 0.9,
        }
    }

    pub fn input_width(&self) -> usize {
        self.layer_widths[0]
    }

    pub fn n_classes(&self) -> usize {
        *self.layer_widths.last().unwrap()
    }

    pub fn n_hidden(&self) -> usize {
        self.layer_widths.len() - 2
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_widths.len() < 3 {
            return Err(Error::invalid("architecture needs an input, at least one hidden and an output layer"));
        }
        if self.layer_widths.contains(&0) {
            return Err(Error::invalid("layer widths must be >= 1"));
        }
        if !(self.leaky_slope >= 0.0) || !(self.batchnorm_epsilon > 0.0) {
            return Err(Error::invalid("leaky slope must be >= 0 and batch-norm epsilon > 0"));
        }
        if !(self.batchnorm_momentum > 0.0 && self.batchnorm_momentum < 1.0) {
            return Err(Error::invalid("batch-norm momentum must lie in (0, 1)"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct HiddenLayer {
    /// `fan_in × width`
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
    pub running_mean: Array1<f64>,
    pub running_var: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputLayer {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    pub arch: MlpArchitecture,
    pub hidden: Vec<HiddenLayer>,
    pub output: OutputLayer,
    /// Multiplier applied to raw features before the first layer.
    pub feature_scale: f64,
    /// [`crate::codebook::Codebook::layout_hash`] of the codebook the labels refer to.
    pub label_layout_hash: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics in batch norm; activations are cached.
    Train,
    /// Running statistics in batch norm.
    Infer,
}

/// Activations kept from a training-mode forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    /// Input to each layer, including the network input.
    layer_inputs: Vec<Array2<f64>>,
    normalized: Vec<Array2<f64>>,
    pre_activation: Vec<Array2<f64>>,
    inv_std: Vec<Array1<f64>>,
    pub batch_mean: Vec<Array1<f64>>,
    pub batch_var: Vec<Array1<f64>>,
    pub probabilities: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HiddenGradients {
    pub weight: Array2<f64>,
    pub bias: Array1<f64>,
    pub gamma: Array1<f64>,
    pub beta: Array1<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub hidden: Vec<HiddenGradients>,
    pub output_weight: Array2<f64>,
    pub output_bias: Array1<f64>,
}

impl Gradients {
    /// Gradient tensors in the same order as [`MlpModel::parameters_mut`].
    pub fn tensors(&self) -> Vec<&[f64]> {
        let mut out = Vec::with_capacity(4 * self.hidden.len() + 2);
        for h in &self.hidden {
            out.push(h.weight.as_slice().unwrap());
            out.push(h.bias.as_slice().unwrap());
            out.push(h.gamma.as_slice().unwrap());
            out.push(h.beta.as_slice().unwrap());
        }
        out.push(self.output_weight.as_slice().unwrap());
        out.push(self.output_bias.as_slice().unwrap());
        out
    }
}

fn leaky(x: f64, slope: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        slope * x
    }
}

fn softmax_rows(mut logits: Array2<f64>) -> Array2<f64> {
    for mut row in logits.rows_mut() {
        let max = row.fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        row.mapv_inplace(|v| (v - max).exp());
        let sum = row.sum();
        row.mapv_inplace(|v| v / sum);
    }
    logits
}

impl MlpModel {
    /// Zero biases, unit gains, weights drawn from `N(0, 2 / (fan_in (1 + slope²)))`.
    pub fn new<R: Rng + ?Sized>(arch: MlpArchitecture, rng: &mut R) -> Result<Self> {
        arch.validate()?;
        let slope = arch.leaky_slope;
        let mut init = |fan_in: usize, fan_out: usize| {
            let std = (2.0 / (fan_in as f64 * (1.0 + slope * slope))).sqrt();
            Array2::from_shape_simple_fn((fan_in, fan_out), || std * rng.sample::<f64, _>(StandardNormal))
        };
        let widths = &arch.layer_widths;
        let hidden = widths
            .windows(2)
            .take(arch.n_hidden())
            .map(|w| HiddenLayer {
                weight: init(w[0], w[1]),
                bias: Array1::zeros(w[1]),
                gamma: Array1::ones(w[1]),
                beta: Array1::zeros(w[1]),
                running_mean: Array1::zeros(w[1]),
                running_var: Array1::ones(w[1]),
            })
            .collect();
        let k = widths.len();
        let output = OutputLayer {
            weight: init(widths[k - 2], widths[k - 1]),
            bias: Array1::zeros(widths[k - 1]),
        };
        Ok(MlpModel {
            arch,
            hidden,
            output,
            feature_scale: 1.0,
            label_layout_hash: 0,
        })
    }

    /// Mutable parameter tensors: per hidden layer weight, bias, gamma, beta; then output weight, bias.
    pub fn parameters_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = Vec::with_capacity(4 * self.hidden.len() + 2);
        for h in &mut self.hidden {
            out.push(h.weight.as_slice_mut().unwrap());
            out.push(h.bias.as_slice_mut().unwrap());
            out.push(h.gamma.as_slice_mut().unwrap());
            out.push(h.beta.as_slice_mut().unwrap());
        }
        out.push(self.output.weight.as_slice_mut().unwrap());
        out.push(self.output.bias.as_slice_mut().unwrap());
        out
    }

    pub fn parameter_count(&self) -> usize {
        let hidden: usize = self
            .hidden
            .iter()
            .map(|h| h.weight.len() + 3 * h.bias.len())
            .sum();
        hidden + self.output.weight.len() + self.output.bias.len()
    }

    pub fn is_finite(&self) -> bool {
        let hidden_ok = self.hidden.iter().all(|h| {
            [&h.bias, &h.gamma, &h.beta, &h.running_mean, &h.running_var]
                .iter()
                .all(|a| a.iter().all(|v| v.is_finite()))
                && h.weight.iter().all(|v| v.is_finite())
        });
        hidden_ok
            && self.output.weight.iter().all(|v| v.is_finite())
            && self.output.bias.iter().all(|v| v.is_finite())
    }

    /// Folds batch statistics from a training pass into the running estimates.
    pub fn update_running_stats(&mut self, cache: &ForwardCache) {
        let m = self.arch.batchnorm_momentum;
        for ((layer, mean), var) in self.hidden.iter_mut().zip(&cache.batch_mean).zip(&cache.batch_var) {
            Zip::from(&mut layer.running_mean).and(mean).for_each(|r, &b| *r = m * *r + (1.0 - m) * b);
            Zip::from(&mut layer.running_var).and(var).for_each(|r, &b| *r = m * *r + (1.0 - m) * b);
        }
    }
}

pub fn one_hot(label: usize, n_classes: usize) -> Result<Vec<f64>> {
    if label >= n_classes {
        return Err(Error::invalid(format!("label {label} out of range for {n_classes} classes")));
    }
    let mut v = vec![0.0; n_classes];
    v[label] = 1.0;
    Ok(v)
}

/// One-hot rows for a batch of labels.
pub fn one_hot_batch(labels: &[usize], n_classes: usize) -> Result<Array2<f64>> {
    let mut out = Array2::zeros((labels.len(), n_classes));
    for (b, &label) in labels.iter().enumerate() {
        if label >= n_classes {
            return Err(Error::invalid(format!("label {label} out of range for {n_classes} classes")));
        }
        out[(b, label)] = 1.0;
    }
    Ok(out)
}

/// Runs the network. In [`Mode::Train`] the returned cache feeds [`backward`].
pub fn forward(model: &MlpModel, batch: ArrayView2<f64>, mode: Mode) -> Result<(Array2<f64>, Option<ForwardCache>)> {
    if batch.ncols() != model.arch.input_width() {
        return Err(Error::invalid(format!(
            "batch has {} features, model expects {}",
            batch.ncols(),
            model.arch.input_width()
        )));
    }
    if batch.nrows() == 0 {
        return Err(Error::invalid("empty batch"));
    }
    let eps = model.arch.batchnorm_epsilon;
    let slope = model.arch.leaky_slope;
    let train = mode == Mode::Train;

    let mut cache = train.then(|| ForwardCache {
        layer_inputs: Vec::with_capacity(model.hidden.len() + 1),
        normalized: Vec::new(),
        pre_activation: Vec::new(),
        inv_std: Vec::new(),
        batch_mean: Vec::new(),
        batch_var: Vec::new(),
        probabilities: Array2::zeros((0, 0)),
    });

    let mut x = batch.to_owned();
    for layer in &model.hidden {
        let z = x.dot(&layer.weight) + &layer.bias;
        let (mean, var) = if train {
            let mean = z.mean_axis(Axis(0)).unwrap();
            let var = z.var_axis(Axis(0), 0.0);
            (mean, var)
        } else {
            (layer.running_mean.clone(), layer.running_var.clone())
        };
        let inv_std = var.mapv(|v| 1.0 / (v + eps).sqrt());
        let normalized = (z - &mean) * &inv_std;
        let pre = &normalized * &layer.gamma + &layer.beta;
        let activated = pre.mapv(|v| leaky(v, slope));
        if let Some(c) = cache.as_mut() {
            c.layer_inputs.push(std::mem::replace(&mut x, Array2::zeros((0, 0))));
            c.normalized.push(normalized);
            c.pre_activation.push(pre);
            c.inv_std.push(inv_std);
            c.batch_mean.push(mean);
            c.batch_var.push(var);
        }
        x = activated;
    }
    let logits = x.dot(&model.output.weight) + &model.output.bias;
    let probabilities = softmax_rows(logits);
    if let Some(c) = cache.as_mut() {
        c.layer_inputs.push(x);
        c.probabilities = probabilities.clone();
    }
    Ok((probabilities, cache))
}

/// Mean cross-entropy `−(1/B) Σ_b Σ_n t_bn ln(max(y_bn, ε))`.
pub fn cross_entropy(probabilities: ArrayView2<f64>, targets: ArrayView2<f64>) -> Result<f64> {
    if probabilities.dim() != targets.dim() {
        return Err(Error::invalid("probability and target shapes differ"));
    }
    let b = probabilities.nrows();
    if b == 0 {
        return Err(Error::invalid("empty batch"));
    }
    let mut total = 0.0;
    Zip::from(probabilities).and(targets).for_each(|&p, &t| {
        if t != 0.0 {
            total -= t * p.max(LOG_EPSILON).ln();
        }
    });
    Ok(total / b as f64)
}

/// Per-row loss against integer labels, without materializing one-hot rows.
pub fn cross_entropy_labels(probabilities: ArrayView2<f64>, labels: &[usize]) -> f64 {
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(b, &l)| -probabilities[(b, l)].max(LOG_EPSILON).ln())
        .sum();
    total / labels.len() as f64
}

fn argmax(row: ArrayView1<f64>) -> usize {
    let mut best = 0;
    for (k, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = k;
        }
    }
    best
}

/// Index of the largest entry of each row; lowest index on ties.
pub fn argmax_rows(probabilities: ArrayView2<f64>) -> Vec<usize> {
    probabilities.rows().into_iter().map(argmax).collect()
}

fn backward_impl(
    model: &MlpModel,
    cache: &ForwardCache,
    targets: ArrayView2<f64>,
    need_input: bool,
) -> Result<(Gradients, Option<Array2<f64>>)> {
    if cache.probabilities.dim() != targets.dim() {
        return Err(Error::invalid("targets do not match the cached batch"));
    }
    let b = targets.nrows() as f64;
    let slope = model.arch.leaky_slope;

    let d_logits = (&cache.probabilities - &targets) / b;
    let last_input = cache.layer_inputs.last().unwrap();
    let output_weight = last_input.t().dot(&d_logits);
    let output_bias = d_logits.sum_axis(Axis(0));
    let mut upstream = d_logits.dot(&model.output.weight.t());

    let mut hidden = Vec::with_capacity(model.hidden.len());
    let mut input_grad = None;
    for l in (0..model.hidden.len()).rev() {
        let layer = &model.hidden[l];
        let x_hat = &cache.normalized[l];
        let mut d_pre = upstream;
        Zip::from(&mut d_pre)
            .and(&cache.pre_activation[l])
            .for_each(|g, &y| {
                if y <= 0.0 {
                    *g *= slope;
                }
            });
        let gamma = (&d_pre * x_hat).sum_axis(Axis(0));
        let beta = d_pre.sum_axis(Axis(0));
        let d_norm = d_pre * &layer.gamma;
        let mean_d = d_norm.mean_axis(Axis(0)).unwrap();
        let mean_dx = (&d_norm * x_hat).mean_axis(Axis(0)).unwrap();
        let d_z = (d_norm - &mean_d - &(x_hat * &mean_dx)) * &cache.inv_std[l];

        let weight = cache.layer_inputs[l].t().dot(&d_z);
        let bias = d_z.sum_axis(Axis(0));
        upstream = if l > 0 || need_input {
            d_z.dot(&layer.weight.t())
        } else {
            Array2::zeros((0, 0))
        };
        if l == 0 && need_input {
            input_grad = Some(std::mem::replace(&mut upstream, Array2::zeros((0, 0))));
        }
        hidden.push(HiddenGradients { weight, bias, gamma, beta });
    }
    hidden.reverse();
    Ok((
        Gradients {
            hidden,
            output_weight,
            output_bias,
        },
        input_grad,
    ))
}

/// Exact gradients of the mean cross-entropy with respect to every parameter.
pub fn backward(model: &MlpModel, cache: &ForwardCache, targets: ArrayView2<f64>) -> Result<Gradients> {
    backward_impl(model, cache, targets, false).map(|(g, _)| g)
}

/// Like [`backward`], additionally returning the gradient with respect to the batch.
pub fn backward_with_input(
    model: &MlpModel,
    cache: &ForwardCache,
    targets: ArrayView2<f64>,
) -> Result<(Gradients, Array2<f64>)> {
    backward_impl(model, cache, targets, true).map(|(g, x)| (g, x.unwrap()))
}

/// Most probable codeword for one raw feature vector, plus the class probabilities.
///
/// The model's `feature_scale` is applied here.
pub fn predict_codeword(model: &MlpModel, feature: &[f64]) -> Result<(usize, Vec<f64>)> {
    if feature.len() != model.arch.input_width() {
        return Err(Error::invalid(format!(
            "feature has {} entries, model expects {}",
            feature.len(),
            model.arch.input_width()
        )));
    }
    let scale = model.feature_scale;
    let row = Array2::from_shape_fn((1, feature.len()), |(_, k)| feature[k] * scale);
    let (probs, _) = forward(model, row.view(), Mode::Infer)?;
    let label = argmax(probs.row(0));
    Ok((label, probs.row(0).to_vec()))
}

/// Batched inference on raw features (rows), returning the predicted labels.
pub fn predict_batch(model: &MlpModel, raw: ArrayView2<f64>) -> Result<Vec<usize>> {
    let scaled = raw.mapv(|v| v * model.feature_scale);
    let (probs, _) = forward(model, scaled.view(), Mode::Infer)?;
    Ok(argmax_rows(probs.view()))
}
