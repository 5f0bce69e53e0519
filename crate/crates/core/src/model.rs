//! Small MLP classifier, training loop and weighted-F1 evaluation.
//!
//! The network is `3N -> 64 -> 32 -> K` with ReLU hidden layers and a
//! softmax head, trained with Adam on unweighted cross-entropy. Gradients
//! are derived by hand.

use std::fmt::Write as _;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::augment::AugmentationSpec;
use crate::flow::{preprocess_into, Dataset, FlowError, NormConfig};
use crate::rng::RngStream;
use crate::sampling::{SampleError, Sampler, SamplerConfig};

const CHECKPOINT_MAGIC: &str = "flowaug-mlp";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("input has {found} features, model expects {expected}")]
    DimMismatch { expected: usize, found: usize },
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("invalid architecture: {0}")]
    Architecture(String),
    #[error("invalid training config: {0}")]
    Config(String),
    #[error(
        "non-finite loss at epoch {epoch}, batch {batch} (parameter norm {param_norm:.6e})"
    )]
    NonFinite {
        epoch: usize,
        batch: usize,
        param_norm: f64,
    },
    #[error("training exceeded its time budget during epoch {epoch}")]
    TimedOut { epoch: usize },
    #[error("training set has no samples of class `{0}`")]
    MissingClass(String),
    #[error("malformed checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Flow(#[from] FlowError),
}

/// Fully connected layer; `weights` is row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl Dense {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            biases: vec![0.0; outputs],
        }
    }

    fn affine(&self, x: &[f64], out: &mut [f64]) {
        for (o, row) in self.weights.chunks_exact(self.inputs).enumerate() {
            out[o] = self.biases[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>();
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<Dense>,
}

/// Parameter-shaped gradient record.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| Dense::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }

    pub fn clear(&mut self) {
        for l in &mut self.layers {
            l.weights.fill(0.0);
            l.biases.fill(0.0);
        }
    }

    pub fn scale(&mut self, k: f64) {
        for l in &mut self.layers {
            l.weights.iter_mut().for_each(|g| *g *= k);
            l.biases.iter_mut().for_each(|g| *g *= k);
        }
    }

    pub fn add_assign(&mut self, other: &Gradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.iter_mut().zip(&b.weights).for_each(|(x, y)| *x += y);
            a.biases.iter_mut().zip(&b.biases).for_each(|(x, y)| *x += y);
        }
    }

    /// All entries, layer by layer, weights before biases.
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases).copied())
            .collect()
    }
}

/// Per-layer activations kept for the backward pass.
#[derive(Debug, Clone, Default)]
pub struct Workspace {
    acts: Vec<Vec<f64>>,
    delta: Vec<f64>,
    next_delta: Vec<f64>,
}

impl MlpModel {
    /// He-uniform initialized weights, zero biases.
    pub fn new(dims: &[usize], rng: &mut RngStream) -> Result<Self, ModelError> {
        let mut m = Self::zeros(dims)?;
        for l in &mut m.layers {
            let bound = (6.0 / l.inputs as f64).sqrt();
            for w in &mut l.weights {
                *w = rng.uniform_in(-bound, bound);
            }
        }
        Ok(m)
    }

    pub fn zeros(dims: &[usize]) -> Result<Self, ModelError> {
        if dims.len() < 2 || dims.contains(&0) {
            return Err(ModelError::Architecture(format!(
                "need at least input and output dims, all positive; got {dims:?}"
            )));
        }
        Ok(Self {
            layers: dims.windows(2).map(|w| Dense::zeros(w[0], w[1])).collect(),
        })
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self, ModelError> {
        if layers.is_empty() {
            return Err(ModelError::Architecture("no layers".into()));
        }
        for (i, l) in layers.iter().enumerate() {
            if l.inputs == 0
                || l.outputs == 0
                || l.weights.len() != l.inputs * l.outputs
                || l.biases.len() != l.outputs
            {
                return Err(ModelError::Architecture(format!("layer {i} has inconsistent shape")));
            }
            if i > 0 && layers[i - 1].outputs != l.inputs {
                return Err(ModelError::Architecture(format!(
                    "layer {i} expects {} inputs but previous layer emits {}",
                    l.inputs,
                    layers[i - 1].outputs
                )));
            }
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].inputs)
            .chain(self.layers.iter().map(|l| l.outputs))
            .collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].inputs
    }

    pub fn num_classes(&self) -> usize {
        self.layers[self.layers.len() - 1].outputs
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    pub fn param_norm(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.iter().chain(&l.biases))
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    }

    fn check_input(&self, x: &[f64]) -> Result<(), ModelError> {
        if x.len() != self.input_dim() {
            return Err(ModelError::DimMismatch {
                expected: self.input_dim(),
                found: x.len(),
            });
        }
        Ok(())
    }

    /// Runs the network, leaving softmax probabilities in the last activation.
    fn run(&self, x: &[f64], ws: &mut Workspace) {
        ws.acts.resize(self.layers.len() + 1, Vec::new());
        ws.acts[0].clear();
        ws.acts[0].extend_from_slice(x);
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let (head, tail) = ws.acts.split_at_mut(i + 1);
            let out = &mut tail[0];
            out.resize(layer.outputs, 0.0);
            layer.affine(&head[i], out);
            if i < last {
                out.iter_mut().for_each(|v| *v = v.max(0.0));
            } else {
                softmax_in_place(out);
            }
        }
    }

    /// Class probabilities.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_input(x)?;
        let mut ws = Workspace::default();
        self.run(x, &mut ws);
        Ok(ws.acts.pop().unwrap_or_default())
    }

    /// Cross-entropy loss `-ln p[label]` and its gradient.
    pub fn backward(&self, x: &[f64], label: usize) -> Result<(Gradients, f64), ModelError> {
        let mut g = Gradients::zeros_like(self);
        let mut ws = Workspace::default();
        let loss = self.accumulate(x, label, &mut g, &mut ws)?;
        Ok((g, loss))
    }

    /// Adds this sample's gradient into `grads` and returns its loss.
    pub fn accumulate(
        &self,
        x: &[f64],
        label: usize,
        grads: &mut Gradients,
        ws: &mut Workspace,
    ) -> Result<f64, ModelError> {
        self.check_input(x)?;
        let k = self.num_classes();
        if label >= k {
            return Err(ModelError::LabelOutOfRange { label, classes: k });
        }
        self.run(x, ws);
        let probs = &ws.acts[self.layers.len()];
        let loss = -probs[label].max(f64::MIN_POSITIVE).ln();
        // dL/dz for softmax + cross-entropy.
        ws.delta.clear();
        ws.delta.extend_from_slice(probs);
        ws.delta[label] -= 1.0;
        for i in (0..self.layers.len()).rev() {
            let layer = &self.layers[i];
            let input = &ws.acts[i];
            let g = &mut grads.layers[i];
            for (o, &d) in ws.delta.iter().enumerate() {
                g.biases[o] += d;
                if d != 0.0 {
                    let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    row.iter_mut().zip(input).for_each(|(gw, &a)| *gw += d * a);
                }
            }
            if i == 0 {
                break;
            }
            ws.next_delta.clear();
            ws.next_delta.resize(layer.inputs, 0.0);
            for (o, &d) in ws.delta.iter().enumerate() {
                if d != 0.0 {
                    let row = &layer.weights[o * layer.inputs..(o + 1) * layer.inputs];
                    ws.next_delta.iter_mut().zip(row).for_each(|(nd, &w)| *nd += d * w);
                }
            }
            // ReLU derivative from the stored (post-activation) values.
            for (nd, &a) in ws.next_delta.iter_mut().zip(input) {
                if a <= 0.0 {
                    *nd = 0.0;
                }
            }
            std::mem::swap(&mut ws.delta, &mut ws.next_delta);
        }
        Ok(loss)
    }

    /// Plain-text checkpoint: header, dims, then per layer one line of
    /// row-major weights and one of biases. Values use shortest round-trip
    /// decimal formatting, so reloading is bit-exact.
    pub fn to_checkpoint(&self) -> String {
        let mut out = format!("{CHECKPOINT_MAGIC} {CHECKPOINT_VERSION}\ndims");
        for d in self.dims() {
            let _ = write!(out, " {d}");
        }
        out.push('\n');
        for l in &self.layers {
            out.push('w');
            for v in &l.weights {
                let _ = write!(out, " {v:?}");
            }
            out.push_str("\nb");
            for v in &l.biases {
                let _ = write!(out, " {v:?}");
            }
            out.push('\n');
        }
        out
    }

    pub fn from_checkpoint(text: &str) -> Result<Self, ModelError> {
        let bad = |m: &str| ModelError::Checkpoint(m.to_string());
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty checkpoint"))?;
        let mut h = header.split_whitespace();
        if h.next() != Some(CHECKPOINT_MAGIC) {
            return Err(bad("missing header"));
        }
        let version: u32 = h
            .next()
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| bad("missing version"))?;
        if version != CHECKPOINT_VERSION {
            return Err(ModelError::Checkpoint(format!(
                "unsupported checkpoint version {version}"
            )));
        }
        let dims_line = lines.next().ok_or_else(|| bad("missing dims"))?;
        let mut d = dims_line.split_whitespace();
        if d.next() != Some("dims") {
            return Err(bad("missing dims"));
        }
        let dims: Vec<usize> = d
            .map(|v| v.parse().map_err(|_| bad("bad dim")))
            .collect::<Result<_, _>>()?;
        let mut model = Self::zeros(&dims)?;
        for (i, layer) in model.layers.iter_mut().enumerate() {
            for (tag, dst) in [("w", &mut layer.weights), ("b", &mut layer.biases)] {
                let line = lines
                    .next()
                    .ok_or_else(|| ModelError::Checkpoint(format!("layer {i}: missing {tag} line")))?;
                let mut parts = line.split_whitespace();
                if parts.next() != Some(tag) {
                    return Err(ModelError::Checkpoint(format!("layer {i}: expected {tag} line")));
                }
                let vals: Vec<f64> = parts
                    .map(|v| v.parse::<f64>().map_err(|_| bad("bad number")))
                    .collect::<Result<_, _>>()?;
                if vals.len() != dst.len() || vals.iter().any(|v| !v.is_finite()) {
                    return Err(ModelError::Checkpoint(format!(
                        "layer {i}: expected {} finite {tag} values, got {}",
                        dst.len(),
                        vals.len()
                    )));
                }
                *dst = vals;
            }
        }
        Ok(model)
    }
}

fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    z.iter_mut().for_each(|v| *v /= sum);
}

#[derive(Debug, Clone)]
pub struct Adam {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    step: i32,
    m: Gradients,
    v: Gradients,
}

impl Adam {
    pub fn new(model: &MlpModel, lr: f64, beta1: f64, beta2: f64, eps: f64) -> Self {
        Self {
            lr,
            beta1,
            beta2,
            eps,
            step: 0,
            m: Gradients::zeros_like(model),
            v: Gradients::zeros_like(model),
        }
    }

    pub fn update(&mut self, model: &mut MlpModel, grads: &Gradients) {
        self.step += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.step);
        let c2 = 1.0 - b2.powi(self.step);
        for (((p, g), m), v) in model
            .layers
            .iter_mut()
            .zip(&grads.layers)
            .zip(&mut self.m.layers)
            .zip(&mut self.v.layers)
        {
            let pairs = [
                (&mut p.weights, &g.weights, &mut m.weights, &mut v.weights),
                (&mut p.biases, &g.biases, &mut m.biases, &mut v.biases),
            ];
            for (pv, gv, mv, vv) in pairs {
                for i in 0..pv.len() {
                    let gi = gv[i];
                    mv[i] = b1 * mv[i] + (1.0 - b1) * gi;
                    vv[i] = b2 * vv[i] + (1.0 - b2) * gi * gi;
                    let mh = mv[i] / c1;
                    let vh = vv[i] / c2;
                    pv[i] -= self.lr * mh / (vh.sqrt() + self.eps);
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
    pub hidden: [usize; 2],
    pub norm: NormConfig,
    /// Wall-clock budget per training run in seconds; `None` disables it.
    pub time_budget_secs: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 32,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
            hidden: [64, 32],
            norm: NormConfig::default(),
            time_budget_secs: None,
        }
    }
}

impl TrainConfig {
    pub fn check(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Config(m));
        if self.batch_size == 0 {
            return bad("batch_size must be >= 1".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be > 0, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return bad("Adam betas must lie in [0, 1)".into());
        }
        if !(self.eps > 0.0) {
            return bad("eps must be > 0".into());
        }
        if self.hidden.contains(&0) {
            return bad("hidden layer widths must be >= 1".into());
        }
        if let Some(b) = self.time_budget_secs {
            if !(b > 0.0) {
                return bad("time budget must be > 0".into());
            }
        }
        self.norm.check()?;
        Ok(())
    }

    pub fn dims(&self, series_len: usize, classes: usize) -> [usize; 4] {
        [3 * series_len, self.hidden[0], self.hidden[1], classes]
    }
}

/// Random streams used by one training run. Splitting them lets callers
/// share the initialization across methods while varying the batches.
#[derive(Debug, Clone)]
pub struct TrainStreams {
    pub init: RngStream,
    pub batches: RngStream,
}

impl TrainStreams {
    pub fn from_seed(seed: u64) -> Self {
        let root = RngStream::new(seed);
        Self {
            init: root.child(1),
            batches: root.child(2),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub mean_train_loss: f64,
    pub val_weighted_f1: f64,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// Parameters at the epoch with the best validation weighted-F1
    /// (the initialization when no epoch ran).
    pub model: MlpModel,
    pub best_epoch: Option<usize>,
    pub history: Vec<EpochRecord>,
}

/// Trains with streams derived from `config.seed`.
pub fn train(
    train_set: &Dataset,
    val_set: &Dataset,
    sampler: SamplerConfig,
    spec: &AugmentationSpec,
    config: &TrainConfig,
) -> Result<TrainOutcome, ModelError> {
    train_with_streams(
        train_set,
        val_set,
        sampler,
        spec,
        config,
        TrainStreams::from_seed(config.seed),
    )
}

pub fn train_with_streams(
    train_set: &Dataset,
    val_set: &Dataset,
    sampler_cfg: SamplerConfig,
    spec: &AugmentationSpec,
    config: &TrainConfig,
    mut streams: TrainStreams,
) -> Result<TrainOutcome, ModelError> {
    config.check()?;
    let n = train_set
        .series_len()
        .ok_or(ModelError::Sample(SampleError::EmptyDataset))?;
    if let Some(c) = train_set.class_counts().iter().position(|&c| c == 0) {
        return Err(ModelError::MissingClass(train_set.labels()[c].clone()));
    }
    let dims = config.dims(n, train_set.num_classes());
    let mut model = MlpModel::new(&dims, &mut streams.init)?;
    let sampler = Sampler::new(
        train_set,
        SamplerConfig {
            batch_size: config.batch_size,
            ..sampler_cfg
        },
    )?;
    let started = Instant::now();
    let mut adam = Adam::new(&model, config.lr, config.beta1, config.beta2, config.eps);
    let mut grads = Gradients::zeros_like(&model);
    let mut ws = Workspace::default();
    let mut features = vec![0.0; 3 * n];
    let mut best: Option<(f64, usize, MlpModel)> = None;
    let mut history = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let mut loss_sum = 0.0;
        let mut loss_count = 0usize;
        for batch_no in 0..sampler.batches_per_epoch() {
            let batch = sampler.make_batch(spec, &mut streams.batches)?;
            grads.clear();
            let mut batch_loss = 0.0;
            for s in &batch.samples {
                preprocess_into(s, &config.norm, &mut features)?;
                batch_loss += model.accumulate(&features, s.label, &mut grads, &mut ws)?;
            }
            if !batch_loss.is_finite() {
                return Err(ModelError::NonFinite {
                    epoch,
                    batch: batch_no,
                    param_norm: model.param_norm(),
                });
            }
            grads.scale(1.0 / batch.len() as f64);
            adam.update(&mut model, &grads);
            loss_sum += batch_loss;
            loss_count += batch.len();
        }
        let val_f1 = if val_set.is_empty() {
            0.0
        } else {
            evaluate(&model, val_set, &config.norm)?.weighted_f1
        };
        history.push(EpochRecord {
            epoch,
            mean_train_loss: loss_sum / loss_count.max(1) as f64,
            val_weighted_f1: val_f1,
        });
        if best.as_ref().is_none_or(|(f, _, _)| val_f1 > *f) {
            best = Some((val_f1, epoch, model.clone()));
        }
        if let Some(budget) = config.time_budget_secs {
            if started.elapsed().as_secs_f64() > budget {
                return Err(ModelError::TimedOut { epoch });
            }
        }
    }
    Ok(match best {
        Some((_, epoch, m)) if !val_set.is_empty() => TrainOutcome {
            model: m,
            best_epoch: Some(epoch),
            history,
        },
        _ => TrainOutcome {
            best_epoch: history.last().map(|r| r.epoch),
            model,
            history,
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub weighted_f1: f64,
    pub accuracy: f64,
    pub per_class: Vec<ClassReport>,
    /// `confusion[true][predicted]`.
    pub confusion: Vec<Vec<usize>>,
}

impl EvalReport {
    pub fn from_predictions(labels: &[String], truth: &[usize], predicted: &[usize]) -> Self {
        let k = labels.len();
        let mut confusion = vec![vec![0usize; k]; k];
        for (&t, &p) in truth.iter().zip(predicted) {
            confusion[t][p] += 1;
        }
        let total: usize = truth.len();
        let correct: usize = (0..k).map(|c| confusion[c][c]).sum();
        let mut weighted = 0.0;
        let per_class: Vec<ClassReport> = (0..k)
            .map(|c| {
                let tp = confusion[c][c] as f64;
                let support: usize = confusion[c].iter().sum();
                let predicted_c: usize = (0..k).map(|r| confusion[r][c]).sum();
                let precision = if predicted_c > 0 { tp / predicted_c as f64 } else { 0.0 };
                let recall = if support > 0 { tp / support as f64 } else { 0.0 };
                let f1 = if precision + recall > 0.0 {
                    2.0 * precision * recall / (precision + recall)
                } else {
                    0.0
                };
                weighted += support as f64 * f1;
                ClassReport {
                    label: labels[c].clone(),
                    precision,
                    recall,
                    f1,
                    support,
                }
            })
            .collect();
        let denom = total.max(1) as f64;
        Self {
            weighted_f1: weighted / denom,
            accuracy: correct as f64 / denom,
            per_class,
            confusion,
        }
    }
}

/// Index of the largest probability (first on ties).
pub fn argmax(p: &[f64]) -> usize {
    p.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| {
            if v > bv {
                (i, v)
            } else {
                (bi, bv)
            }
        })
        .0
}

/// Argmax predictions on `test`, summarized as an [`EvalReport`].
pub fn evaluate(model: &MlpModel, test: &Dataset, norm: &NormConfig) -> Result<EvalReport, ModelError> {
    let mut ws = Workspace::default();
    let mut features = vec![0.0; model.input_dim()];
    let mut truth = Vec::with_capacity(test.len());
    let mut predicted = Vec::with_capacity(test.len());
    for s in test.samples() {
        if 3 * s.len() != model.input_dim() {
            return Err(ModelError::DimMismatch {
                expected: model.input_dim(),
                found: 3 * s.len(),
            });
        }
        preprocess_into(s, norm, &mut features)?;
        model.run(&features, &mut ws);
        truth.push(s.label);
        predicted.push(argmax(&ws.acts[model.layers.len()]));
    }
    Ok(EvalReport::from_predictions(test.labels(), &truth, &predicted))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(k: usize) -> Vec<String> {
        (0..k).map(|c| format!("c{c}")).collect()
    }

    #[test]
    fn zero_model_is_uniform() {
        let m = MlpModel::zeros(&[6, 4, 3]).unwrap();
        let p = m.forward(&[0.3, -1.0, 2.0, 0.0, 5.0, 1.0]).unwrap();
        assert!(p.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-15));
        let (_, loss) = m.backward(&[0.0; 6], 1).unwrap();
        assert!((loss - 3f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn single_layer_hand_softmax() {
        // z = W x + b with W = [[1, 0], [0, 2]], b = [0, 1], x = [1, 0.5] -> z = [1, 2]
        let layer = Dense {
            inputs: 2,
            outputs: 2,
            weights: vec![1.0, 0.0, 0.0, 2.0],
            biases: vec![0.0, 1.0],
        };
        let m = MlpModel::from_layers(vec![layer]).unwrap();
        let p = m.forward(&[1.0, 0.5]).unwrap();
        let e = std::f64::consts::E;
        let expect0 = e / (e + e * e);
        assert!((p[0] - expect0).abs() < 1e-15);
        assert!((p[1] - (1.0 - expect0)).abs() < 1e-15);
    }

    #[test]
    fn dimension_errors() {
        let m = MlpModel::zeros(&[4, 3]).unwrap();
        assert!(matches!(m.forward(&[1.0]), Err(ModelError::DimMismatch { .. })));
        assert!(matches!(
            m.backward(&[0.0; 4], 3),
            Err(ModelError::LabelOutOfRange { .. })
        ));
        assert!(MlpModel::zeros(&[4]).is_err());
    }

    #[test]
    fn batch_gradient_is_sum_of_sample_gradients() {
        let mut r = RngStream::new(3);
        let m = MlpModel::new(&[5, 7, 3], &mut r).unwrap();
        let xs: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..5).map(|_| r.uniform_in(-1.0, 1.0)).collect())
            .collect();
        let mut acc = Gradients::zeros_like(&m);
        let mut ws = Workspace::default();
        let mut sum = Gradients::zeros_like(&m);
        for (i, x) in xs.iter().enumerate() {
            m.accumulate(x, i % 3, &mut acc, &mut ws).unwrap();
            sum.add_assign(&m.backward(x, i % 3).unwrap().0);
        }
        for (a, b) in acc.flatten().iter().zip(sum.flatten()) {
            assert!((a - b).abs() <= 1e-12 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn checkpoint_round_trip_is_bit_exact() {
        let mut r = RngStream::new(11);
        let m = MlpModel::new(&[6, 5, 4, 3], &mut r).unwrap();
        let text = m.to_checkpoint();
        let back = MlpModel::from_checkpoint(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_checkpoint(), text);
        assert!(MlpModel::from_checkpoint("flowaug-mlp 2\ndims 1 1\n").is_err());
        assert!(MlpModel::from_checkpoint(&text.replace("\nb ", "\nb x")).is_err());
    }

    #[test]
    fn perfect_and_constant_predictors() {
        let l = labels(2);
        let truth = vec![0, 0, 1, 1];
        let r = EvalReport::from_predictions(&l, &truth, &truth);
        assert_eq!(r.weighted_f1, 1.0);
        let r = EvalReport::from_predictions(&l, &truth, &[0, 0, 0, 0]);
        assert!((r.weighted_f1 - 1.0 / 3.0).abs() < 1e-15);
        assert!((r.per_class[0].f1 - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(r.per_class[1].f1, 0.0);
        let trace: usize = (0..2).map(|c| r.confusion[c][c]).sum();
        assert_eq!(trace, 2);
    }

    #[test]
    fn absent_class_gets_zero_weight() {
        let l = labels(3);
        let r = EvalReport::from_predictions(&l, &[0, 1, 1], &[0, 1, 2]);
        assert_eq!(r.per_class[2].support, 0);
        assert_eq!(r.per_class[2].f1, 0.0);
        // class 0: f1 1, support 1; class 1: p 1 r 0.5 f1 2/3, support 2
        assert!((r.weighted_f1 - (1.0 + 2.0 * 2.0 / 3.0) / 3.0).abs() < 1e-15);
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::default();
        c.check().unwrap();
        c.lr = 0.0;
        assert!(c.check().is_err());
        c = TrainConfig {
            batch_size: 0,
            ..TrainConfig::default()
        };
        assert!(c.check().is_err());
    }
}
