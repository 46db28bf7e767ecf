//! A small character-level convolutional classifier.
//!
//! Architecture: character embedding, a stack of same-padded 1-D
//! convolutions each followed by ReLU, a pooling step over positions, and a
//! linear softmax head. The post-ReLU output of every convolution block is
//! recorded; its channels are the *units* that get interpreted.
//!
//! Layouts (all row-major, `f64`):
//! - embedding: `(vocab, dim)`; the alphabet's dummy row is held at zero.
//! - conv weight: `(out, width, in)`, bias `(out)`.
//! - activations: `(length, units)`.
//! - head weight: `(classes, last_units)`, bias `(classes)`.

use std::path::Path;

use ndarray::{Array1, Array2, Array3, ArrayView2};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{Alphabet, Corpus, Sentence};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub units: usize,
    pub width: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    #[default]
    Mean,
    Max,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub embedding_dim: usize,
    pub layers: Vec<LayerSpec>,
    pub num_classes: usize,
    #[serde(default)]
    pub pooling: Pooling,
}

impl ModelConfig {
    /// Two convolution blocks of 16 and 32 units, filter width 3.
    pub fn desk(num_classes: usize) -> Self {
        ModelConfig {
            embedding_dim: 16,
            layers: vec![LayerSpec { units: 16, width: 3 }, LayerSpec { units: 32, width: 3 }],
            num_classes,
            pooling: Pooling::Mean,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.embedding_dim == 0 {
            return bad("embedding_dim must be at least 1".into());
        }
        if self.layers.is_empty() {
            return bad("model needs at least one convolution layer".into());
        }
        if self.num_classes == 0 {
            return bad("num_classes must be at least 1".into());
        }
        for (i, l) in self.layers.iter().enumerate() {
            if l.units == 0 {
                return bad(format!("layer {i} has zero units"));
            }
            if l.width == 0 || l.width % 2 == 0 {
                return bad(format!("layer {i} filter width {} must be odd", l.width));
            }
        }
        Ok(())
    }

    fn in_channels(&self, layer: usize) -> usize {
        if layer == 0 {
            self.embedding_dim
        } else {
            self.layers[layer - 1].units
        }
    }

    pub fn last_units(&self) -> usize {
        self.layers.last().map_or(0, |l| l.units)
    }

    pub fn total_units(&self) -> usize {
        self.layers.iter().map(|l| l.units).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvLayer {
    /// `(out, width, in)`.
    pub weight: Array3<f64>,
    pub bias: Array1<f64>,
}

impl ConvLayer {
    fn zeros(spec: LayerSpec, in_channels: usize) -> Self {
        ConvLayer {
            weight: Array3::zeros((spec.units, spec.width, in_channels)),
            bias: Array1::zeros(spec.units),
        }
    }

    pub fn units(&self) -> usize {
        self.weight.dim().0
    }

    pub fn width(&self) -> usize {
        self.weight.dim().1
    }

    pub fn in_channels(&self) -> usize {
        self.weight.dim().2
    }

    /// Same-padded convolution followed by ReLU.
    fn forward(&self, input: ArrayView2<f64>) -> Array2<f64> {
        let (len, cin) = input.dim();
        let (cout, width, _) = self.weight.dim();
        let pad = width / 2;
        let x = input.as_slice().expect("activations are contiguous");
        let w = self.weight.as_slice().expect("weights are contiguous");
        let mut out = Array2::zeros((len, cout));
        let o_buf = out.as_slice_mut().expect("fresh array is contiguous");
        for t in 0..len {
            for o in 0..cout {
                let mut acc = self.bias[o];
                for k in 0..width {
                    let src = t + k;
                    if src < pad || src - pad >= len {
                        continue;
                    }
                    let row = &x[(src - pad) * cin..(src - pad + 1) * cin];
                    let wrow = &w[(o * width + k) * cin..(o * width + k + 1) * cin];
                    acc += row.iter().zip(wrow).map(|(a, b)| a * b).sum::<f64>();
                }
                o_buf[t * cout + o] = acc.max(0.0);
            }
        }
        out
    }

    /// Backpropagates `grad_out` (w.r.t. the post-ReLU output) through the
    /// block, accumulating into `grads` and returning the input gradient.
    fn backward(
        &self,
        input: ArrayView2<f64>,
        output: &Array2<f64>,
        grad_out: &Array2<f64>,
        grads: &mut ConvLayer,
    ) -> Array2<f64> {
        let (len, cin) = input.dim();
        let (cout, width, _) = self.weight.dim();
        let pad = width / 2;
        let x = input.as_slice().expect("contiguous");
        let w = self.weight.as_slice().expect("contiguous");
        let mut grad_in = Array2::zeros((len, cin));
        let gi = grad_in.as_slice_mut().expect("contiguous");
        let gw = grads.weight.as_slice_mut().expect("contiguous");
        for t in 0..len {
            for o in 0..cout {
                if output[[t, o]] <= 0.0 {
                    continue;
                }
                let g = grad_out[[t, o]];
                if g == 0.0 {
                    continue;
                }
                grads.bias[o] += g;
                for k in 0..width {
                    let src = t + k;
                    if src < pad || src - pad >= len {
                        continue;
                    }
                    let row = (src - pad) * cin;
                    let wrow = (o * width + k) * cin;
                    for i in 0..cin {
                        gw[wrow + i] += g * x[row + i];
                        gi[row + i] += g * w[wrow + i];
                    }
                }
            }
        }
        grad_in
    }
}

/// Recorded activation map of one unit for one input.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationRecord {
    pub layer: usize,
    pub unit: usize,
    pub values: Vec<f64>,
}

impl ActivationRecord {
    /// Number of spatial positions; the normalizer of the mean activation.
    pub fn spatial_length(&self) -> usize {
        self.values.len()
    }
}

/// Mean of a unit's activation map over all positions (padding included,
/// since same-padding keeps one output per input character).
pub fn mean_unit_activation(record: &ActivationRecord) -> f64 {
    mean(&record.values)
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.iter().sum::<f64>() / values.len() as f64
}

/// Everything computed by one forward pass.
#[derive(Debug, Clone)]
pub struct Trace {
    /// Embedded input, `(length, dim)`.
    pub input: Array2<f64>,
    /// Post-ReLU output of each convolution block, `(length, units)`.
    pub layers: Vec<Array2<f64>>,
    pub pooled: Array1<f64>,
    /// Position chosen per channel under max pooling.
    pub argmax: Vec<usize>,
    pub logits: Array1<f64>,
}

impl Trace {
    /// `a_u(s)` for every unit: column means of each layer's activations.
    pub fn mean_activations(&self) -> Vec<Vec<f64>> {
        self.layers.iter().map(column_means).collect()
    }

    pub fn records(&self) -> Vec<ActivationRecord> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(layer, acts)| {
                (0..acts.ncols()).map(move |unit| ActivationRecord {
                    layer,
                    unit,
                    values: acts.column(unit).to_vec(),
                })
            })
            .collect()
    }
}

fn column_means(acts: &Array2<f64>) -> Vec<f64> {
    let (len, units) = acts.dim();
    let mut sums = vec![0.0; units];
    for row in acts.rows() {
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    let n = len.max(1) as f64;
    sums.into_iter().map(|s| s / n).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Model {
    config: ModelConfig,
    alphabet: Alphabet,
    embedding: Array2<f64>,
    convs: Vec<ConvLayer>,
    head_weight: Array2<f64>,
    head_bias: Array1<f64>,
}

impl Model {
    /// All-zero parameters.
    pub fn zeros(config: ModelConfig, alphabet: Alphabet) -> Result<Self> {
        config.validate()?;
        let convs = config
            .layers
            .iter()
            .enumerate()
            .map(|(i, &spec)| ConvLayer::zeros(spec, config.in_channels(i)))
            .collect();
        Ok(Model {
            embedding: Array2::zeros((alphabet.vocab_size(), config.embedding_dim)),
            head_weight: Array2::zeros((config.num_classes, config.last_units())),
            head_bias: Array1::zeros(config.num_classes),
            convs,
            config,
            alphabet,
        })
    }

    /// Seeded random initialization: uniform embeddings, He-uniform
    /// convolutions, Glorot-uniform head, zero biases.
    pub fn new(config: ModelConfig, alphabet: Alphabet, seed: u64) -> Result<Self> {
        let mut model = Model::zeros(config, alphabet)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        model.embedding.mapv_inplace(|_| rng.random_range(-1.0..1.0));
        model.zero_dummy_row();
        for conv in &mut model.convs {
            let fan_in = (conv.width() * conv.in_channels()) as f64;
            let bound = (6.0 / fan_in).sqrt();
            conv.weight.mapv_inplace(|_| rng.random_range(-bound..bound));
        }
        let (classes, last) = model.head_weight.dim();
        let bound = (6.0 / (classes + last) as f64).sqrt();
        model.head_weight.mapv_inplace(|_| rng.random_range(-bound..bound));
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn alphabet(&self) -> &Alphabet {
        &self.alphabet
    }

    pub fn num_layers(&self) -> usize {
        self.convs.len()
    }

    pub fn units(&self, layer: usize) -> usize {
        self.convs[layer].units()
    }

    pub fn embedding(&self) -> &Array2<f64> {
        &self.embedding
    }

    /// Mutable embedding; the dummy row is reset to zero on the next update.
    pub fn embedding_mut(&mut self) -> &mut Array2<f64> {
        &mut self.embedding
    }

    pub fn convs(&self) -> &[ConvLayer] {
        &self.convs
    }

    pub fn convs_mut(&mut self) -> &mut [ConvLayer] {
        &mut self.convs
    }

    pub fn head_weight(&self) -> &Array2<f64> {
        &self.head_weight
    }

    pub fn head_weight_mut(&mut self) -> &mut Array2<f64> {
        &mut self.head_weight
    }

    pub fn head_bias(&self) -> &Array1<f64> {
        &self.head_bias
    }

    pub fn head_bias_mut(&mut self) -> &mut Array1<f64> {
        &mut self.head_bias
    }

    pub fn check_unit(&self, layer: usize, unit: usize) -> Result<()> {
        if layer < self.convs.len() && unit < self.convs[layer].units() {
            Ok(())
        } else {
            Err(Error::InvalidUnit { layer, unit })
        }
    }

    fn zero_dummy_row(&mut self) {
        let dummy = self.alphabet.dummy_index();
        self.embedding.row_mut(dummy).fill(0.0);
    }

    pub fn embed(&self, encoded: &[usize]) -> Array2<f64> {
        let dim = self.config.embedding_dim;
        let mut x = Array2::zeros((encoded.len(), dim));
        for (t, &idx) in encoded.iter().enumerate() {
            x.row_mut(t).assign(&self.embedding.row(idx));
        }
        x
    }

    /// Full forward pass over an encoded sentence.
    pub fn trace(&self, encoded: &[usize]) -> Trace {
        let input = self.embed(encoded);
        let mut layers: Vec<Array2<f64>> = Vec::with_capacity(self.convs.len());
        for conv in &self.convs {
            let prev = layers.last().map_or(input.view(), |a| a.view());
            let out = conv.forward(prev);
            layers.push(out);
        }
        let last = layers.last().expect("at least one layer");
        let (pooled, argmax) = self.pool(last);
        let logits = self.head_weight.dot(&pooled) + &self.head_bias;
        Trace {
            input,
            layers,
            pooled,
            argmax,
            logits,
        }
    }

    fn pool(&self, acts: &Array2<f64>) -> (Array1<f64>, Vec<usize>) {
        match self.config.pooling {
            Pooling::Mean => (Array1::from(column_means(acts)), Vec::new()),
            Pooling::Max => {
                let units = acts.ncols();
                let mut best = vec![f64::NEG_INFINITY; units];
                let mut at = vec![0; units];
                for (t, row) in acts.rows().into_iter().enumerate() {
                    for (u, &v) in row.iter().enumerate() {
                        if v > best[u] {
                            best[u] = v;
                            at[u] = t;
                        }
                    }
                }
                (Array1::from(best), at)
            }
        }
    }

    /// `a_u(s)` for every (layer, unit), skipping the classifier head.
    pub fn mean_activations(&self, encoded: &[usize]) -> Vec<Vec<f64>> {
        let mut x = self.embed(encoded);
        let mut means = Vec::with_capacity(self.convs.len());
        for conv in &self.convs {
            x = conv.forward(x.view());
            means.push(column_means(&x));
        }
        means
    }

    pub fn logits(&self, encoded: &[usize]) -> Vec<f64> {
        self.trace(encoded).logits.to_vec()
    }

    /// Softmax cross-entropy of the logits against `label`.
    pub fn loss_encoded(&self, encoded: &[usize], label: usize) -> f64 {
        cross_entropy(self.trace(encoded).logits.as_slice().expect("contiguous"), label)
    }

    /// Loss plus gradients of every parameter for one example.
    pub fn gradient(&self, encoded: &[usize], label: usize) -> (f64, Gradients) {
        let trace = self.trace(encoded);
        let logits = trace.logits.as_slice().expect("contiguous");
        let loss = cross_entropy(logits, label);
        let mut grads = Gradients::zeros_like(self);

        let mut d_logits = softmax(logits);
        d_logits[label] -= 1.0;
        let d_logits = Array1::from(d_logits);
        for (c, &g) in d_logits.iter().enumerate() {
            grads.head_bias[c] += g;
            grads
                .head_weight
                .row_mut(c)
                .scaled_add(g, &trace.pooled);
        }
        let d_pooled = self.head_weight.t().dot(&d_logits);

        let last = trace.layers.last().expect("at least one layer");
        let len = last.nrows();
        let mut grad = Array2::zeros(last.dim());
        match self.config.pooling {
            Pooling::Mean => {
                let scale = 1.0 / len as f64;
                for mut row in grad.rows_mut() {
                    row.assign(&(&d_pooled * scale));
                }
            }
            Pooling::Max => {
                for (u, &t) in trace.argmax.iter().enumerate() {
                    grad[[t, u]] = d_pooled[u];
                }
            }
        }

        for l in (0..self.convs.len()).rev() {
            let input = if l == 0 {
                trace.input.view()
            } else {
                trace.layers[l - 1].view()
            };
            grad = self.convs[l].backward(input, &trace.layers[l], &grad, &mut grads.convs[l]);
        }

        let dummy = self.alphabet.dummy_index();
        for (t, &idx) in encoded.iter().enumerate() {
            if idx != dummy {
                grads.embedding.row_mut(idx).scaled_add(1.0, &grad.row(t));
            }
        }
        (loss, grads)
    }

    /// Plain SGD step: `p -= lr * g`. The dummy row stays zero.
    pub fn apply_sgd(&mut self, grads: &Gradients, lr: f64) {
        for (p, g) in self.param_slices_mut().into_iter().zip(grads.slices()) {
            for (p, g) in p.iter_mut().zip(g) {
                *p -= lr * g;
            }
        }
        self.zero_dummy_row();
    }

    fn param_slices(&self) -> Vec<&[f64]> {
        let mut out = vec![self.embedding.as_slice().expect("contiguous")];
        for conv in &self.convs {
            out.push(conv.weight.as_slice().expect("contiguous"));
            out.push(conv.bias.as_slice().expect("contiguous"));
        }
        out.push(self.head_weight.as_slice().expect("contiguous"));
        out.push(self.head_bias.as_slice().expect("contiguous"));
        out
    }

    fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out = vec![self.embedding.as_slice_mut().expect("contiguous")];
        for conv in &mut self.convs {
            out.push(conv.weight.as_slice_mut().expect("contiguous"));
            out.push(conv.bias.as_slice_mut().expect("contiguous"));
        }
        out.push(self.head_weight.as_slice_mut().expect("contiguous"));
        out.push(self.head_bias.as_slice_mut().expect("contiguous"));
        out
    }

    /// Number of scalar parameters.
    pub fn num_params(&self) -> usize {
        self.param_slices().iter().map(|s| s.len()).sum()
    }

    /// Parameters flattened in checkpoint order.
    pub fn flat_params(&self) -> Vec<f64> {
        self.param_slices().concat()
    }

    pub fn param(&self, index: usize) -> f64 {
        flat_get(&self.param_slices(), index)
    }

    pub fn set_param(&mut self, index: usize, value: f64) {
        let mut slices = self.param_slices_mut();
        let mut i = index;
        for s in slices.iter_mut() {
            if i < s.len() {
                s[i] = value;
                return;
            }
            i -= s.len();
        }
        panic!("parameter index {index} out of range");
    }

    fn load_flat(&mut self, values: &[f64]) {
        let mut rest = values;
        for s in self.param_slices_mut() {
            let (head, tail) = rest.split_at(s.len());
            s.copy_from_slice(head);
            rest = tail;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.param_slices().iter().all(|s| s.iter().all(|v| v.is_finite()))
    }
}

fn flat_get(slices: &[&[f64]], index: usize) -> f64 {
    let mut i = index;
    for s in slices {
        if i < s.len() {
            return s[i];
        }
        i -= s.len();
    }
    panic!("parameter index {index} out of range");
}

/// Gradients with the same shapes as a [`Model`]'s parameters.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub embedding: Array2<f64>,
    pub convs: Vec<ConvLayer>,
    pub head_weight: Array2<f64>,
    pub head_bias: Array1<f64>,
}

impl Gradients {
    pub fn zeros_like(model: &Model) -> Self {
        Gradients {
            embedding: Array2::zeros(model.embedding.dim()),
            convs: model
                .convs
                .iter()
                .map(|c| ConvLayer {
                    weight: Array3::zeros(c.weight.dim()),
                    bias: Array1::zeros(c.bias.dim()),
                })
                .collect(),
            head_weight: Array2::zeros(model.head_weight.dim()),
            head_bias: Array1::zeros(model.head_bias.dim()),
        }
    }

    fn slices(&self) -> Vec<&[f64]> {
        let mut out = vec![self.embedding.as_slice().expect("contiguous")];
        for conv in &self.convs {
            out.push(conv.weight.as_slice().expect("contiguous"));
            out.push(conv.bias.as_slice().expect("contiguous"));
        }
        out.push(self.head_weight.as_slice().expect("contiguous"));
        out.push(self.head_bias.as_slice().expect("contiguous"));
        out
    }

    /// Gradient of the parameter at flat `index` (same order as
    /// [`Model::param`]).
    pub fn flat(&self, index: usize) -> f64 {
        flat_get(&self.slices(), index)
    }

    fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        self.embedding.scaled_add(scale, &other.embedding);
        for (a, b) in self.convs.iter_mut().zip(&other.convs) {
            a.weight.scaled_add(scale, &b.weight);
            a.bias.scaled_add(scale, &b.bias);
        }
        self.head_weight.scaled_add(scale, &other.head_weight);
        self.head_bias.scaled_add(scale, &other.head_bias);
    }
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}

pub fn cross_entropy(logits: &[f64], label: usize) -> f64 {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
    lse - logits[label]
}

/// Logits and one activation record per (layer, unit).
pub fn forward(model: &Model, sentence: &Sentence) -> (Vec<f64>, Vec<ActivationRecord>) {
    let trace = model.trace(&sentence.encoded);
    (trace.logits.to_vec(), trace.records())
}

pub fn loss(model: &Model, sentence: &Sentence) -> Result<f64> {
    let label = sentence.label.ok_or(Error::MissingLabel(sentence.id))?;
    Ok(model.loss_encoded(&sentence.encoded, label))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Optimizer {
    #[default]
    Sgd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 0.01,
            batch_size: 32,
            epochs: 20,
            seed: 0,
            optimizer: Optimizer::Sgd,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        // Zero is accepted so a run can be checked as a no-op.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning_rate {} must be finite and nonnegative",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::InvalidConfig("batch_size must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean training-set loss after the epoch.
    pub loss: f64,
    pub accuracy: f64,
}

/// Mean loss and accuracy over a labeled corpus.
pub fn evaluate(model: &Model, corpus: &Corpus) -> Result<(f64, f64)> {
    let results: Vec<(f64, bool)> = corpus
        .sentences()
        .par_iter()
        .map(|s| {
            let label = s.label.ok_or(Error::MissingLabel(s.id))?;
            let logits = model.logits(&s.encoded);
            let predicted = argmax(&logits);
            Ok((cross_entropy(&logits, label), predicted == label))
        })
        .collect::<Result<_>>()?;
    let n = results.len() as f64;
    let loss = results.iter().map(|r| r.0).sum::<f64>() / n;
    let acc = results.iter().filter(|r| r.1).count() as f64 / n;
    Ok((loss, acc))
}

pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub fn train(model: &mut Model, corpus: &Corpus, cfg: &TrainConfig) -> Result<Vec<EpochStats>> {
    train_with_progress(model, corpus, cfg, |_| {})
}

/// Minibatch SGD with a seeded shuffle each epoch.
///
/// Per-example gradients may be computed on the rayon pool, but they are
/// summed in batch order, so results do not depend on the thread count.
pub fn train_with_progress(
    model: &mut Model,
    corpus: &Corpus,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochStats),
) -> Result<Vec<EpochStats>> {
    cfg.validate()?;
    if model.alphabet() != corpus.alphabet() {
        return Err(Error::AlphabetMismatch);
    }
    if let Some(s) = corpus.sentences().iter().find(|s| s.label.is_none()) {
        return Err(Error::MissingLabel(s.id));
    }
    if corpus.num_classes() != model.config().num_classes {
        return Err(Error::ShapeMismatch(format!(
            "corpus has {} classes, model has {}",
            corpus.num_classes(),
            model.config().num_classes
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..corpus.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        for (step, batch) in order.chunks(cfg.batch_size).enumerate() {
            let per_example: Vec<(f64, Gradients)> = batch
                .par_iter()
                .map(|&i| {
                    let s = &corpus.sentences()[i];
                    model.gradient(&s.encoded, s.label.expect("checked above"))
                })
                .collect();
            let mut total = Gradients::zeros_like(model);
            let scale = 1.0 / batch.len() as f64;
            for (loss, g) in &per_example {
                if !loss.is_finite() {
                    return Err(Error::Diverged {
                        epoch,
                        step,
                        loss: *loss,
                    });
                }
                total.add_scaled(g, scale);
            }
            model.apply_sgd(&total, cfg.learning_rate);
        }
        let (loss, accuracy) = evaluate(model, corpus)?;
        if !loss.is_finite() || !model.all_finite() {
            return Err(Error::Diverged {
                epoch,
                step: order.len().div_ceil(cfg.batch_size),
                loss,
            });
        }
        let stats = EpochStats {
            epoch,
            loss,
            accuracy,
        };
        on_epoch(&stats);
        history.push(stats);
    }
    Ok(history)
}

const CHECKPOINT_MAGIC: &[u8; 8] = b"UNITLENS";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointHeader {
    config: ModelConfig,
    alphabet: Alphabet,
}

/// Serializes a model.
///
/// Layout: 8-byte magic `UNITLENS`, `u32` LE version, `u32` LE header
/// length, JSON header (`config`, `alphabet`), `u64` LE parameter count,
/// parameters as `f64` LE in flat order, then the SHA-256 of every
/// preceding byte.
pub fn checkpoint_bytes(model: &Model) -> Vec<u8> {
    let header = serde_json::to_vec(&CheckpointHeader {
        config: model.config.clone(),
        alphabet: model.alphabet.clone(),
    })
    .expect("header serializes");
    let params = model.flat_params();
    let mut out = Vec::with_capacity(24 + header.len() + params.len() * 8 + 32);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u32).to_le_bytes());
    out.extend_from_slice(&header);
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(digest.as_slice());
    out
}

pub fn model_from_checkpoint_bytes(bytes: &[u8]) -> Result<Model> {
    if bytes.len() < 32 {
        return Err(Error::CheckpointChecksum);
    }
    let (body, digest) = bytes.split_at(bytes.len() - 32);
    if Sha256::digest(body).as_slice() != digest {
        return Err(Error::CheckpointChecksum);
    }
    let mut cursor = Cursor { buf: body, pos: 0 };
    if cursor.take(8)? != CHECKPOINT_MAGIC {
        return Err(Error::CheckpointFormat("bad magic".into()));
    }
    let version = u32::from_le_bytes(cursor.take(4)?.try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::CheckpointVersion {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let header_len = u32::from_le_bytes(cursor.take(4)?.try_into().expect("4 bytes")) as usize;
    let header: CheckpointHeader = serde_json::from_slice(cursor.take(header_len)?)
        .map_err(|e| Error::CheckpointFormat(format!("header: {e}")))?;
    let count = u64::from_le_bytes(cursor.take(8)?.try_into().expect("8 bytes")) as usize;
    let mut model = Model::zeros(header.config, header.alphabet)?;
    if count != model.num_params() {
        return Err(Error::CheckpointFormat(format!(
            "{count} parameters stored, config implies {}",
            model.num_params()
        )));
    }
    let raw = cursor.take(count * 8)?;
    let values: Vec<f64> = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    if cursor.pos != body.len() {
        return Err(Error::CheckpointFormat("trailing bytes".into()));
    }
    model.load_flat(&values);
    Ok(model)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.buf.len())
            .ok_or_else(|| Error::CheckpointFormat("unexpected end of data".into()))?;
        let out = &self.buf[self.pos..end];
        self.pos = end;
        Ok(out)
    }
}

pub fn save_checkpoint(model: &Model, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, checkpoint_bytes(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Model> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    model_from_checkpoint_bytes(&bytes)
}

/// Loads a checkpoint and checks it against the expected architecture.
pub fn load_checkpoint_expecting(path: impl AsRef<Path>, expected: &ModelConfig) -> Result<Model> {
    let model = load_checkpoint(path)?;
    if model.config() != expected {
        return Err(Error::ShapeMismatch(format!(
            "checkpoint has {:?}, expected {:?}",
            model.config(),
            expected
        )));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::AlphabetSpec;

    fn ab_alphabet() -> Alphabet {
        Alphabet::new(&AlphabetSpec {
            characters: "ab ".into(),
            case_fold: true,
        })
    }

    fn tiny_config(classes: usize) -> ModelConfig {
        ModelConfig {
            embedding_dim: 4,
            layers: vec![LayerSpec { units: 3, width: 3 }, LayerSpec { units: 5, width: 3 }],
            num_classes: classes,
            pooling: Pooling::Mean,
        }
    }

    #[test]
    fn config_validation() {
        let mut cfg = tiny_config(2);
        cfg.layers[0].width = 2;
        assert!(cfg.validate().is_err());
        cfg.layers.clear();
        assert!(cfg.validate().is_err());
        assert!(ModelConfig::desk(4).validate().is_ok());
    }

    #[test]
    fn zero_model_gives_zero_activations_and_equal_logits() {
        let model = Model::zeros(tiny_config(4), ab_alphabet()).unwrap();
        let s = Sentence::new(0, "abba", None, model.alphabet());
        let (logits, records) = forward(&model, &s);
        assert_eq!(records.len(), 8);
        assert!(records.iter().all(|r| r.values.iter().all(|&v| v == 0.0)));
        assert!(logits.iter().all(|&z| z == logits[0]));
        let labeled = Sentence::new(0, "abba", Some(2), model.alphabet());
        assert!((loss(&model, &labeled).unwrap() - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn mean_unit_activation_examples() {
        let rec = |values: Vec<f64>| ActivationRecord {
            layer: 0,
            unit: 0,
            values,
        };
        assert_eq!(mean_unit_activation(&rec(vec![0.0; 3])), 0.0);
        assert_eq!(mean_unit_activation(&rec(vec![1.5; 7])), 1.5);
        assert_eq!(mean_unit_activation(&rec(vec![1.0, 2.0, 3.0, 4.0])), 2.5);
    }

    #[test]
    fn hand_set_detector_prefers_its_character() {
        let alphabet = ab_alphabet();
        let cfg = ModelConfig {
            embedding_dim: 2,
            layers: vec![LayerSpec { units: 1, width: 1 }],
            num_classes: 2,
            pooling: Pooling::Mean,
        };
        let mut model = Model::zeros(cfg, alphabet).unwrap();
        model.embedding_mut()[[0, 0]] = 1.0; // 'a'
        model.embedding_mut()[[1, 1]] = 1.0; // 'b'
        model.convs_mut()[0].weight[[0, 0, 0]] = 1.0;
        let a = model.trace(&model.alphabet().encode("aaa"));
        let b = model.trace(&model.alphabet().encode("bbb"));
        for t in 0..3 {
            assert!(a.layers[0][[t, 0]] > b.layers[0][[t, 0]]);
        }
    }

    #[test]
    fn missing_label_is_an_error() {
        let model = Model::zeros(tiny_config(2), ab_alphabet()).unwrap();
        let s = Sentence::new(3, "ab", None, model.alphabet());
        assert!(matches!(loss(&model, &s), Err(Error::MissingLabel(3))));
    }

    #[test]
    fn loss_vanishes_with_large_margin() {
        let mut model = Model::zeros(tiny_config(3), ab_alphabet()).unwrap();
        model.head_bias_mut()[1] = 200.0;
        let s = Sentence::new(0, "ab", Some(1), model.alphabet());
        assert!(loss(&model, &s).unwrap() < 1e-12);
    }

    #[test]
    fn max_pooling_gradients_match_finite_differences() {
        let mut cfg = tiny_config(2);
        cfg.pooling = Pooling::Max;
        let mut model = Model::new(cfg, ab_alphabet(), 9).unwrap();
        let encoded = model.alphabet().encode("abab ba");
        let (_, grads) = model.gradient(&encoded, 1);
        let n = model.num_params();
        let h = 1e-6;
        for idx in (0..n).step_by(7) {
            let orig = model.param(idx);
            model.set_param(idx, orig + h);
            let up = model.loss_encoded(&encoded, 1);
            model.set_param(idx, orig - h);
            let down = model.loss_encoded(&encoded, 1);
            model.set_param(idx, orig);
            let fd = (up - down) / (2.0 * h);
            let an = grads.flat(idx);
            assert!((an - fd).abs() / an.abs().max(1.0) < 1e-4, "param {idx}: {an} vs {fd}");
        }
    }

    #[test]
    fn dummy_row_stays_zero_after_updates() {
        let alphabet = ab_alphabet();
        let mut model = Model::new(tiny_config(2), alphabet.clone(), 1).unwrap();
        let dummy = alphabet.dummy_index();
        assert!(model.embedding().row(dummy).iter().all(|&v| v == 0.0));
        let mut enc = alphabet.encode("abab");
        enc[1] = dummy;
        let (_, g) = model.gradient(&enc, 0);
        assert!(g.embedding.row(dummy).iter().all(|&v| v == 0.0));
        model.apply_sgd(&g, 0.5);
        assert!(model.embedding().row(dummy).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn checkpoint_rejects_corruption_and_version() {
        let model = Model::new(tiny_config(2), ab_alphabet(), 4).unwrap();
        let bytes = checkpoint_bytes(&model);
        let back = model_from_checkpoint_bytes(&bytes).unwrap();
        assert_eq!(back, model);

        let truncated = &bytes[..bytes.len() - 5];
        assert!(matches!(
            model_from_checkpoint_bytes(truncated),
            Err(Error::CheckpointChecksum)
        ));

        let mut flipped = bytes.clone();
        flipped[40] ^= 0x01;
        assert!(matches!(
            model_from_checkpoint_bytes(&flipped),
            Err(Error::CheckpointChecksum)
        ));

        // Re-sign a body with a bumped version.
        let mut body = bytes[..bytes.len() - 32].to_vec();
        body[8..12].copy_from_slice(&7u32.to_le_bytes());
        let digest = Sha256::digest(&body);
        body.extend_from_slice(digest.as_slice());
        assert!(matches!(
            model_from_checkpoint_bytes(&body),
            Err(Error::CheckpointVersion { found: 7, .. })
        ));
    }
}
