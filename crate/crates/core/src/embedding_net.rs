//! Supervised entity-embedding classifier: one embedding table per
//! categorical feature, concatenated and passed through dense ReLU layers to
//! a single logit. After training, the concatenated embedding is detached
//! and used as the numerical representation of each alarm.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data_model::EncodedDataset;
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::rng::stage_rng;
use crate::scalar::{cast, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    Relu,
    Identity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Optimizer {
    Adam,
    Sgd,
}

/// Training settings. `class_weight = None` derives the anomaly weight from
/// the label counts; `embedding_dims = None` applies the width rule
/// d_f = min(50, ⌈card_f / 2⌉).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub class_weight: Option<f64>,
    pub p_unk: f64,
    pub hidden: Vec<usize>,
    pub embedding_dims: Option<Vec<usize>>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 256,
            learning_rate: 1e-3,
            optimizer: Optimizer::Adam,
            class_weight: None,
            p_unk: 0.02,
            hidden: vec![128, 32],
            embedding_dims: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    fn validate(&self) -> Result<()> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(Error::InvalidArgument(
                "epochs and batch size must be positive".into(),
            ));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::InvalidArgument("learning rate must be positive".into()));
        }
        if !(0.0..=0.5).contains(&self.p_unk) {
            return Err(Error::InvalidArgument(format!(
                "unknown-substitution probability {} outside [0, 0.5]",
                self.p_unk
            )));
        }
        if self.hidden.iter().any(|&w| w == 0) {
            return Err(Error::InvalidArgument("hidden width must be positive".into()));
        }
        if let Some(w) = self.class_weight {
            if w <= 0.0 {
                return Err(Error::InvalidArgument("class weight must be positive".into()));
            }
        }
        if let Some(dims) = &self.embedding_dims {
            if dims.iter().any(|&d| d == 0) {
                return Err(Error::InvalidArgument(
                    "embedding dims must be positive".into(),
                ));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct DenseLayer<S: Scalar> {
    /// out×in.
    pub weight: Mat<S>,
    pub bias: Vec<S>,
    pub activation: Activation,
}

/// Embedding tables plus the dense stack. Table f has one row per code
/// (row 0 = UNKNOWN); the concatenation order is the feature order.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EmbeddingModel<S: Scalar> {
    pub embeddings: Vec<Mat<S>>,
    pub layers: Vec<DenseLayer<S>>,
    pub config: TrainConfig,
    pub seed: u64,
}

/// Width rule for one feature's embedding.
pub fn embedding_dim_rule(cardinality: u32) -> usize {
    ((cardinality as usize).div_ceil(2)).min(50)
}

impl<S: Scalar> EmbeddingModel<S> {
    pub fn n_features(&self) -> usize {
        self.embeddings.len()
    }

    /// Total concatenated width D.
    pub fn embedding_width(&self) -> usize {
        self.embeddings.iter().map(|e| e.cols()).sum()
    }

    pub fn all_finite(&self) -> bool {
        self.embeddings.iter().all(|e| e.all_finite())
            && self
                .layers
                .iter()
                .all(|l| l.weight.all_finite() && l.bias.iter().all(|b| b.is_finite()))
    }
}

/// Build an untrained model for the given UNKNOWN-inclusive cardinalities.
///
/// Embedding entries start uniform in ±1/√d_f, dense weights uniform in
/// ±1/√fan_in, biases at zero; all draws come from the seeded generator in a
/// fixed order so identical configs build identical models.
pub fn build_model<S: Scalar>(cardinalities: &[u32], config: &TrainConfig) -> Result<EmbeddingModel<S>> {
    config.validate()?;
    if cardinalities.is_empty() {
        return Err(Error::InvalidArgument("no features".into()));
    }
    if cardinalities.iter().any(|&c| c == 0) {
        return Err(Error::InvalidArgument("zero cardinality".into()));
    }
    let dims: Vec<usize> = match &config.embedding_dims {
        Some(d) => {
            if d.len() != cardinalities.len() {
                return Err(Error::InvalidArgument(format!(
                    "{} embedding dims for {} features",
                    d.len(),
                    cardinalities.len()
                )));
            }
            d.clone()
        }
        None => cardinalities.iter().map(|&c| embedding_dim_rule(c)).collect(),
    };

    let mut rng = stage_rng(config.seed, "embed-init");
    let uniform = |rng: &mut ChaCha8Rng, scale: f64| -> S { cast((rng.gen::<f64>() * 2.0 - 1.0) * scale) };

    let mut embeddings = Vec::with_capacity(cardinalities.len());
    for (&card, &d) in cardinalities.iter().zip(&dims) {
        let scale = 1.0 / (d as f64).sqrt();
        let mut table: Mat<S> = Mat::zeros(card as usize, d);
        for v in table.data_mut() {
            *v = uniform(&mut rng, scale);
        }
        embeddings.push(table);
    }

    let total_d: usize = dims.iter().sum();
    let mut layers = Vec::new();
    let mut fan_in = total_d;
    for &width in &config.hidden {
        let scale = 1.0 / (fan_in as f64).sqrt();
        let mut weight: Mat<S> = Mat::zeros(width, fan_in);
        for v in weight.data_mut() {
            *v = uniform(&mut rng, scale);
        }
        layers.push(DenseLayer {
            weight,
            bias: vec![S::zero(); width],
            activation: Activation::Relu,
        });
        fan_in = width;
    }
    let scale = 1.0 / (fan_in as f64).sqrt();
    let mut weight: Mat<S> = Mat::zeros(1, fan_in);
    for v in weight.data_mut() {
        *v = uniform(&mut rng, scale);
    }
    layers.push(DenseLayer {
        weight,
        bias: vec![S::zero()],
        activation: Activation::Identity,
    });

    Ok(EmbeddingModel {
        embeddings,
        layers,
        config: config.clone(),
        seed: config.seed,
    })
}

fn lookup_embedding<S: Scalar>(model: &EmbeddingModel<S>, codes: &[u32], out: &mut Vec<S>) -> Result<()> {
    out.clear();
    for (f, table) in model.embeddings.iter().enumerate() {
        let code = codes[f] as usize;
        if code >= table.rows() {
            return Err(Error::InvalidArgument(format!(
                "code {} out of range for feature {} (cardinality {})",
                code,
                f,
                table.rows()
            )));
        }
        out.extend_from_slice(table.row(code));
    }
    Ok(())
}

fn dense_forward<S: Scalar>(model: &EmbeddingModel<S>, input: &[S], activations: &mut Vec<Vec<S>>) -> S {
    activations.clear();
    let mut current = input.to_vec();
    for layer in &model.layers {
        let mut next = vec![S::zero(); layer.weight.rows()];
        for (o, n) in next.iter_mut().enumerate() {
            let row = layer.weight.row(o);
            let mut acc = layer.bias[o];
            for (w, x) in row.iter().zip(&current) {
                acc += *w * *x;
            }
            *n = acc;
        }
        if layer.activation == Activation::Relu {
            for v in next.iter_mut() {
                *v = v.max(S::zero());
            }
        }
        activations.push(next.clone());
        current = next;
    }
    current[0]
}

/// Run one encoded row through the network.
///
/// Returns the raw logit and the concatenated embedding vector.
pub fn forward<S: Scalar>(model: &EmbeddingModel<S>, codes: &[u32]) -> Result<(S, Vec<S>)> {
    if codes.len() != model.n_features() {
        return Err(Error::DimensionMismatch(format!(
            "row has {} features, model {}",
            codes.len(),
            model.n_features()
        )));
    }
    let mut embedding = Vec::with_capacity(model.embedding_width());
    lookup_embedding(model, codes, &mut embedding)?;
    let mut activations = Vec::new();
    let logit = dense_forward(model, &embedding, &mut activations);
    Ok((logit, embedding))
}

/// Embed every dataset row; output is N×D in dataset order.
pub fn embed_dataset<S: Scalar>(model: &EmbeddingModel<S>, dataset: &EncodedDataset) -> Result<Mat<S>> {
    let d = model.embedding_width();
    let mut out = Mat::zeros(dataset.n_rows(), d);
    let mut buf = Vec::with_capacity(d);
    for i in 0..dataset.n_rows() {
        lookup_embedding(model, dataset.row(i), &mut buf)?;
        out.row_mut(i).copy_from_slice(&buf);
    }
    Ok(out)
}

/// Parameter gradients in model tensor order.
#[derive(Debug, Clone)]
pub struct Gradients<S: Scalar> {
    pub embeddings: Vec<Mat<S>>,
    pub weights: Vec<Mat<S>>,
    pub biases: Vec<Vec<S>>,
}

impl<S: Scalar> Gradients<S> {
    fn zeros_like(model: &EmbeddingModel<S>) -> Self {
        Self {
            embeddings: model
                .embeddings
                .iter()
                .map(|e| Mat::zeros(e.rows(), e.cols()))
                .collect(),
            weights: model
                .layers
                .iter()
                .map(|l| Mat::zeros(l.weight.rows(), l.weight.cols()))
                .collect(),
            biases: model.layers.iter().map(|l| vec![S::zero(); l.bias.len()]).collect(),
        }
    }
}

/// Mean class-weighted binary cross-entropy of a code batch, with gradients
/// for every parameter tensor. `codes` is row-major with the model's feature
/// count as stride; anomaly rows (label 1) are weighted by `class_weight`.
pub fn loss_and_grads<S: Scalar>(
    model: &EmbeddingModel<S>,
    codes: &[u32],
    labels: &[u8],
    class_weight: S,
) -> Result<(S, Gradients<S>)> {
    let f = model.n_features();
    let b = labels.len();
    if codes.len() != b * f {
        return Err(Error::DimensionMismatch(format!(
            "{} codes for {} rows of {} features",
            codes.len(),
            b,
            f
        )));
    }
    if b == 0 {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let mut grads = Gradients::zeros_like(model);
    let inv_b: S = S::one() / cast(b as f64);
    let mut total_loss = S::zero();
    let mut embedding = Vec::with_capacity(model.embedding_width());
    let mut activations: Vec<Vec<S>> = Vec::new();

    for i in 0..b {
        let row = &codes[i * f..(i + 1) * f];
        lookup_embedding(model, row, &mut embedding)?;
        let logit = dense_forward(model, &embedding, &mut activations);

        let y = labels[i];
        let w = if y == 1 { class_weight } else { S::one() };
        // stable BCE from the logit
        let z = logit;
        let y_s: S = cast(y as f64);
        let loss = z.max(S::zero()) - z * y_s + (-z.abs()).exp().ln_1p();
        total_loss += w * loss;

        let sigma = S::one() / (S::one() + (-z).exp());
        // d(w·loss)/dz, averaged over the batch
        let mut delta = vec![w * (sigma - y_s) * inv_b];

        for l in (0..model.layers.len()).rev() {
            let layer = &model.layers[l];
            let below: &[S] = if l == 0 { &embedding } else { &activations[l - 1] };
            for (o, &d) in delta.iter().enumerate() {
                grads.biases[l][o] += d;
                let grow = grads.weights[l].row_mut(o);
                for (g, x) in grow.iter_mut().zip(below) {
                    *g += d * *x;
                }
            }
            let mut prev = vec![S::zero(); layer.weight.cols()];
            for (o, &d) in delta.iter().enumerate() {
                let wrow = layer.weight.row(o);
                for (p, w) in prev.iter_mut().zip(wrow) {
                    *p += d * *w;
                }
            }
            if l > 0 {
                // relu mask from the stored activation of the layer below
                for (p, a) in prev.iter_mut().zip(&activations[l - 1]) {
                    if *a <= S::zero() {
                        *p = S::zero();
                    }
                }
            }
            delta = prev;
        }

        // delta now holds d loss / d embedding
        let mut offset = 0;
        for (fi, table) in model.embeddings.iter().enumerate() {
            let dim = table.cols();
            let code = row[fi] as usize;
            let grow = grads.embeddings[fi].row_mut(code);
            for (g, d) in grow.iter_mut().zip(&delta[offset..offset + dim]) {
                *g += *d;
            }
            offset += dim;
        }
    }

    let loss = total_loss * inv_b;
    if !loss.is_finite() {
        return Err(Error::NonFinite("training loss".into()));
    }
    Ok((loss, grads))
}

struct AdamState<S: Scalar> {
    m: Vec<Vec<S>>,
    v: Vec<Vec<S>>,
    t: i32,
}

impl<S: Scalar> AdamState<S> {
    fn new(sizes: &[usize]) -> Self {
        Self {
            m: sizes.iter().map(|&s| vec![S::zero(); s]).collect(),
            v: sizes.iter().map(|&s| vec![S::zero(); s]).collect(),
            t: 0,
        }
    }
}

fn apply_update<S: Scalar>(
    params: &mut [S],
    grads: &[S],
    optimizer: Optimizer,
    lr: S,
    adam: &mut AdamState<S>,
    slot: usize,
) {
    match optimizer {
        Optimizer::Sgd => {
            for (p, g) in params.iter_mut().zip(grads) {
                *p -= lr * *g;
            }
        }
        Optimizer::Adam => {
            let beta1: S = cast(0.9);
            let beta2: S = cast(0.999);
            let eps: S = cast(1e-8);
            let bc1 = S::one() - beta1.powi(adam.t);
            let bc2 = S::one() - beta2.powi(adam.t);
            let m = &mut adam.m[slot];
            let v = &mut adam.v[slot];
            for ((p, &g), (m, v)) in params.iter_mut().zip(grads).zip(m.iter_mut().zip(v.iter_mut())) {
                *m = beta1 * *m + (S::one() - beta1) * g;
                *v = beta2 * *v + (S::one() - beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

/// Train by mini-batch gradient descent on class-weighted cross-entropy.
///
/// Each epoch reshuffles with the seeded generator; with probability
/// `p_unk` a cell's code is swapped to 0 for that step so the UNKNOWN rows
/// receive gradient. Returns the trained model and the per-epoch mean loss.
pub fn train<S: Scalar>(
    mut model: EmbeddingModel<S>,
    dataset: &EncodedDataset,
    config: &TrainConfig,
) -> Result<(EmbeddingModel<S>, Vec<S>)> {
    config.validate()?;
    let n = dataset.n_rows();
    let f = model.n_features();
    if n == 0 {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if dataset.n_features() != f {
        return Err(Error::DimensionMismatch(format!(
            "dataset has {} features, model {}",
            dataset.n_features(),
            f
        )));
    }
    let n_anomaly = dataset.labels().iter().filter(|&&l| l == 1).count();
    if n_anomaly == 0 || n_anomaly == n {
        return Err(Error::SingleClass(format!(
            "{n_anomaly} of {n} rows are anomalies"
        )));
    }
    let class_weight: S = cast(
        config
            .class_weight
            .unwrap_or((n - n_anomaly) as f64 / n_anomaly as f64),
    );
    let lr: S = cast(config.learning_rate);

    let mut tensor_sizes = Vec::new();
    for e in &model.embeddings {
        tensor_sizes.push(e.rows() * e.cols());
    }
    for l in &model.layers {
        tensor_sizes.push(l.weight.rows() * l.weight.cols());
        tensor_sizes.push(l.bias.len());
    }
    let mut adam = AdamState::new(&tensor_sizes);

    let mut rng = stage_rng(config.seed, "embed-train");
    let mut order: Vec<usize> = (0..n).collect();
    let mut batch_codes: Vec<u32> = Vec::with_capacity(config.batch_size * f);
    let mut batch_labels: Vec<u8> = Vec::with_capacity(config.batch_size);
    let mut trace = Vec::with_capacity(config.epochs);

    for _epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = S::zero();
        for chunk in order.chunks(config.batch_size) {
            batch_codes.clear();
            batch_labels.clear();
            for &i in chunk {
                let row = dataset.row(i);
                if config.p_unk > 0.0 {
                    for &code in row {
                        batch_codes.push(if rng.gen::<f64>() < config.p_unk { 0 } else { code });
                    }
                } else {
                    batch_codes.extend_from_slice(row);
                }
                batch_labels.push(dataset.labels()[i]);
            }
            let (loss, grads) = loss_and_grads(&model, &batch_codes, &batch_labels, class_weight)?;
            epoch_loss += loss * cast(chunk.len() as f64);

            adam.t += 1;
            let mut slot = 0;
            for (e, g) in model.embeddings.iter_mut().zip(&grads.embeddings) {
                apply_update(e.data_mut(), g.data(), config.optimizer, lr, &mut adam, slot);
                slot += 1;
            }
            for (l, (gw, gb)) in model
                .layers
                .iter_mut()
                .zip(grads.weights.iter().zip(&grads.biases))
            {
                apply_update(l.weight.data_mut(), gw.data(), config.optimizer, lr, &mut adam, slot);
                slot += 1;
                apply_update(&mut l.bias, gb, config.optimizer, lr, &mut adam, slot);
                slot += 1;
            }
        }
        if !model.all_finite() {
            return Err(Error::NonFinite("model parameters after epoch".into()));
        }
        trace.push(epoch_loss / cast(n as f64));
    }
    Ok((model, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn toy_dataset() -> EncodedDataset {
        // two features; label = 1 iff feature 0 has code 2
        let mut codes = Vec::new();
        let mut labels = Vec::new();
        for i in 0..64 {
            let a = (i % 3) + 1;
            let b = (i % 4) + 1;
            codes.push(a as u32);
            codes.push(b as u32);
            labels.push(u8::from(a == 2));
        }
        EncodedDataset::new(
            codes,
            64,
            vec!["a".into(), "b".into()],
            vec![4, 5],
            labels,
        )
    }

    fn small_config() -> TrainConfig {
        TrainConfig {
            epochs: 200,
            batch_size: 16,
            hidden: vec![8],
            p_unk: 0.0,
            seed: 5,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn dim_rule_matches_hand_values() {
        assert_eq!(embedding_dim_rule(7), 4);
        assert_eq!(embedding_dim_rule(115), 50);
        assert_eq!(embedding_dim_rule(2), 1);
        assert_eq!(embedding_dim_rule(100), 50);
    }

    #[test]
    fn canonical_schema_width_is_246() {
        // UNKNOWN-inclusive cardinalities of the canonical 10-feature schema
        let cards = [7u32, 115, 442, 112, 10, 406, 13, 13, 19, 25];
        let model: EmbeddingModel<f64> = build_model(&cards, &TrainConfig::default()).unwrap();
        assert_eq!(model.embeddings[0].rows(), 7);
        assert_eq!(model.embeddings[0].cols(), 4);
        assert_eq!(model.embedding_width(), 246);
    }

    #[test]
    fn same_seed_builds_identical_models() {
        let cards = [5u32, 9];
        let a: EmbeddingModel<f64> = build_model(&cards, &small_config()).unwrap();
        let b: EmbeddingModel<f64> = build_model(&cards, &small_config()).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn unknown_row_embeds_row_zero() {
        let model: EmbeddingModel<f64> = build_model(&[4, 6], &small_config()).unwrap();
        let (_, emb) = forward(&model, &[0, 0]).unwrap();
        let mut expected = model.embeddings[0].row(0).to_vec();
        expected.extend_from_slice(model.embeddings[1].row(0));
        assert_eq!(emb, expected);
    }

    #[test]
    fn zero_dense_weights_pin_logit_to_bias() {
        let mut model: EmbeddingModel<f64> = build_model(&[4, 6], &small_config()).unwrap();
        for layer in &mut model.layers {
            for w in layer.weight.data_mut() {
                *w = 0.0;
            }
        }
        model.layers.last_mut().unwrap().bias[0] = 1.25;
        let (logit_a, _) = forward(&model, &[1, 2]).unwrap();
        let (logit_b, _) = forward(&model, &[3, 5]).unwrap();
        assert_abs_diff_eq!(logit_a, 1.25, epsilon = 1e-15);
        assert_abs_diff_eq!(logit_b, 1.25, epsilon = 1e-15);
    }

    #[test]
    fn forward_is_pure() {
        let model: EmbeddingModel<f64> = build_model(&[4, 6], &small_config()).unwrap();
        let a = forward(&model, &[2, 3]).unwrap();
        let b = forward(&model, &[2, 3]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn out_of_range_code_is_an_error() {
        let model: EmbeddingModel<f64> = build_model(&[4, 6], &small_config()).unwrap();
        assert!(forward(&model, &[4, 0]).is_err());
    }

    #[test]
    fn separable_toy_set_reaches_full_accuracy() {
        let ds = toy_dataset();
        let config = small_config();
        let model = build_model(ds.cardinalities(), &config).unwrap();
        let (trained, trace) = train::<f64>(model, &ds, &config).unwrap();
        assert!(trace.last().unwrap() < trace.first().unwrap());
        let mut correct = 0;
        for i in 0..ds.n_rows() {
            let (logit, _) = forward(&trained, ds.row(i)).unwrap();
            let pred = u8::from(logit > 0.0);
            correct += usize::from(pred == ds.labels()[i]);
        }
        assert_eq!(correct, ds.n_rows());
    }

    #[test]
    fn unit_class_weight_equals_plain_mean_loss() {
        let ds = toy_dataset();
        let config = small_config();
        let model: EmbeddingModel<f64> = build_model(ds.cardinalities(), &config).unwrap();
        let codes: Vec<u32> = (0..8).flat_map(|i| ds.row(i).to_vec()).collect();
        let labels: Vec<u8> = ds.labels()[..8].to_vec();
        let (loss, _) = loss_and_grads(&model, &codes, &labels, 1.0).unwrap();
        let mut manual = 0.0;
        for i in 0..8 {
            let (z, _) = forward(&model, ds.row(i)).unwrap();
            let y = labels[i] as f64;
            manual += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
        }
        assert_abs_diff_eq!(loss, manual / 8.0, epsilon = 1e-14);
    }

    #[test]
    fn single_class_dataset_is_rejected() {
        let ds = EncodedDataset::new(vec![1, 1, 2, 1], 2, vec!["a".into(), "b".into()], vec![3, 3], vec![0, 0]);
        let config = small_config();
        let model = build_model::<f64>(ds.cardinalities(), &config).unwrap();
        assert!(matches!(train(model, &ds, &config), Err(Error::SingleClass(_))));
    }

    #[test]
    fn training_is_seed_deterministic() {
        let ds = toy_dataset();
        let config = TrainConfig {
            epochs: 3,
            ..small_config()
        };
        let run = || {
            let model = build_model::<f64>(ds.cardinalities(), &config).unwrap();
            let (trained, _) = train(model, &ds, &config).unwrap();
            serde_json::to_string(&trained).unwrap()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn embed_dataset_matches_lookup() {
        let ds = toy_dataset();
        let model: EmbeddingModel<f64> = build_model(ds.cardinalities(), &small_config()).unwrap();
        let emb = embed_dataset(&model, &ds).unwrap();
        assert_eq!(emb.rows(), ds.n_rows());
        assert_eq!(emb.cols(), model.embedding_width());
        for i in [0usize, 5, 63] {
            let (_, row_emb) = forward(&model, ds.row(i)).unwrap();
            assert_eq!(emb.row(i), row_emb.as_slice());
        }
        // identical input rows embed identically
        assert_eq!(ds.row(0), ds.row(12));
        assert_eq!(emb.row(0), emb.row(12));
        let empty = ds.select_rows(&[]);
        let emb0 = embed_dataset(&model, &empty).unwrap();
        assert_eq!(emb0.rows(), 0);
        assert_eq!(emb0.cols(), model.embedding_width());
    }
}
