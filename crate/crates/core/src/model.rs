//! Feed-forward classifier over a flat parameter vector.
//!
//! Layer `l` occupies `n_out * n_in` row-major weights followed by `n_out`
//! biases. Hidden layers use ReLU, the output layer softmax, and training
//! minimizes mean cross-entropy with plain mini-batch SGD.

use std::ops::{Deref, DerefMut};

use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// A flat real-valued vector holding global weights, local weights or updates.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn zeros(d: usize) -> Self {
        Self(vec![0.0; d])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// `self - other`, coordinate-wise.
    pub fn sub(&self, other: &ParamVector) -> ParamVector {
        debug_assert_eq!(self.len(), other.len());
        ParamVector(self.iter().zip(other.iter()).map(|(a, b)| a - b).collect())
    }

    /// `self + other`, coordinate-wise.
    pub fn add(&self, other: &ParamVector) -> ParamVector {
        debug_assert_eq!(self.len(), other.len());
        ParamVector(self.iter().zip(other.iter()).map(|(a, b)| a + b).collect())
    }

    /// `self += scale * other`.
    pub fn add_scaled(&mut self, scale: f64, other: &[f64]) {
        debug_assert_eq!(self.len(), other.len());
        for (a, b) in self.0.iter_mut().zip(other) {
            *a += scale * b;
        }
    }

    pub fn squared_distance(&self, other: &ParamVector) -> f64 {
        squared_distance(self, other)
    }
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for ParamVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for ParamVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

/// Layer widths from input to output. Hidden layers are ReLU, output is softmax.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MlpArchitecture {
    layer_sizes: Vec<usize>,
}

impl MlpArchitecture {
    pub fn new(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(Error::InvalidArchitecture(format!(
                "need at least input and output layers, got {layer_sizes:?}"
            )));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::InvalidArchitecture(format!(
                "zero-width layer in {layer_sizes:?}"
            )));
        }
        Ok(Self { layer_sizes })
    }

    /// The 784-30-10 MNIST network.
    pub fn mnist() -> Self {
        Self {
            layer_sizes: vec![784, 30, 10],
        }
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().expect("validated non-empty")
    }

    /// Weights plus biases over every consecutive layer pair.
    pub fn param_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }

    fn layers(&self) -> impl Iterator<Item = Layer> + '_ {
        let mut offset = 0;
        self.layer_sizes.windows(2).map(move |w| {
            let layer = Layer {
                n_in: w[0],
                n_out: w[1],
                offset,
            };
            offset += w[0] * w[1] + w[1];
            layer
        })
    }
}

#[derive(Clone, Copy, Debug)]
struct Layer {
    n_in: usize,
    n_out: usize,
    offset: usize,
}

impl Layer {
    fn weights<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        &params[self.offset..self.offset + self.n_in * self.n_out]
    }

    fn biases<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        let start = self.offset + self.n_in * self.n_out;
        &params[start..start + self.n_out]
    }

    fn apply(&self, params: &[f64], input: &[f64], out: &mut Vec<f64>) {
        let w = self.weights(params);
        out.clear();
        out.extend(self.biases(params).iter().enumerate().map(|(j, b)| {
            let row = &w[j * self.n_in..(j + 1) * self.n_in];
            b + row.iter().zip(input).map(|(a, x)| a * x).sum::<f64>()
        }));
    }
}

/// Local training hyperparameters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainSpec {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
}

impl Default for TrainSpec {
    fn default() -> Self {
        Self {
            epochs: 1,
            batch_size: 32,
            learning_rate: 0.1,
        }
    }
}

/// Uniform Xavier-style weights, zero biases.
pub fn init_params(arch: &MlpArchitecture, seed: u64) -> ParamVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![0.0; arch.param_count()];
    for layer in arch.layers() {
        let bound = (6.0 / (layer.n_in + layer.n_out) as f64).sqrt();
        for w in &mut values[layer.offset..layer.offset + layer.n_in * layer.n_out] {
            *w = rng.random_range(-bound..=bound);
        }
    }
    ParamVector(values)
}

fn check_params(arch: &MlpArchitecture, params: &[f64]) -> Result<()> {
    if params.len() != arch.param_count() {
        return Err(Error::DimensionMismatch {
            expected: arch.param_count(),
            actual: params.len(),
        });
    }
    Ok(())
}

fn check_data(arch: &MlpArchitecture, data: &Dataset) -> Result<()> {
    if data.dim() != arch.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: arch.input_dim(),
            actual: data.dim(),
        });
    }
    if data.class_count() > arch.output_dim() {
        return Err(Error::LabelOutOfRange {
            label: data.class_count() - 1,
            classes: arch.output_dim(),
        });
    }
    Ok(())
}

/// Output-layer logits, without softmax.
fn logits(arch: &MlpArchitecture, params: &[f64], input: &[f64]) -> Vec<f64> {
    let mut current = input.to_vec();
    let mut next = Vec::new();
    let n_layers = arch.layer_sizes.len() - 1;
    for (i, layer) in arch.layers().enumerate() {
        layer.apply(params, &current, &mut next);
        if i + 1 < n_layers {
            for v in &mut next {
                *v = v.max(0.0);
            }
        }
        std::mem::swap(&mut current, &mut next);
    }
    current
}

fn softmax_in_place(values: &mut [f64]) {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in values.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in values.iter_mut() {
        *v /= sum;
    }
}

/// Index of the largest value; ties go to the lowest index and NaN never wins.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] || values[best].is_nan() && !v.is_nan() {
            best = i;
        }
    }
    best
}

/// Class probabilities for one input.
pub fn forward(arch: &MlpArchitecture, params: &ParamVector, input: &[f64]) -> Result<Vec<f64>> {
    check_params(arch, params)?;
    if input.len() != arch.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: arch.input_dim(),
            actual: input.len(),
        });
    }
    let mut out = logits(arch, params, input);
    softmax_in_place(&mut out);
    Ok(out)
}

/// Mean cross-entropy and its gradient over the whole of `batch`.
pub fn loss_and_grad(arch: &MlpArchitecture, params: &ParamVector, batch: &Dataset) -> Result<(f64, ParamVector)> {
    check_params(arch, params)?;
    check_data(arch, batch)?;
    if batch.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let indices: Vec<usize> = (0..batch.len()).collect();
    let mut grad = vec![0.0; params.len()];
    let loss = accumulate_batch(arch, params, batch, &indices, &mut grad);
    Ok((loss, ParamVector(grad)))
}

/// Backpropagates the rows `indices` of `data`, writing the mean gradient
/// into `grad` and returning the mean loss. Inputs are assumed validated.
fn accumulate_batch(arch: &MlpArchitecture, params: &[f64], data: &Dataset, indices: &[usize], grad: &mut [f64]) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let layers: Vec<Layer> = arch.layers().collect();
    let n_layers = layers.len();
    // activations[0] is the input; activations[l + 1] is the (post-ReLU) output of layer l.
    let mut activations: Vec<Vec<f64>> = vec![Vec::new(); n_layers + 1];
    let mut delta = Vec::new();
    let mut prev_delta = Vec::new();
    let mut loss = 0.0;

    for &i in indices {
        activations[0].clear();
        activations[0].extend_from_slice(data.row(i));
        for (l, layer) in layers.iter().enumerate() {
            let (head, tail) = activations.split_at_mut(l + 1);
            layer.apply(params, &head[l], &mut tail[0]);
            if l + 1 < n_layers {
                for v in tail[0].iter_mut() {
                    *v = v.max(0.0);
                }
            }
        }
        let out = &mut activations[n_layers];
        softmax_in_place(out);
        let label = data.label(i);
        loss -= out[label].max(f64::MIN_POSITIVE).ln();

        delta.clear();
        delta.extend_from_slice(out);
        delta[label] -= 1.0;

        for l in (0..n_layers).rev() {
            let layer = layers[l];
            let input = &activations[l];
            let w_start = layer.offset;
            let b_start = layer.offset + layer.n_in * layer.n_out;
            for (j, &dj) in delta.iter().enumerate() {
                if dj == 0.0 {
                    continue;
                }
                grad[b_start + j] += dj;
                let row = &mut grad[w_start + j * layer.n_in..w_start + (j + 1) * layer.n_in];
                for (g, &x) in row.iter_mut().zip(input) {
                    *g += dj * x;
                }
            }
            if l > 0 {
                let w = layer.weights(params);
                prev_delta.clear();
                prev_delta.resize(layer.n_in, 0.0);
                for (j, &dj) in delta.iter().enumerate() {
                    if dj == 0.0 {
                        continue;
                    }
                    let row = &w[j * layer.n_in..(j + 1) * layer.n_in];
                    for (p, &wk) in prev_delta.iter_mut().zip(row) {
                        *p += dj * wk;
                    }
                }
                // ReLU derivative, read off the stored activation.
                for (p, &a) in prev_delta.iter_mut().zip(input) {
                    if a <= 0.0 {
                        *p = 0.0;
                    }
                }
                std::mem::swap(&mut delta, &mut prev_delta);
            }
        }
    }

    let scale = 1.0 / indices.len() as f64;
    grad.iter_mut().for_each(|g| *g *= scale);
    loss * scale
}

/// Shuffled mini-batch SGD from `start`. The final partial batch is kept.
pub fn sgd_train(
    arch: &MlpArchitecture,
    start: &ParamVector,
    data: &Dataset,
    spec: &TrainSpec,
    rng_seed: u64,
) -> Result<ParamVector> {
    check_params(arch, start)?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_data(arch, data)?;
    if spec.batch_size == 0 || spec.batch_size > data.len() {
        return Err(Error::BatchTooLarge {
            batch: spec.batch_size,
            len: data.len(),
        });
    }
    let mut params = start.clone();
    if spec.epochs == 0 || spec.learning_rate == 0.0 {
        return Ok(params);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut grad = vec![0.0; params.len()];
    for _ in 0..spec.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(spec.batch_size) {
            accumulate_batch(arch, &params, data, batch, &mut grad);
            params.add_scaled(-spec.learning_rate, &grad);
        }
    }
    Ok(params)
}

/// Argmax accuracy on `data`; `error_rate = 1 - accuracy`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Evaluation {
    pub accuracy: f64,
    pub error_rate: f64,
}

pub fn evaluate(arch: &MlpArchitecture, params: &ParamVector, data: &Dataset) -> Result<Evaluation> {
    check_params(arch, params)?;
    if data.is_empty() {
        return Err(Error::EmptyDataset);
    }
    check_data(arch, data)?;
    let correct = (0..data.len())
        .filter(|&i| argmax(&logits(arch, params, data.row(i))) == data.label(i))
        .count();
    let accuracy = correct as f64 / data.len() as f64;
    Ok(Evaluation {
        accuracy,
        error_rate: 1.0 - accuracy,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::gen_blobs;
    use proptest::prelude::*;
    use rand::Rng;

    fn arch(sizes: &[usize]) -> MlpArchitecture {
        MlpArchitecture::new(sizes.to_vec()).unwrap()
    }

    fn random_batch(dim: usize, classes: usize, n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let features = (0..n * dim).map(|_| rng.random_range(-1.0..1.0)).collect();
        let labels = (0..n).map(|_| rng.random_range(0..classes)).collect();
        Dataset::new(features, labels, dim, classes).unwrap()
    }

    #[test]
    fn param_count_matches_hand_arithmetic() {
        assert_eq!(MlpArchitecture::mnist().param_count(), 785 * 30 + 31 * 10);
        assert_eq!(MlpArchitecture::mnist().param_count(), 23_860);
        assert_eq!(arch(&[1, 1]).param_count(), 2);
    }

    #[test]
    fn init_is_deterministic_and_bias_free() {
        let a = arch(&[2, 2]);
        assert_eq!(init_params(&a, 7), init_params(&a, 7));
        assert_ne!(init_params(&a, 7), init_params(&a, 8));

        let p = init_params(&arch(&[1, 1]), 3);
        assert_eq!(p.len(), 2);
        assert_eq!(p[1], 0.0);

        let a = arch(&[4, 3, 2]);
        let p = init_params(&a, 1);
        let bound = (6.0f64 / 7.0).sqrt();
        assert!(p[..12].iter().all(|w| w.abs() <= bound));
        assert!(p[12..15].iter().all(|&b| b == 0.0));
        assert!(p[21..23].iter().all(|&b| b == 0.0));
    }

    #[test]
    fn invalid_architectures() {
        assert!(MlpArchitecture::new(vec![]).is_err());
        assert!(MlpArchitecture::new(vec![3]).is_err());
        assert!(MlpArchitecture::new(vec![3, 0, 2]).is_err());
    }

    #[test]
    fn zero_params_give_uniform_output() {
        let a = arch(&[3, 5, 4]);
        let p = ParamVector::zeros(a.param_count());
        let out = forward(&a, &p, &[0.3, -2.0, 9.0]).unwrap();
        for v in out {
            assert!((v - 0.25).abs() < 1e-15);
        }
    }

    #[test]
    fn forward_rejects_bad_dimensions() {
        let a = arch(&[3, 2]);
        let p = ParamVector::zeros(a.param_count());
        assert!(forward(&a, &p, &[1.0, 2.0]).is_err());
        assert!(forward(&a, &ParamVector::zeros(3), &[1.0, 2.0, 3.0]).is_err());
    }

    #[test]
    fn softmax_normalized_on_random_inputs() {
        let a = arch(&[6, 8, 5]);
        let p = init_params(&a, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..100 {
            let x: Vec<f64> = (0..6).map(|_| rng.random_range(-5.0..5.0)).collect();
            let out = forward(&a, &p, &x).unwrap();
            let sum: f64 = out.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(out.iter().all(|&v| v > 0.0 && v < 1.0));
        }
    }

    #[test]
    fn softmax_survives_huge_logits() {
        let a = arch(&[2, 3]);
        let mut p = ParamVector::zeros(a.param_count());
        p[0] = 4e12;
        p[3] = -4e12;
        let out = forward(&a, &p, &[1.0, 0.0]).unwrap();
        assert!(out.iter().all(|v| v.is_finite()));
        assert!((out.iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn output_scaling_preserves_argmax() {
        let a = arch(&[4, 6, 3]);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let out_layer = a.layers().last().unwrap();
        for trial in 0..50 {
            let p = init_params(&a, trial);
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-2.0..2.0)).collect();
            let scale = rng.random_range(0.01..100.0);
            let mut scaled = p.clone();
            for v in &mut scaled[out_layer.offset..] {
                *v *= scale;
            }
            assert_eq!(
                argmax(&forward(&a, &p, &x).unwrap()),
                argmax(&forward(&a, &scaled, &x).unwrap())
            );
        }
    }

    #[test]
    fn argmax_tie_break() {
        assert_eq!(argmax(&[0.2, 0.5, 0.5]), 1);
        assert_eq!(argmax(&[1.0, 1.0]), 0);
        assert_eq!(argmax(&[f64::NAN, 0.1, 0.3]), 2);
        assert_eq!(argmax(&[f64::NAN, f64::NAN]), 0);
    }

    #[test]
    fn uniform_prediction_loss_is_ln_classes() {
        let a = arch(&[3, 10]);
        let p = ParamVector::zeros(a.param_count());
        let batch = Dataset::new(vec![0.5, 0.1, -0.2], vec![4], 3, 10).unwrap();
        let (loss, grad) = loss_and_grad(&a, &p, &batch).unwrap();
        assert!((loss - 10f64.ln()).abs() < 1e-12);
        assert!((loss - std::f64::consts::LN_10).abs() < 1e-12);
        assert_eq!(grad.len(), a.param_count());
    }

    #[test]
    fn loss_rejects_bad_batches() {
        let a = arch(&[2, 3]);
        let p = ParamVector::zeros(a.param_count());
        let empty = Dataset::new(vec![], vec![], 2, 3).unwrap();
        assert!(matches!(loss_and_grad(&a, &p, &empty), Err(Error::EmptyBatch)));
        let wide = Dataset::new(vec![0.0, 0.0], vec![4], 2, 5).unwrap();
        assert!(matches!(
            loss_and_grad(&a, &p, &wide),
            Err(Error::LabelOutOfRange { .. })
        ));
    }

    #[test]
    fn duplicated_batch_is_invariant() {
        let a = arch(&[4, 3, 2]);
        let p = init_params(&a, 4);
        let batch = random_batch(4, 2, 5, 9);
        let doubled = batch.subset(&[0, 1, 2, 3, 4, 0, 1, 2, 3, 4]);
        let (l1, g1) = loss_and_grad(&a, &p, &batch).unwrap();
        let (l2, g2) = loss_and_grad(&a, &p, &doubled).unwrap();
        assert!((l1 - l2).abs() < 1e-12);
        for (x, y) in g1.iter().zip(g2.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    // Central differences, kept independent of the backprop path.
    fn finite_difference_grad(a: &MlpArchitecture, p: &ParamVector, batch: &Dataset, h: f64) -> Vec<f64> {
        let loss = |q: &ParamVector| -> f64 {
            (0..batch.len())
                .map(|i| {
                    let probs = forward(a, q, batch.row(i)).unwrap();
                    -probs[batch.label(i)].ln()
                })
                .sum::<f64>()
                / batch.len() as f64
        };
        (0..p.len())
            .map(|k| {
                let mut plus = p.clone();
                let mut minus = p.clone();
                plus[k] += h;
                minus[k] -= h;
                (loss(&plus) - loss(&minus)) / (2.0 * h)
            })
            .collect()
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let a = arch(&[4, 3, 2]);
        for seed in 0..5 {
            let mut p = init_params(&a, seed);
            // Nonzero biases keep ReLU kinks away from the probe points.
            for v in p.iter_mut() {
                *v += 0.05;
            }
            let batch = random_batch(4, 2, 6, 100 + seed);
            let (_, analytic) = loss_and_grad(&a, &p, &batch).unwrap();
            let numeric = finite_difference_grad(&a, &p, &batch, 1e-5);
            for (x, y) in analytic.iter().zip(&numeric) {
                let rel = (x - y).abs() / x.abs().max(y.abs()).max(1e-8);
                assert!(rel < 1e-4 || (x - y).abs() < 1e-9, "{x} vs {y}");
            }
        }
    }

    #[test]
    fn sgd_degenerate_settings_return_start() {
        let a = arch(&[2, 4, 3]);
        let data = gen_blobs(3, 2, 10, 0.2, 1).unwrap();
        let start = init_params(&a, 1);
        let zero_lr = TrainSpec {
            epochs: 1,
            batch_size: 8,
            learning_rate: 0.0,
        };
        assert_eq!(sgd_train(&a, &start, &data, &zero_lr, 3).unwrap(), start);
        let zero_epochs = TrainSpec {
            epochs: 0,
            batch_size: 8,
            learning_rate: 0.1,
        };
        assert_eq!(sgd_train(&a, &start, &data, &zero_epochs, 3).unwrap(), start);
    }

    #[test]
    fn sgd_errors() {
        let a = arch(&[2, 3]);
        let start = init_params(&a, 0);
        let empty = Dataset::new(vec![], vec![], 2, 3).unwrap();
        assert!(matches!(
            sgd_train(&a, &start, &empty, &TrainSpec::default(), 0),
            Err(Error::EmptyDataset)
        ));
        let tiny = gen_blobs(3, 2, 2, 0.1, 0).unwrap();
        assert!(matches!(
            sgd_train(&a, &start, &tiny, &TrainSpec::default(), 0),
            Err(Error::BatchTooLarge { .. })
        ));
    }

    #[test]
    fn sgd_is_deterministic() {
        let a = arch(&[5, 8, 3]);
        let data = gen_blobs(3, 5, 40, 0.4, 2).unwrap();
        let start = init_params(&a, 9);
        let spec = TrainSpec::default();
        assert_eq!(
            sgd_train(&a, &start, &data, &spec, 17).unwrap(),
            sgd_train(&a, &start, &data, &spec, 17).unwrap()
        );
    }

    #[test]
    fn sgd_reduces_training_error_on_separable_blobs() {
        let a = arch(&[2, 8, 2]);
        let mut improved = 0;
        for seed in 0..10 {
            let data = gen_blobs(2, 2, 50, 0.15, 1000 + seed).unwrap();
            let start = init_params(&a, seed);
            let spec = TrainSpec {
                epochs: 5,
                batch_size: 10,
                learning_rate: 0.1,
            };
            let trained = sgd_train(&a, &start, &data, &spec, seed).unwrap();
            let before = evaluate(&a, &start, &data).unwrap().error_rate;
            let after = evaluate(&a, &trained, &data).unwrap().error_rate;
            if after < before {
                improved += 1;
            }
        }
        assert!(improved > 5, "improved in {improved}/10 seeds");
    }

    #[test]
    fn evaluate_counts_argmax_hits() {
        let a = arch(&[2, 3]);
        let mut p = ParamVector::zeros(a.param_count());
        // Bias of class 2 dominates, so every prediction is 2.
        p[8] = 1.0;
        let data = Dataset::new(vec![0.1; 8], vec![2; 4], 2, 3).unwrap();
        let e = evaluate(&a, &p, &data).unwrap();
        assert_eq!(e.accuracy, 1.0);
        assert_eq!(e, evaluate(&a, &p, &data).unwrap());
        assert!(matches!(
            evaluate(&a, &p, &Dataset::new(vec![], vec![], 2, 3).unwrap()),
            Err(Error::EmptyDataset)
        ));
    }

    #[test]
    fn zero_params_predict_class_zero() {
        let a = arch(&[20, 10]);
        let data = gen_blobs(10, 20, 30, 0.5, 8).unwrap();
        let e = evaluate(&a, &ParamVector::zeros(a.param_count()), &data).unwrap();
        assert!((e.accuracy - 0.1).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn accuracy_and_error_sum_to_one(correct in 0usize..=500, extra in 1usize..500) {
            let n = correct + extra;
            let accuracy = correct as f64 / n as f64;
            prop_assert_eq!(accuracy + (1.0 - accuracy), 1.0);
        }
    }
}
