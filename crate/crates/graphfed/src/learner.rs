//! Per-device model: a small feed-forward softmax classifier trained with
//! mini-batch SGD. Weights live in a single flat vector so client updates
//! stack directly into the gradient matrix.

use rand::Rng;

use crate::data::LabeledPool;
use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::schedule::samples_used;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
}

/// Layer widths (input dim, hidden sizes, output classes) plus the seed of
/// the stream the initial weights are drawn from.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub layer_sizes: Vec<usize>,
    pub activation: Activation,
    pub seed: u64,
}

impl ModelConfig {
    pub fn new(layer_sizes: Vec<usize>, seed: u64) -> Result<ModelConfig> {
        if layer_sizes.len() < 2 {
            return Err(Error::input("model needs at least input and output layers"));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::input("layer sizes must be at least 1"));
        }
        Ok(ModelConfig {
            layer_sizes,
            activation: Activation::Relu,
            seed,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn classes(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    /// Total parameter count B = sum over layers of (fan_in + 1) * fan_out.
    pub fn param_count(&self) -> usize {
        self.layer_sizes
            .windows(2)
            .map(|w| (w[0] + 1) * w[1])
            .sum()
    }

    /// Deterministic FLOP count per input sample: forward pass costs
    /// 2 * fan_in * fan_out multiply-adds per layer, backward twice that,
    /// so a training sample costs 3x the forward pass.
    pub fn flops_per_sample(&self) -> u64 {
        let forward: u64 = self
            .layer_sizes
            .windows(2)
            .map(|w| 2 * w[0] as u64 * w[1] as u64)
            .sum();
        3 * forward
    }
}

/// Flat parameter vector with the layer layout of its `ModelConfig`:
/// for each layer, a row-major fan_in x fan_out weight block followed by
/// fan_out biases.
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    layer_sizes: Vec<usize>,
    flat: Vec<f64>,
}

impl Weights {
    pub fn zeros(config: &ModelConfig) -> Weights {
        Weights {
            layer_sizes: config.layer_sizes.clone(),
            flat: vec![0.0; config.param_count()],
        }
    }

    /// Uniform init in +-sqrt(6 / (fan_in + fan_out)), biases zero, drawn in
    /// layer order from the given stream.
    pub fn init<R: Rng>(config: &ModelConfig, rng: &mut R) -> Weights {
        let mut w = Weights::zeros(config);
        let mut offset = 0;
        for pair in config.layer_sizes.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
            for i in 0..fan_in * fan_out {
                w.flat[offset + i] = rng.random_range(-bound..bound);
            }
            offset += (fan_in + 1) * fan_out;
        }
        w
    }

    pub fn from_flat(config: &ModelConfig, flat: Vec<f64>) -> Result<Weights> {
        if flat.len() != config.param_count() {
            return Err(Error::input(format!(
                "{} parameters for a model with B = {}",
                flat.len(),
                config.param_count()
            )));
        }
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::input("weights contain non-finite entries"));
        }
        Ok(Weights {
            layer_sizes: config.layer_sizes.clone(),
            flat,
        })
    }

    pub fn flat(&self) -> &[f64] {
        &self.flat
    }

    pub fn flat_mut(&mut self) -> &mut [f64] {
        &mut self.flat
    }

    /// Parameter count B.
    pub fn len(&self) -> usize {
        self.flat.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    /// In-place `self += delta`, used to apply a broadcast aggregate.
    pub fn add_assign(&mut self, delta: &[f64]) {
        debug_assert_eq!(delta.len(), self.flat.len());
        for (w, d) in self.flat.iter_mut().zip(delta) {
            *w += d;
        }
    }

    /// Offset of layer l's weight block; biases follow the weights.
    fn layer_offset(&self, layer: usize) -> usize {
        self.layer_sizes
            .windows(2)
            .take(layer)
            .map(|w| (w[0] + 1) * w[1])
            .sum()
    }

    fn layer_count(&self) -> usize {
        self.layer_sizes.len() - 1
    }
}

/// A mini-batch: m rows of inputs and their integer labels.
#[derive(Debug, Clone)]
pub struct Batch {
    pub inputs: Mat,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn new(inputs: Mat, labels: Vec<usize>) -> Result<Batch> {
        if inputs.rows() == 0 {
            return Err(Error::input("batch must contain at least one sample"));
        }
        if inputs.rows() != labels.len() {
            return Err(Error::input(format!(
                "{} labels for {} inputs",
                labels.len(),
                inputs.rows()
            )));
        }
        if !inputs.all_finite() {
            return Err(Error::input("batch inputs contain non-finite values"));
        }
        Ok(Batch { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

struct ForwardPass {
    /// Pre-activations per layer.
    zs: Vec<Mat>,
    /// acts[0] is the input; acts[l+1] the activation after layer l; the last
    /// entry holds softmax probabilities.
    acts: Vec<Mat>,
}

fn forward_pass(weights: &Weights, inputs: &Mat) -> Result<ForwardPass> {
    let sizes = &weights.layer_sizes;
    if inputs.cols() != sizes[0] {
        return Err(Error::input(format!(
            "inputs have {} features, model expects {}",
            inputs.cols(),
            sizes[0]
        )));
    }
    let layers = weights.layer_count();
    let mut zs = Vec::with_capacity(layers);
    let mut acts = Vec::with_capacity(layers + 1);
    acts.push(inputs.clone());
    for l in 0..layers {
        let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
        let offset = weights.layer_offset(l);
        let w = &weights.flat[offset..offset + fan_in * fan_out];
        let b = &weights.flat[offset + fan_in * fan_out..offset + (fan_in + 1) * fan_out];
        let a = acts.last().unwrap();
        let m = a.rows();
        let mut z = Mat::zeros(m, fan_out);
        for i in 0..m {
            let arow = a.row(i);
            let zrow = z.row_mut(i);
            zrow.copy_from_slice(b);
            for (k, &av) in arow.iter().enumerate() {
                if av == 0.0 {
                    continue;
                }
                let wrow = &w[k * fan_out..(k + 1) * fan_out];
                for (zv, wv) in zrow.iter_mut().zip(wrow) {
                    *zv += av * wv;
                }
            }
        }
        let act = if l + 1 < layers {
            Mat::from_fn(m, fan_out, |i, j| z[(i, j)].max(0.0))
        } else {
            softmax_rows(&z)?
        };
        zs.push(z);
        acts.push(act);
    }
    Ok(ForwardPass { zs, acts })
}

fn softmax_rows(z: &Mat) -> Result<Mat> {
    let mut out = Mat::zeros(z.rows(), z.cols());
    for i in 0..z.rows() {
        let row = z.row(i);
        let max = row.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
        if !max.is_finite() {
            return Err(Error::numeric("non-finite logits in forward pass"));
        }
        let mut sum = 0.0;
        for (o, &v) in out.row_mut(i).iter_mut().zip(row) {
            *o = (v - max).exp();
            sum += *o;
        }
        for o in out.row_mut(i) {
            *o /= sum;
        }
    }
    Ok(out)
}

/// Class probabilities for a batch of inputs; rows sum to 1.
pub fn forward(weights: &Weights, inputs: &Mat) -> Result<Mat> {
    let pass = forward_pass(weights, inputs)?;
    let probs = pass.acts.into_iter().next_back().unwrap();
    if !probs.all_finite() {
        return Err(Error::numeric("forward pass produced non-finite probabilities"));
    }
    Ok(probs)
}

/// Argmax class predictions for a batch of inputs.
pub fn predict(weights: &Weights, inputs: &Mat) -> Result<Vec<usize>> {
    let probs = forward(weights, inputs)?;
    Ok((0..probs.rows())
        .map(|i| {
            let row = probs.row(i);
            let mut best = 0;
            for (j, &v) in row.iter().enumerate() {
                if v > row[best] {
                    best = j;
                }
            }
            best
        })
        .collect())
}

/// Mean cross-entropy over the batch and its gradient with respect to the
/// flat parameter vector.
pub fn loss_and_gradient(weights: &Weights, batch: &Batch) -> Result<(f64, Vec<f64>)> {
    let classes = *weights.layer_sizes.last().unwrap();
    for (i, &y) in batch.labels.iter().enumerate() {
        if y >= classes {
            return Err(Error::input(format!(
                "sample {i}: label {y} out of range for {classes} classes"
            )));
        }
    }
    let pass = forward_pass(weights, &batch.inputs)?;
    let m = batch.len();
    let probs = pass.acts.last().unwrap();
    let logits = pass.zs.last().unwrap();

    let mut loss = 0.0;
    for (i, &y) in batch.labels.iter().enumerate() {
        let row = logits.row(i);
        let max = row.iter().fold(f64::NEG_INFINITY, |mx, &v| mx.max(v));
        let logsumexp = max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        loss += logsumexp - row[y];
    }
    loss /= m as f64;

    // Backward pass: dZ at the output is (P - onehot) / m.
    let classes_out = probs.cols();
    let mut dz = Mat::from_fn(m, classes_out, |i, j| {
        let indicator = if batch.labels[i] == j { 1.0 } else { 0.0 };
        (probs[(i, j)] - indicator) / m as f64
    });

    let sizes = &weights.layer_sizes;
    let layers = weights.layer_count();
    let mut grad = vec![0.0; weights.len()];
    for l in (0..layers).rev() {
        let (fan_in, fan_out) = (sizes[l], sizes[l + 1]);
        let offset = weights.layer_offset(l);
        let a = &pass.acts[l];

        // dW = A^T dZ, db = column sums of dZ.
        {
            let (wgrad, rest) = grad[offset..].split_at_mut(fan_in * fan_out);
            let bgrad = &mut rest[..fan_out];
            for i in 0..m {
                let arow = a.row(i);
                let dzrow = dz.row(i);
                for (k, &av) in arow.iter().enumerate() {
                    if av == 0.0 {
                        continue;
                    }
                    let wrow = &mut wgrad[k * fan_out..(k + 1) * fan_out];
                    for (g, &d) in wrow.iter_mut().zip(dzrow) {
                        *g += av * d;
                    }
                }
                for (g, &d) in bgrad.iter_mut().zip(dzrow) {
                    *g += d;
                }
            }
        }

        if l > 0 {
            // dA = dZ W^T, then gate by the ReLU mask of the previous layer.
            let w = &weights.flat[offset..offset + fan_in * fan_out];
            let zprev = &pass.zs[l - 1];
            let mut da = Mat::zeros(m, fan_in);
            for i in 0..m {
                let dzrow = dz.row(i);
                let darow = da.row_mut(i);
                for (k, dv) in darow.iter_mut().enumerate() {
                    let wrow = &w[k * fan_out..(k + 1) * fan_out];
                    *dv = wrow.iter().zip(dzrow).map(|(wv, d)| wv * d).sum();
                }
            }
            dz = Mat::from_fn(m, fan_in, |i, j| {
                if zprev[(i, j)] > 0.0 {
                    da[(i, j)]
                } else {
                    0.0
                }
            });
        }
    }
    Ok((loss, grad))
}

/// One communication round of local training: sample ceil(q * |D|) training
/// points without replacement from the device's stream, then run `alpha`
/// epochs of mini-batch SGD over them (fresh shuffle per epoch, final partial
/// batch included). Returns the updated weights; the caller forms the update
/// as new minus old.
pub fn client_update<R: Rng>(
    weights: &Weights,
    data: &LabeledPool,
    alpha: u32,
    q: f64,
    batch_size: usize,
    eta: f64,
    rng: &mut R,
) -> Result<Weights> {
    if alpha < 1 {
        return Err(Error::input("alpha must be at least 1"));
    }
    if !(q > 0.0 && q <= 1.0) {
        return Err(Error::input(format!("q must be in (0, 1], got {q}")));
    }
    if !eta.is_finite() || eta < 0.0 {
        return Err(Error::input(format!("learning rate must be nonnegative, got {eta}")));
    }
    if batch_size == 0 {
        return Err(Error::input("batch size must be at least 1"));
    }
    let n = samples_used(data.len(), q)?;
    let mut indices: Vec<usize> = rand::seq::index::sample(rng, data.len(), n).into_vec();

    let mut updated = weights.clone();
    for _ in 0..alpha {
        shuffle(&mut indices, rng);
        for chunk in indices.chunks(batch_size) {
            let batch = data.batch(chunk)?;
            let (_, grad) = loss_and_gradient(&updated, &batch)?;
            for (w, g) in updated.flat.iter_mut().zip(&grad) {
                *w -= eta * g;
            }
        }
    }
    Ok(updated)
}

fn shuffle<R: Rng>(indices: &mut [usize], rng: &mut R) {
    use rand::seq::SliceRandom;
    indices.shuffle(rng);
}
