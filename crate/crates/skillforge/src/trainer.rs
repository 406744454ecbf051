//! Skip-gram training by stochastic gradient descent.
//!
//! Two objectives share the same query-side vectors: exact full softmax is
//! the reference (every correctness test runs against it), negative
//! sampling is the scalable production path. Gradient hooks expose the
//! analytic gradients of both so tests can verify them against finite
//! differences.
//!
//! The trained state lives in two `V×d` matrices. Rows are updated through
//! relaxed atomics: with one worker the run is bit-reproducible, with more
//! workers rows race hogwild-style and low-order bits may differ between
//! runs. That trade is deliberate and documented in the training contract.

use std::io::{self, Write};
use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{generate_pairs, shuffle_epoch, TrainingPair, Vocab};
use crate::extractor::SkillContext;
use crate::rng::seeded_rng;

/// Default slot count for the noise-sampling table.
pub const DEFAULT_NOISE_TABLE_SIZE: usize = 1 << 20;

/// Default exponent flattening the noise distribution.
pub const DEFAULT_NOISE_POWER: f64 = 0.75;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Objective {
    FullSoftmax,
    NegativeSampling,
}

impl std::fmt::Display for Objective {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Objective::FullSoftmax => write!(f, "full-softmax"),
            Objective::NegativeSampling => write!(f, "negative-sampling"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    /// Vector dimensionality.
    pub dim: usize,
    pub epochs: u32,
    pub lr_initial: f64,
    pub lr_final: f64,
    pub objective: Objective,
    /// Negative draws per positive pair; only used by negative sampling.
    pub negatives: usize,
    pub seed: u64,
    pub workers: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            dim: 100,
            epochs: 5,
            lr_initial: 0.025,
            lr_final: 0.0001,
            objective: Objective::NegativeSampling,
            negatives: 5,
            seed: 1,
            workers: 1,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let fail = |reason: &str| {
            Err(TrainError::InvalidConfig {
                reason: reason.into(),
            })
        };
        if self.dim == 0 {
            return fail("dim must be positive");
        }
        if !(self.lr_initial > 0.0) {
            return fail("lr_initial must be positive");
        }
        if !(self.lr_final >= 0.0 && self.lr_final <= self.lr_initial) {
            return fail("lr_final must lie in [0, lr_initial]");
        }
        if self.objective == Objective::NegativeSampling && self.negatives == 0 {
            return fail("negatives must be positive for negative sampling");
        }
        if self.workers == 0 {
            return fail("workers must be positive");
        }
        Ok(())
    }

    /// Stable content digest of the configuration.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(
            format!(
                "dim={};epochs={};lr_initial={};lr_final={};objective={};negatives={};seed={};workers={}",
                self.dim,
                self.epochs,
                self.lr_initial,
                self.lr_final,
                self.objective,
                self.negatives,
                self.seed,
                self.workers
            )
            .as_bytes(),
        );
        hex(&hasher.finalize())
    }
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, thiserror::Error)]
pub enum TrainError {
    #[error("invalid training config: {reason}")]
    InvalidConfig { reason: String },
    #[error("non-finite loss at pair (center {center}, context {context})")]
    NonFiniteLoss { center: u32, context: u32 },
    #[error("noise table size {table_size} is smaller than vocabulary size {vocab_size}")]
    TableTooSmall { table_size: usize, vocab_size: usize },
    #[error(transparent)]
    Io(#[from] io::Error),
}

impl TrainError {
    pub fn is_numeric(&self) -> bool {
        matches!(self, TrainError::NonFiniteLoss { .. })
    }

    pub fn is_io(&self) -> bool {
        matches!(self, TrainError::Io(_))
    }
}

/// Dense row-major matrix of `f64` stored as relaxed atomics so training
/// workers can update rows without locks.
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<AtomicU64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Matrix {
        let mut data = Vec::with_capacity(rows * cols);
        data.resize_with(rows * cols, || AtomicU64::new(0f64.to_bits()));
        Matrix { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    fn slot(&self, row: usize, col: usize) -> &AtomicU64 {
        debug_assert!(row < self.rows && col < self.cols);
        &self.data[row * self.cols + col]
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        f64::from_bits(self.slot(row, col).load(Ordering::Relaxed))
    }

    #[inline]
    pub fn set(&self, row: usize, col: usize, value: f64) {
        debug_assert!(value.is_finite(), "non-finite write at ({row},{col})");
        self.slot(row, col).store(value.to_bits(), Ordering::Relaxed);
    }

    /// Unsynchronized read-modify-write: concurrent adds may lose updates,
    /// which the hogwild contract accepts.
    #[inline]
    pub fn add(&self, row: usize, col: usize, delta: f64) {
        self.set(row, col, self.get(row, col) + delta);
    }

    pub fn row_vec(&self, row: usize) -> Vec<f64> {
        (0..self.cols).map(|c| self.get(row, c)).collect()
    }

    /// Row-major copy of the whole matrix.
    pub fn to_vec(&self) -> Vec<f64> {
        self.data
            .iter()
            .map(|a| f64::from_bits(a.load(Ordering::Relaxed)))
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|a| f64::from_bits(a.load(Ordering::Relaxed)).is_finite())
    }
}

impl Clone for Matrix {
    fn clone(&self) -> Self {
        let data = self
            .data
            .iter()
            .map(|a| AtomicU64::new(a.load(Ordering::Relaxed)))
            .collect();
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data,
        }
    }
}

impl std::fmt::Debug for Matrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Matrix({}x{})", self.rows, self.cols)
    }
}

/// Trained (or training) skip-gram state: the vocabulary plus input and
/// output vector matrices.
#[derive(Debug, Clone)]
pub struct EmbeddingModel {
    pub vocab: Vocab,
    pub w_in: Matrix,
    pub w_out: Matrix,
    pub config: TrainingConfig,
}

/// Initializes a model: input vectors uniform in `[−0.5/d, +0.5/d]` from the
/// config seed, output vectors zero. Reproducible for fixed inputs.
pub fn init_model(vocab: Vocab, config: TrainingConfig) -> Result<EmbeddingModel, TrainError> {
    config.validate()?;
    let v = vocab.len();
    let d = config.dim;
    let w_in = Matrix::zeros(v, d);
    let w_out = Matrix::zeros(v, d);
    let mut rng = seeded_rng(config.seed, &["init"]);
    let half = 0.5 / d as f64;
    for row in 0..v {
        for col in 0..d {
            w_in.set(row, col, rng.random_range(-half..=half));
        }
    }
    Ok(EmbeddingModel {
        vocab,
        w_in,
        w_out,
        config,
    })
}

/// Softmax over `W_out · w_center`; entries positive, summing to one.
pub fn softmax_forward(model: &EmbeddingModel, center: u32) -> Vec<f64> {
    let h = model.w_in.row_vec(center as usize);
    let v = model.vocab.len();
    let mut logits = Vec::with_capacity(v);
    for j in 0..v {
        let mut s = 0.0;
        for (c, hc) in h.iter().enumerate() {
            s += model.w_out.get(j, c) * hc;
        }
        logits.push(s);
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    let mut probs: Vec<f64> = logits
        .iter()
        .map(|&u| {
            let e = (u - max).exp();
            sum += e;
            e
        })
        .collect();
    for p in &mut probs {
        *p /= sum;
    }
    probs
}

/// Analytic gradients of one step: the center-row gradient plus the touched
/// output rows with their gradients.
#[derive(Debug, Clone)]
pub struct Gradients {
    pub center: Vec<f64>,
    pub out: Vec<(u32, Vec<f64>)>,
}

/// Full-softmax loss of a pair: `−log p[context]`.
pub fn softmax_loss(model: &EmbeddingModel, pair: TrainingPair) -> f64 {
    let h = model.w_in.row_vec(pair.center as usize);
    let v = model.vocab.len();
    let mut logits = Vec::with_capacity(v);
    for j in 0..v {
        let mut s = 0.0;
        for (c, hc) in h.iter().enumerate() {
            s += model.w_out.get(j, c) * hc;
        }
        logits.push(s);
    }
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let log_sum: f64 = logits.iter().map(|&u| (u - max).exp()).sum::<f64>().ln() + max;
    log_sum - logits[pair.context as usize]
}

/// Loss and analytic gradients of the full-softmax objective at the current
/// parameters.
pub fn softmax_gradients(model: &EmbeddingModel, pair: TrainingPair) -> (f64, Gradients) {
    let h = model.w_in.row_vec(pair.center as usize);
    let d = h.len();
    let probs = softmax_forward(model, pair.center);
    let loss = -probs[pair.context as usize].ln();

    let mut center = vec![0.0; d];
    let mut out = Vec::with_capacity(probs.len());
    for (j, &p) in probs.iter().enumerate() {
        let err = p - if j as u32 == pair.context { 1.0 } else { 0.0 };
        let mut row_grad = Vec::with_capacity(d);
        for (c, hc) in h.iter().enumerate() {
            row_grad.push(err * hc);
            center[c] += err * model.w_out.get(j, c);
        }
        out.push((j as u32, row_grad));
    }
    (loss, Gradients { center, out })
}

fn apply_gradients(model: &EmbeddingModel, pair: TrainingPair, grads: &Gradients, lr: f64) {
    for (row, grad) in &grads.out {
        for (c, g) in grad.iter().enumerate() {
            model.w_out.add(*row as usize, c, -lr * g);
        }
    }
    for (c, g) in grads.center.iter().enumerate() {
        model.w_in.add(pair.center as usize, c, -lr * g);
    }
}

/// One full-softmax SGD step. Returns the loss measured before the update.
pub fn softmax_step(
    model: &EmbeddingModel,
    pair: TrainingPair,
    lr: f64,
) -> Result<f64, TrainError> {
    let (loss, grads) = softmax_gradients(model, pair);
    if !loss.is_finite() {
        return Err(TrainError::NonFiniteLoss {
            center: pair.center,
            context: pair.context,
        });
    }
    apply_gradients(model, pair, &grads, lr);
    debug_assert!(grads.center.iter().all(|g| g.is_finite()));
    Ok(loss)
}

/// Discrete noise distribution proportional to `count^power`, realized as a
/// slot table for O(1) sampling. Every vocabulary index holds at least one
/// slot.
#[derive(Debug, Clone)]
pub struct NoiseTable {
    slots: Vec<u32>,
    probs: Vec<f64>,
}

pub fn build_noise_table(
    vocab: &Vocab,
    power: f64,
    table_size: usize,
) -> Result<NoiseTable, TrainError> {
    let v = vocab.len();
    if table_size < v {
        return Err(TrainError::TableTooSmall {
            table_size,
            vocab_size: v,
        });
    }
    let weights: Vec<f64> = vocab
        .counts()
        .iter()
        .map(|&c| (c as f64).powf(power))
        .collect();
    let total: f64 = weights.iter().sum();
    let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();

    // Largest-remainder apportionment of the slots.
    let mut alloc: Vec<usize> = probs.iter().map(|p| (p * table_size as f64) as usize).collect();
    let mut used: usize = alloc.iter().sum();
    let mut remainders: Vec<(usize, f64)> = probs
        .iter()
        .enumerate()
        .map(|(i, p)| (i, p * table_size as f64 - alloc[i] as f64))
        .collect();
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then_with(|| a.0.cmp(&b.0)));
    let mut ri = 0;
    while used < table_size {
        alloc[remainders[ri % v].0] += 1;
        used += 1;
        ri += 1;
    }
    // Every index must be sampleable.
    for i in 0..v {
        if alloc[i] == 0 {
            let donor = (0..v).max_by_key(|&j| alloc[j]).unwrap();
            alloc[donor] -= 1;
            alloc[i] += 1;
        }
    }

    let mut slots = Vec::with_capacity(table_size);
    for (i, &n) in alloc.iter().enumerate() {
        slots.extend(std::iter::repeat(i as u32).take(n));
    }
    Ok(NoiseTable { slots, probs })
}

impl NoiseTable {
    /// Exact target probabilities, index-aligned with the vocabulary.
    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    pub fn sample(&self, rng: &mut impl Rng) -> u32 {
        self.slots[rng.random_range(0..self.slots.len())]
    }

    /// Draws a negative that differs from `exclude`.
    fn sample_negative(&self, rng: &mut impl Rng, exclude: u32) -> u32 {
        for _ in 0..10_000 {
            let idx = self.sample(rng);
            if idx != exclude {
                return idx;
            }
        }
        // Degenerate table: fall back to the first differing slot.
        self.slots
            .iter()
            .copied()
            .find(|&s| s != exclude)
            .unwrap_or(exclude)
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Numerically stable `ln(1 + e^x)`.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Negative-sampling loss for a pair with the given negative draws:
/// `−ln σ(h·o⁺) − Σ ln σ(−h·o⁻)`.
pub fn negative_sampling_loss(
    model: &EmbeddingModel,
    pair: TrainingPair,
    negatives: &[u32],
) -> f64 {
    let h = model.w_in.row_vec(pair.center as usize);
    let score = |row: u32| -> f64 {
        let mut s = 0.0;
        for (c, hc) in h.iter().enumerate() {
            s += model.w_out.get(row as usize, c) * hc;
        }
        s
    };
    let mut loss = softplus(-score(pair.context));
    for &neg in negatives {
        loss += softplus(score(neg));
    }
    loss
}

/// Loss and analytic gradients of the negative-sampling objective. Touches
/// the center input row, the positive output row, and every distinct
/// negative output row; repeated negatives accumulate into one row entry.
pub fn negative_sampling_gradients(
    model: &EmbeddingModel,
    pair: TrainingPair,
    negatives: &[u32],
) -> (f64, Gradients) {
    let h = model.w_in.row_vec(pair.center as usize);
    let d = h.len();
    let mut center = vec![0.0; d];
    let mut out: Vec<(u32, Vec<f64>)> = Vec::with_capacity(negatives.len() + 1);
    let mut loss = 0.0;

    let mut accumulate = |row: u32, label: f64, loss: &mut f64| {
        let mut s = 0.0;
        for (c, hc) in h.iter().enumerate() {
            s += model.w_out.get(row as usize, c) * hc;
        }
        *loss += if label > 0.5 { softplus(-s) } else { softplus(s) };
        let g = sigmoid(s) - label;
        let entry = match out.iter_mut().find(|(r, _)| *r == row) {
            Some((_, grad)) => grad,
            None => {
                out.push((row, vec![0.0; d]));
                &mut out.last_mut().unwrap().1
            }
        };
        for (c, hc) in h.iter().enumerate() {
            entry[c] += g * hc;
            center[c] += g * model.w_out.get(row as usize, c);
        }
    };

    accumulate(pair.context, 1.0, &mut loss);
    for &neg in negatives {
        accumulate(neg, 0.0, &mut loss);
    }
    (loss, Gradients { center, out })
}

/// One negative-sampling SGD step with externally chosen negatives. Exposed
/// so gradient checks can fix the draws.
pub fn negative_sampling_step_with(
    model: &EmbeddingModel,
    pair: TrainingPair,
    negatives: &[u32],
    lr: f64,
) -> Result<f64, TrainError> {
    let (loss, grads) = negative_sampling_gradients(model, pair, negatives);
    if !loss.is_finite() {
        return Err(TrainError::NonFiniteLoss {
            center: pair.center,
            context: pair.context,
        });
    }
    apply_gradients(model, pair, &grads, lr);
    Ok(loss)
}

/// One negative-sampling SGD step, drawing `k` negatives from the noise
/// table; draws colliding with the true context are redrawn.
pub fn negative_sampling_step(
    model: &EmbeddingModel,
    pair: TrainingPair,
    lr: f64,
    k: usize,
    noise: &NoiseTable,
    rng: &mut impl Rng,
) -> Result<f64, TrainError> {
    let negatives: Vec<u32> = (0..k)
        .map(|_| noise.sample_negative(rng, pair.context))
        .collect();
    negative_sampling_step_with(model, pair, &negatives, lr)
}

/// Result of a training run: the model plus per-epoch mean losses.
#[derive(Debug)]
pub struct TrainOutcome {
    pub model: EmbeddingModel,
    pub loss_trace: Vec<f64>,
}

/// Trains a model over the contexts: pairs are regenerated once, shuffled
/// per epoch, and the learning rate decays linearly from `lr_initial` to
/// `lr_final` across all steps. With `workers == 1` the run is
/// bit-reproducible for a fixed seed.
pub fn train(
    contexts: &[SkillContext],
    vocab: &Vocab,
    config: &TrainingConfig,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    let model = init_model(vocab.clone(), config.clone())?;
    let mut pairs: Vec<TrainingPair> = contexts
        .iter()
        .flat_map(|ctx| generate_pairs(ctx, vocab))
        .collect();

    let mut loss_trace = Vec::with_capacity(config.epochs as usize);
    if config.epochs == 0 || pairs.is_empty() {
        loss_trace.resize(config.epochs as usize, 0.0);
        return Ok(TrainOutcome { model, loss_trace });
    }

    let noise = match config.objective {
        Objective::NegativeSampling => Some(build_noise_table(
            vocab,
            DEFAULT_NOISE_POWER,
            DEFAULT_NOISE_TABLE_SIZE.max(vocab.len()),
        )?),
        Objective::FullSoftmax => None,
    };

    let total_steps = config.epochs as u64 * pairs.len() as u64;
    let step_counter = AtomicU64::new(0);
    let lr_at = |t: u64| -> f64 {
        let frac = t as f64 / total_steps as f64;
        config.lr_initial + (config.lr_final - config.lr_initial) * frac
    };

    for epoch in 0..config.epochs {
        shuffle_epoch(&mut pairs, config.seed, epoch);
        let chunk_size = pairs.len().div_ceil(config.workers);
        let chunks: Vec<&[TrainingPair]> = pairs.chunks(chunk_size).collect();

        let run_chunk = |worker: usize, chunk: &[TrainingPair]| -> Result<f64, TrainError> {
            let mut rng = seeded_rng(
                config.seed,
                &["negatives", &epoch.to_string(), &worker.to_string()],
            );
            let mut sum = 0.0;
            for &pair in chunk {
                let t = step_counter.fetch_add(1, Ordering::Relaxed);
                let lr = lr_at(t);
                let loss = match (&noise, config.objective) {
                    (Some(table), Objective::NegativeSampling) => negative_sampling_step(
                        &model,
                        pair,
                        lr,
                        config.negatives,
                        table,
                        &mut rng,
                    )?,
                    _ => softmax_step(&model, pair, lr)?,
                };
                sum += loss;
            }
            Ok(sum)
        };

        let epoch_sum = if config.workers == 1 {
            run_chunk(0, &pairs)?
        } else {
            let run_chunk = &run_chunk;
            std::thread::scope(|scope| {
                let handles: Vec<_> = chunks
                    .iter()
                    .enumerate()
                    .map(|(w, &chunk)| scope.spawn(move || run_chunk(w, chunk)))
                    .collect();
                let mut sum = 0.0;
                for handle in handles {
                    sum += handle.join().expect("worker panicked")?;
                }
                Ok::<f64, TrainError>(sum)
            })?
        };
        loss_trace.push(epoch_sum / pairs.len() as f64);
    }

    debug_assert!(model.w_in.is_finite() && model.w_out.is_finite());
    Ok(TrainOutcome { model, loss_trace })
}

/// Writes the per-epoch loss trace as `epoch,mean_loss` CSV.
pub fn write_loss_csv(w: &mut impl Write, trace: &[f64]) -> io::Result<()> {
    writeln!(w, "epoch,mean_loss")?;
    for (epoch, loss) in trace.iter().enumerate() {
        writeln!(w, "{epoch},{loss}")?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vocab(v: usize) -> Vocab {
        Vocab::from_counts((0..v).map(|i| (format!("s{i:03}"), 5)).collect(), 1).unwrap()
    }

    fn config(dim: usize, seed: u64) -> TrainingConfig {
        TrainingConfig {
            dim,
            seed,
            ..TrainingConfig::default()
        }
    }

    #[test]
    fn init_is_reproducible_and_bounded() {
        let c = config(4, 42);
        let a = init_model(vocab(3), c.clone()).unwrap();
        let b = init_model(vocab(3), c).unwrap();
        assert_eq!(a.w_in.to_vec(), b.w_in.to_vec());
        let half = 0.5 / 4.0;
        assert!(a.w_in.to_vec().iter().all(|&x| x.abs() <= half));
        assert!(a.w_out.to_vec().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn init_minimal_model() {
        let m = init_model(vocab(1), config(1, 0)).unwrap();
        assert_eq!(m.w_in.rows(), 1);
        assert_eq!(m.w_in.cols(), 1);
    }

    #[test]
    fn fresh_softmax_is_uniform() {
        let m = init_model(vocab(4), config(3, 9)).unwrap();
        let p = softmax_forward(&m, 2);
        for &x in &p {
            assert!((x - 0.25).abs() < 1e-12);
        }
    }

    #[test]
    fn forward_matches_closed_form_logits() {
        // V=2, d=1: w_center = [1], output rows [1] and [0] → logits [1, 0].
        let m = init_model(vocab(2), config(1, 0)).unwrap();
        m.w_in.set(0, 0, 1.0);
        m.w_out.set(0, 0, 1.0);
        m.w_out.set(1, 0, 0.0);
        let p = softmax_forward(&m, 0);
        let e = std::f64::consts::E;
        assert!((p[0] - e / (e + 1.0)).abs() < 1e-12);
        assert!((p[1] - 1.0 / (e + 1.0)).abs() < 1e-12);
        assert!((p[0] - 0.7311).abs() < 1e-4);
    }

    #[test]
    fn forward_sums_to_one() {
        let m = init_model(vocab(17), config(5, 3)).unwrap();
        for center in [0u32, 7, 16] {
            let p = softmax_forward(&m, center);
            let sum: f64 = p.iter().sum();
            assert!((sum - 1.0).abs() < 1e-9);
            assert!(p.iter().all(|&x| x > 0.0));
        }
    }

    #[test]
    fn fresh_loss_is_ln_v() {
        let m = init_model(vocab(4), config(3, 1)).unwrap();
        let loss = softmax_step(&m, TrainingPair { center: 1, context: 3 }, 0.01).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn repeated_softmax_steps_decrease_loss() {
        let m = init_model(vocab(2), config(4, 5)).unwrap();
        let pair = TrainingPair { center: 0, context: 1 };
        let mut last = f64::INFINITY;
        for _ in 0..10 {
            let loss = softmax_step(&m, pair, 0.5).unwrap();
            assert!(loss < last, "loss must strictly decrease");
            last = loss;
        }
    }

    /// Central finite difference of a loss functional with respect to one
    /// matrix entry.
    fn fd(
        matrix: &Matrix,
        row: usize,
        col: usize,
        h: f64,
        loss: &dyn Fn() -> f64,
    ) -> f64 {
        let saved = matrix.get(row, col);
        matrix.set(row, col, saved + h);
        let up = loss();
        matrix.set(row, col, saved - h);
        let down = loss();
        matrix.set(row, col, saved);
        (up - down) / (2.0 * h)
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
    }

    #[test]
    fn softmax_gradients_match_finite_differences() {
        let m = init_model(vocab(5), config(3, 77)).unwrap();
        // Non-trivial output weights.
        let mut rng = seeded_rng(78, &["fd"]);
        for r in 0..5 {
            for c in 0..3 {
                m.w_out.set(r, c, rng.random_range(-0.8..0.8));
            }
        }
        let pair = TrainingPair { center: 2, context: 4 };
        let (_, grads) = softmax_gradients(&m, pair);
        let h = 1e-5;
        let loss = || softmax_loss(&m, pair);
        for (c, &g) in grads.center.iter().enumerate() {
            let n = fd(&m.w_in, 2, c, h, &loss);
            assert!(rel_err(g, n) < 1e-4, "center[{c}]: {g} vs {n}");
        }
        for (row, grad) in &grads.out {
            for (c, &g) in grad.iter().enumerate() {
                let n = fd(&m.w_out, *row as usize, c, h, &loss);
                assert!(rel_err(g, n) < 1e-4, "out[{row}][{c}]: {g} vs {n}");
            }
        }
    }

    #[test]
    fn negative_sampling_gradients_match_finite_differences() {
        let m = init_model(vocab(6), config(3, 13)).unwrap();
        let mut rng = seeded_rng(14, &["fd-ns"]);
        for r in 0..6 {
            for c in 0..3 {
                m.w_out.set(r, c, rng.random_range(-0.8..0.8));
            }
        }
        let pair = TrainingPair { center: 1, context: 0 };
        let negatives = [3u32, 5, 3]; // includes a repeat on purpose
        let (_, grads) = negative_sampling_gradients(&m, pair, &negatives);
        let h = 1e-5;
        let loss = || negative_sampling_loss(&m, pair, &negatives);
        for (c, &g) in grads.center.iter().enumerate() {
            let n = fd(&m.w_in, 1, c, h, &loss);
            assert!(rel_err(g, n) < 1e-4, "center[{c}]: {g} vs {n}");
        }
        for (row, grad) in &grads.out {
            for (c, &g) in grad.iter().enumerate() {
                let n = fd(&m.w_out, *row as usize, c, h, &loss);
                assert!(rel_err(g, n) < 1e-4, "out[{row}][{c}]: {g} vs {n}");
            }
        }
    }

    #[test]
    fn noise_table_symmetric_counts() {
        let vocab = Vocab::from_counts(vec![("a".into(), 1), ("b".into(), 1)], 1).unwrap();
        let table = build_noise_table(&vocab, DEFAULT_NOISE_POWER, 1000).unwrap();
        assert_eq!(table.probabilities(), &[0.5, 0.5]);
        let zeros = table.slots.iter().filter(|&&s| s == 0).count();
        assert_eq!(zeros, 500);
    }

    #[test]
    fn noise_table_power_law() {
        let vocab = Vocab::from_counts(vec![("a".into(), 8), ("b".into(), 1)], 1).unwrap();
        let table = build_noise_table(&vocab, 0.75, 100_000).unwrap();
        let p = table.probabilities();
        let expected = 8f64.powf(0.75) / (8f64.powf(0.75) + 1.0);
        assert!((p[0] - expected).abs() < 1e-12);
        assert!((p[0] - 0.8262).abs() < 1e-4);
        assert!((p[1] - 0.1738).abs() < 1e-4);
    }

    #[test]
    fn noise_table_monte_carlo_matches_target() {
        let vocab = Vocab::from_counts(
            vec![("a".into(), 100), ("b".into(), 10), ("c".into(), 1)],
            1,
        )
        .unwrap();
        let table = build_noise_table(&vocab, 0.75, 1 << 20).unwrap();
        let mut rng = seeded_rng(4, &["mc"]);
        let mut counts = [0u64; 3];
        let draws = 1_000_000;
        for _ in 0..draws {
            counts[table.sample(&mut rng) as usize] += 1;
        }
        for (i, &c) in counts.iter().enumerate() {
            let freq = c as f64 / draws as f64;
            assert!(
                (freq - table.probabilities()[i]).abs() < 0.01,
                "index {i}: {freq} vs {}",
                table.probabilities()[i]
            );
        }
    }

    #[test]
    fn every_index_is_sampleable() {
        // Extreme skew: the rare skill still needs a slot.
        let vocab = Vocab::from_counts(
            vec![("a".into(), 1_000_000), ("b".into(), 1)],
            1,
        )
        .unwrap();
        let table = build_noise_table(&vocab, 0.75, 2).unwrap();
        assert!(table.slots.contains(&0));
        assert!(table.slots.contains(&1));
    }

    #[test]
    fn ns_fresh_loss_is_k_plus_one_ln_two() {
        let m = init_model(vocab(6), config(4, 2)).unwrap();
        let pair = TrainingPair { center: 0, context: 1 };
        for k in [1usize, 2, 5] {
            let negatives: Vec<u32> = (0..k as u32).map(|i| (i % 4) + 2).collect();
            let loss = negative_sampling_loss(&m, pair, &negatives);
            let expected = (k + 1) as f64 * 2f64.ln();
            assert!((loss - expected).abs() < 1e-9, "k={k}: {loss} vs {expected}");
        }
    }

    #[test]
    fn ns_steps_push_positive_score_up() {
        let m = init_model(vocab(4), config(8, 3)).unwrap();
        let noise = build_noise_table(&m.vocab, 0.75, 1000).unwrap();
        let pair = TrainingPair { center: 0, context: 1 };
        let mut rng = seeded_rng(3, &["ns-push"]);
        for _ in 0..200 {
            negative_sampling_step(&m, pair, 0.1, 1, &noise, &mut rng).unwrap();
        }
        let h = m.w_in.row_vec(0);
        let o = m.w_out.row_vec(1);
        let score: f64 = h.iter().zip(&o).map(|(a, b)| a * b).sum();
        assert!(sigmoid(score) > 0.9, "sigmoid(score) = {}", sigmoid(score));
    }

    #[test]
    fn ns_step_touches_at_most_k_plus_two_rows() {
        let k = 2usize;
        let m = init_model(vocab(8), config(4, 21)).unwrap();
        // Non-zero output rows so the center-row gradient is non-trivial.
        let mut wrng = seeded_rng(22, &["rows"]);
        for r in 0..8 {
            for c in 0..4 {
                m.w_out.set(r, c, wrng.random_range(-0.5..0.5));
            }
        }
        let noise = build_noise_table(&m.vocab, 0.75, 1024).unwrap();
        let before_in = m.w_in.to_vec();
        let before_out = m.w_out.to_vec();
        let mut rng = seeded_rng(5, &["ns-rows"]);
        negative_sampling_step(
            &m,
            TrainingPair { center: 3, context: 6 },
            0.05,
            k,
            &noise,
            &mut rng,
        )
        .unwrap();
        let d = 4;
        let changed_in: Vec<usize> = (0..8)
            .filter(|&r| (0..d).any(|c| m.w_in.get(r, c) != before_in[r * d + c]))
            .collect();
        let changed_out: Vec<usize> = (0..8)
            .filter(|&r| (0..d).any(|c| m.w_out.get(r, c) != before_out[r * d + c]))
            .collect();
        assert_eq!(changed_in, vec![3]);
        assert!(changed_out.len() <= k + 1);
        assert!(changed_out.contains(&6));
        assert!(changed_in.len() + changed_out.len() <= k + 2);
    }

    #[test]
    fn negatives_never_equal_context() {
        let vocab = Vocab::from_counts(
            vec![("a".into(), 1000), ("b".into(), 1)],
            1,
        )
        .unwrap();
        let table = build_noise_table(&vocab, 0.75, 100).unwrap();
        let mut rng = seeded_rng(11, &["collide"]);
        for _ in 0..1000 {
            // Excluding the dominant index must still terminate.
            assert_eq!(table.sample_negative(&mut rng, 0), 1);
        }
    }

    fn planted_contexts() -> (Vec<SkillContext>, Vocab) {
        // Two disjoint families of four skills each; documents mention one
        // family only.
        let vocab = Vocab::from_counts(
            (0..8).map(|i| (format!("s{i}"), 10)).collect(),
            1,
        )
        .unwrap();
        let mut contexts = Vec::new();
        let mut rng = seeded_rng(1234, &["planted"]);
        for doc in 0..200 {
            let family: u32 = if doc % 2 == 0 { 0 } else { 4 };
            let mut skills: Vec<u32> = (family..family + 4).collect();
            // random rotation so order varies
            let cut = rng.random_range(0..4usize);
            skills.rotate_left(cut);
            contexts.push(SkillContext {
                doc_id: format!("d{doc}"),
                skills,
            });
        }
        (contexts, vocab)
    }

    #[test]
    fn training_loss_settles() {
        let (contexts, vocab) = planted_contexts();
        let config = TrainingConfig {
            dim: 8,
            epochs: 6,
            objective: Objective::NegativeSampling,
            negatives: 3,
            seed: 7,
            ..TrainingConfig::default()
        };
        let outcome = train(&contexts, &vocab, &config).unwrap();
        let trace = &outcome.loss_trace;
        assert_eq!(trace.len(), 6);
        // The corpus is small, so per-epoch means can wiggle slightly; the
        // strict after-epoch-2 monotonicity check runs on the full
        // planted-cluster corpus in the acceptance suite.
        assert!(
            trace[5] < 0.9 * trace[0],
            "no learning signal in trace {trace:?}"
        );
    }

    #[test]
    fn zero_epochs_returns_initialization() {
        let (contexts, vocab) = planted_contexts();
        let config = TrainingConfig {
            dim: 4,
            epochs: 0,
            seed: 3,
            ..TrainingConfig::default()
        };
        let outcome = train(&contexts, &vocab, &config).unwrap();
        let fresh = init_model(vocab, config).unwrap();
        assert_eq!(outcome.model.w_in.to_vec(), fresh.w_in.to_vec());
        assert!(outcome.loss_trace.is_empty());
    }

    #[test]
    fn single_worker_training_is_bit_reproducible() {
        let (contexts, vocab) = planted_contexts();
        let config = TrainingConfig {
            dim: 6,
            epochs: 3,
            seed: 99,
            workers: 1,
            ..TrainingConfig::default()
        };
        let a = train(&contexts, &vocab, &config).unwrap();
        let b = train(&contexts, &vocab, &config).unwrap();
        assert_eq!(a.model.w_in.to_vec(), b.model.w_in.to_vec());
        assert_eq!(a.model.w_out.to_vec(), b.model.w_out.to_vec());
        assert_eq!(a.loss_trace, b.loss_trace);
    }

    #[test]
    fn multi_worker_training_completes() {
        let (contexts, vocab) = planted_contexts();
        let config = TrainingConfig {
            dim: 6,
            epochs: 2,
            seed: 5,
            workers: 4,
            ..TrainingConfig::default()
        };
        let outcome = train(&contexts, &vocab, &config).unwrap();
        assert!(outcome.model.w_in.is_finite());
        assert!(outcome.model.w_out.is_finite());
    }

    #[test]
    fn softmax_objective_trains_too() {
        let (contexts, vocab) = planted_contexts();
        let config = TrainingConfig {
            dim: 4,
            epochs: 2,
            objective: Objective::FullSoftmax,
            seed: 8,
            ..TrainingConfig::default()
        };
        let outcome = train(&contexts, &vocab, &config).unwrap();
        assert!(outcome.loss_trace[1] < outcome.loss_trace[0]);
    }

    #[test]
    fn invalid_config_is_rejected() {
        let bad = TrainingConfig {
            lr_initial: 0.0,
            ..TrainingConfig::default()
        };
        assert!(matches!(
            bad.validate(),
            Err(TrainError::InvalidConfig { .. })
        ));
        let bad = TrainingConfig {
            lr_final: 1.0,
            lr_initial: 0.5,
            ..TrainingConfig::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn loss_csv_format() {
        let mut buf = Vec::new();
        write_loss_csv(&mut buf, &[1.5, 0.75]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text, "epoch,mean_loss\n0,1.5\n1,0.75\n");
    }
}
