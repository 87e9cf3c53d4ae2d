//! Negative-sampling SGD trainers for both architectures, plus vector
//! inference against a frozen model.
//!
//! The serial path (workers = 1) is bit-deterministic under a fixed seed: one
//! RNG stream, sequences in corpus order, fixed update order. The optional
//! multi-worker path shards sequences across threads and lets workers race on
//! the shared dense tables; lost updates are tolerated and the result is not
//! deterministic.

use std::sync::atomic::{AtomicU32, AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::loss::sigmoid;
use super::{Architecture, Corpus, EmbeddingModel, Matrix, TrainingConfig};
use crate::error::{Error, Result};
use crate::util::derive_seed;

/// Cumulative-distribution sampler over token frequencies raised to a
/// smoothing exponent.
pub(crate) struct NoiseTable {
    cumulative: Vec<f64>,
}

impl NoiseTable {
    pub(crate) fn new(counts: &[u64], exponent: f64) -> Self {
        let mut cumulative = Vec::with_capacity(counts.len());
        let mut acc = 0.0;
        for &c in counts {
            acc += (c as f64).powf(exponent);
            cumulative.push(acc);
        }
        NoiseTable { cumulative }
    }

    pub(crate) fn sample(&self, rng: &mut ChaCha8Rng) -> u32 {
        let total = *self.cumulative.last().expect("empty noise table");
        let x = rng.gen::<f64>() * total;
        self.cumulative.partition_point(|&c| c <= x) as u32
    }
}

fn init_matrix(rows: usize, dim: usize, rng: &mut ChaCha8Rng) -> Matrix {
    let half = 0.5 / dim as f32;
    let mut m = Matrix::zeros(rows, dim);
    for r in 0..rows {
        for x in m.row_mut(r) {
            *x = rng.gen_range(-half..half);
        }
    }
    m
}

pub(crate) fn init_vector(dim: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let half = 0.5 / dim as f32;
    (0..dim).map(|_| rng.gen_range(-half..half)).collect()
}

fn dot(a: &[f32], b: &[f32]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| f64::from(*x) * f64::from(*y))
        .sum()
}

/// One binary logistic sample against `u`: returns (loss, g) where `g` already
/// includes the learning rate. The caller folds `g * u` into its error buffer
/// and applies `g * v` to `u` (when `u` is trainable).
#[inline]
fn logistic_sample(score: f64, label: f64, lr: f64) -> (f64, f64) {
    let p = sigmoid(score);
    let clamped = p.clamp(1e-12, 1.0 - 1e-12);
    let loss = -(label * clamped.ln() + (1.0 - label) * (1.0 - clamped).ln());
    (loss, (label - p) * lr)
}

/// Returns the context token ids for the windowed architecture.
fn context_of(seq: &[u32], pos: usize, window: usize) -> std::ops::Range<usize> {
    let lo = pos.saturating_sub(window);
    let hi = (pos + window + 1).min(seq.len());
    lo..hi
}

/// Trains a model over an indexed corpus. Sequences with no tokens keep their
/// initial vectors; they are counted and reported once as a warning.
pub fn train(corpus: &Corpus, config: &TrainingConfig) -> Result<EmbeddingModel> {
    config.validate()?;
    if corpus.is_empty() {
        return Err(Error::Data("training requires a non-empty corpus".into()));
    }
    let dim = config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut seq_vectors = init_matrix(corpus.len(), dim, &mut rng);
    let mut token_input = match config.architecture {
        Architecture::PvDm => Some(init_matrix(corpus.vocab.len(), dim, &mut rng)),
        Architecture::PvDbow => None,
    };
    let mut token_output = Matrix::zeros(corpus.vocab.len(), dim);

    let empty = corpus.sequences.iter().filter(|s| s.is_empty()).count();
    if empty > 0 {
        log::warn!("{empty} empty sequences skipped during training");
    }
    let positions_per_epoch: usize = corpus.sequences.iter().map(Vec::len).sum();

    let epoch_losses = if positions_per_epoch == 0 {
        Vec::new()
    } else if config.workers == 1 {
        train_serial(
            corpus,
            config,
            &mut seq_vectors,
            token_input.as_mut(),
            &mut token_output,
            positions_per_epoch,
            &mut rng,
        )
    } else {
        train_hogwild(
            corpus,
            config,
            &mut seq_vectors,
            token_input.as_mut(),
            &mut token_output,
            positions_per_epoch,
        )
    };

    Ok(EmbeddingModel {
        config: config.clone(),
        vocab: corpus.vocab.clone(),
        keys: corpus.keys.clone(),
        sequence_vectors: seq_vectors,
        token_output,
        token_input,
        epoch_losses,
    })
}

#[allow(clippy::too_many_arguments)]
fn train_serial(
    corpus: &Corpus,
    config: &TrainingConfig,
    seq_vectors: &mut Matrix,
    mut token_input: Option<&mut Matrix>,
    token_output: &mut Matrix,
    positions_per_epoch: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let dim = config.dim;
    let noise = NoiseTable::new(corpus.vocab.counts(), config.noise_exponent);
    let total_steps = (config.epochs * positions_per_epoch) as f64;
    let lr_span = f64::from(config.final_lr) - f64::from(config.initial_lr);

    let mut err = vec![0.0f32; dim];
    let mut hidden = vec![0.0f32; dim];
    let mut step = 0usize;
    let mut epoch_losses = Vec::with_capacity(config.epochs);

    for _ in 0..config.epochs {
        let mut loss_sum = 0.0;
        for (sid, seq) in corpus.sequences.iter().enumerate() {
            for pos in 0..seq.len() {
                let lr = f64::from(config.initial_lr) + lr_span * step as f64 / total_steps;
                step += 1;
                let target = seq[pos];

                match config.architecture {
                    Architecture::PvDbow => {
                        let v = seq_vectors.row_mut(sid);
                        err.fill(0.0);
                        for k in 0..=config.negatives {
                            let (tok, label) = if k == 0 {
                                (target, 1.0)
                            } else {
                                let t = noise.sample(rng);
                                if t == target {
                                    continue;
                                }
                                (t, 0.0)
                            };
                            let u = token_output.row_mut(tok as usize);
                            let (loss, g) = logistic_sample(dot(v, u), label, lr);
                            loss_sum += loss;
                            let g = g as f32;
                            for i in 0..dim {
                                err[i] += g * u[i];
                                u[i] += g * v[i];
                            }
                        }
                        for i in 0..dim {
                            v[i] += err[i];
                        }
                    }
                    Architecture::PvDm => {
                        let inputs = token_input.as_mut().expect("pv-dm has token inputs");
                        let ctx = context_of(seq, pos, config.window);
                        let m = ctx.len() as f32; // includes the sequence vector, excludes target
                        {
                            let v = seq_vectors.row(sid);
                            hidden.copy_from_slice(v);
                        }
                        for c in ctx.clone() {
                            if c == pos {
                                continue;
                            }
                            let u_in = inputs.row(seq[c] as usize);
                            for i in 0..dim {
                                hidden[i] += u_in[i];
                            }
                        }
                        for h in hidden.iter_mut() {
                            *h /= m;
                        }
                        err.fill(0.0);
                        for k in 0..=config.negatives {
                            let (tok, label) = if k == 0 {
                                (target, 1.0)
                            } else {
                                let t = noise.sample(rng);
                                if t == target {
                                    continue;
                                }
                                (t, 0.0)
                            };
                            let u = token_output.row_mut(tok as usize);
                            let (loss, g) = logistic_sample(dot(&hidden, u), label, lr);
                            loss_sum += loss;
                            let g = g as f32;
                            for i in 0..dim {
                                err[i] += g * u[i];
                                u[i] += g * hidden[i];
                            }
                        }
                        // Mean-combined forward pass: every contributor takes
                        // an equal 1/m share of the hidden gradient.
                        let v = seq_vectors.row_mut(sid);
                        for i in 0..dim {
                            v[i] += err[i] / m;
                        }
                        for c in ctx {
                            if c == pos {
                                continue;
                            }
                            let u_in = inputs.row_mut(seq[c] as usize);
                            for i in 0..dim {
                                u_in[i] += err[i] / m;
                            }
                        }
                    }
                }
            }
        }
        epoch_losses.push(loss_sum / positions_per_epoch as f64);
    }
    epoch_losses
}

/// Shared f32 cell; relaxed loads/stores compile to plain moves. Concurrent
/// read-modify-write may lose updates, which hogwild training tolerates.
struct SharedCell(AtomicU32);

impl SharedCell {
    #[inline]
    fn get(&self) -> f32 {
        f32::from_bits(self.0.load(Ordering::Relaxed))
    }

    #[inline]
    fn set(&self, v: f32) {
        self.0.store(v.to_bits(), Ordering::Relaxed);
    }

    #[inline]
    fn add(&self, delta: f32) {
        self.set(self.get() + delta);
    }
}

struct SharedMatrix {
    dim: usize,
    data: Vec<SharedCell>,
}

impl SharedMatrix {
    fn from_matrix(m: &Matrix) -> Self {
        SharedMatrix {
            dim: m.dim,
            data: m
                .data()
                .iter()
                .map(|v| SharedCell(AtomicU32::new(v.to_bits())))
                .collect(),
        }
    }

    fn write_back(&self, m: &mut Matrix) {
        for r in 0..m.rows {
            let row = m.row_mut(r);
            for (i, x) in row.iter_mut().enumerate() {
                *x = self.data[r * self.dim + i].get();
            }
        }
    }

    #[inline]
    fn row(&self, r: usize) -> &[SharedCell] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }
}

fn shared_dot(a: &[f32], b: &[SharedCell]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| f64::from(*x) * f64::from(y.get()))
        .sum()
}

fn train_hogwild(
    corpus: &Corpus,
    config: &TrainingConfig,
    seq_vectors: &mut Matrix,
    mut token_input: Option<&mut Matrix>,
    token_output: &mut Matrix,
    positions_per_epoch: usize,
) -> Vec<f64> {
    let dim = config.dim;
    let shared_seq = SharedMatrix::from_matrix(seq_vectors);
    let shared_out = SharedMatrix::from_matrix(token_output);
    let shared_in = token_input.as_deref().map(SharedMatrix::from_matrix);
    let noise = NoiseTable::new(corpus.vocab.counts(), config.noise_exponent);
    let total_steps = (config.epochs * positions_per_epoch) as f64;
    let lr_span = f64::from(config.final_lr) - f64::from(config.initial_lr);
    let global_step = AtomicU64::new(0);
    let workers = config.workers.min(corpus.len().max(1));

    let epoch_loss_sums: Vec<f64> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let shared_seq = &shared_seq;
                let shared_out = &shared_out;
                let shared_in = shared_in.as_ref();
                let noise = &noise;
                let global_step = &global_step;
                scope.spawn(move || {
                    let mut rng =
                        ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "worker", w as u64));
                    let mut err = vec![0.0f32; dim];
                    let mut hidden = vec![0.0f32; dim];
                    let mut buf = vec![0.0f32; dim];
                    let mut losses = vec![0.0f64; config.epochs];
                    for (epoch, loss_slot) in losses.iter_mut().enumerate() {
                        let _ = epoch;
                        let mut loss_sum = 0.0;
                        for sid in (w..corpus.len()).step_by(workers) {
                            let seq = &corpus.sequences[sid];
                            for pos in 0..seq.len() {
                                let step = global_step.fetch_add(1, Ordering::Relaxed);
                                let lr = f64::from(config.initial_lr)
                                    + lr_span * step as f64 / total_steps;
                                let target = seq[pos];
                                let v = shared_seq.row(sid);

                                // Build the forward vector in a local buffer.
                                match config.architecture {
                                    Architecture::PvDbow => {
                                        for (b, cell) in buf.iter_mut().zip(v) {
                                            *b = cell.get();
                                        }
                                    }
                                    Architecture::PvDm => {
                                        let inputs = shared_in.expect("pv-dm inputs");
                                        for (h, cell) in hidden.iter_mut().zip(v) {
                                            *h = cell.get();
                                        }
                                        let ctx = context_of(seq, pos, config.window);
                                        let m = ctx.len() as f32;
                                        for c in ctx.clone() {
                                            if c == pos {
                                                continue;
                                            }
                                            let u_in = inputs.row(seq[c] as usize);
                                            for i in 0..dim {
                                                hidden[i] += u_in[i].get();
                                            }
                                        }
                                        for h in hidden.iter_mut() {
                                            *h /= m;
                                        }
                                        buf.copy_from_slice(&hidden);
                                    }
                                }

                                err.fill(0.0);
                                for k in 0..=config.negatives {
                                    let (tok, label) = if k == 0 {
                                        (target, 1.0)
                                    } else {
                                        let t = noise.sample(&mut rng);
                                        if t == target {
                                            continue;
                                        }
                                        (t, 0.0)
                                    };
                                    let u = shared_out.row(tok as usize);
                                    let (loss, g) =
                                        logistic_sample(shared_dot(&buf, u), label, lr);
                                    loss_sum += loss;
                                    let g = g as f32;
                                    for i in 0..dim {
                                        err[i] += g * u[i].get();
                                        u[i].add(g * buf[i]);
                                    }
                                }

                                match config.architecture {
                                    Architecture::PvDbow => {
                                        for i in 0..dim {
                                            v[i].add(err[i]);
                                        }
                                    }
                                    Architecture::PvDm => {
                                        let inputs = shared_in.expect("pv-dm inputs");
                                        let ctx = context_of(seq, pos, config.window);
                                        let m = ctx.len() as f32;
                                        for i in 0..dim {
                                            v[i].add(err[i] / m);
                                        }
                                        for c in ctx {
                                            if c == pos {
                                                continue;
                                            }
                                            let u_in = inputs.row(seq[c] as usize);
                                            for i in 0..dim {
                                                u_in[i].add(err[i] / m);
                                            }
                                        }
                                    }
                                }
                            }
                        }
                        *loss_slot = loss_sum;
                    }
                    losses
                })
            })
            .collect();

        let mut sums = vec![0.0f64; config.epochs];
        for handle in handles {
            let worker_losses = handle.join().expect("training worker panicked");
            for (s, l) in sums.iter_mut().zip(worker_losses) {
                *s += l;
            }
        }
        sums
    });

    shared_seq.write_back(seq_vectors);
    shared_out.write_back(token_output);
    if let (Some(shared), Some(m)) = (shared_in.as_ref(), token_input.as_deref_mut()) {
        shared.write_back(m);
    }

    epoch_loss_sums
        .into_iter()
        .map(|s| s / positions_per_epoch as f64)
        .collect()
}

/// Trains a fresh sequence vector for unseen tokens against a frozen model.
///
/// Unknown tokens are dropped; an all-unknown token list is an error. The same
/// seed always yields the same vector.
pub fn infer_vector(
    model: &EmbeddingModel,
    tokens: &[String],
    epochs: usize,
    seed: u64,
) -> Result<Vec<f32>> {
    let ids: Vec<u32> = tokens.iter().filter_map(|t| model.vocab.get(t)).collect();
    if ids.is_empty() {
        return Err(Error::Data(
            "cannot infer a vector: no token maps into the model vocabulary".into(),
        ));
    }
    if epochs == 0 {
        return Err(Error::Config("inference epochs must be >= 1".into()));
    }
    let config = &model.config;
    let dim = config.dim;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = init_vector(dim, &mut rng);
    let noise = NoiseTable::new(model.vocab.counts(), config.noise_exponent);
    let total_steps = (epochs * ids.len()) as f64;
    let lr_span = f64::from(config.final_lr) - f64::from(config.initial_lr);

    let mut err = vec![0.0f32; dim];
    let mut hidden = vec![0.0f32; dim];
    let mut step = 0usize;
    for _ in 0..epochs {
        for pos in 0..ids.len() {
            let lr = f64::from(config.initial_lr) + lr_span * step as f64 / total_steps;
            step += 1;
            let target = ids[pos];

            let (forward, m): (&[f32], f32) = match config.architecture {
                Architecture::PvDbow => (&v, 1.0),
                Architecture::PvDm => {
                    let inputs = model
                        .token_input
                        .as_ref()
                        .expect("windowed model carries token inputs");
                    let ctx = context_of(&ids, pos, config.window);
                    let m = ctx.len() as f32;
                    hidden.copy_from_slice(&v);
                    for c in ctx {
                        if c == pos {
                            continue;
                        }
                        let u_in = inputs.row(ids[c] as usize);
                        for i in 0..dim {
                            hidden[i] += u_in[i];
                        }
                    }
                    for h in hidden.iter_mut() {
                        *h /= m;
                    }
                    (&hidden, m)
                }
            };

            err.fill(0.0);
            for k in 0..=config.negatives {
                let (tok, label) = if k == 0 {
                    (target, 1.0)
                } else {
                    let t = noise.sample(&mut rng);
                    if t == target {
                        continue;
                    }
                    (t, 0.0)
                };
                let u = model.token_output.row(tok as usize);
                let (_, g) = logistic_sample(dot(forward, u), label, lr);
                let g = g as f32;
                for i in 0..dim {
                    err[i] += g * u[i];
                }
            }
            // Only the fresh vector moves; its share of the gradient is 1/m.
            for i in 0..dim {
                v[i] += err[i] / m;
            }
        }
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::embedding::SequenceKey;
    use crate::model::UserId;
    use crate::util::cosine_similarity;

    fn key(i: usize) -> SequenceKey {
        SequenceKey {
            user: UserId::new(format!("u{i}")).unwrap(),
            week: 0,
        }
    }

    fn corpus_from(seqs: Vec<Vec<&str>>) -> Corpus {
        Corpus::from_token_sequences(
            seqs.into_iter()
                .enumerate()
                .map(|(i, s)| (key(i), s.into_iter().map(String::from).collect::<Vec<_>>())),
        )
    }

    fn small_config(dim: usize, epochs: usize, arch: Architecture) -> TrainingConfig {
        TrainingConfig {
            dim,
            epochs,
            architecture: arch,
            ..TrainingConfig::default()
        }
    }

    #[test]
    fn model_shape_matches_corpus() {
        let corpus = corpus_from(vec![vec!["a", "b"], vec!["b", "c"], vec!["a"]]);
        let model = train(&corpus, &small_config(16, 2, Architecture::PvDbow)).unwrap();
        assert_eq!(model.sequence_vectors.rows, 3);
        assert_eq!(model.sequence_vectors.dim, 16);
        assert_eq!(model.token_output.rows, 3);
        assert!(model.token_input.is_none());

        let dm = train(&corpus, &small_config(16, 2, Architecture::PvDm)).unwrap();
        assert!(dm.token_input.is_some());
    }

    #[test]
    fn zero_dim_is_a_config_error() {
        let corpus = corpus_from(vec![vec!["a"]]);
        assert!(train(&corpus, &small_config(0, 1, Architecture::PvDbow)).is_err());
    }

    #[test]
    fn single_symbol_vocabulary_trains_without_nan() {
        let corpus = corpus_from(vec![vec!["a", "a", "a"], vec!["a"]]);
        let model = train(&corpus, &small_config(8, 5, Architecture::PvDbow)).unwrap();
        for r in 0..model.sequence_vectors.rows {
            assert!(model.sequence_vectors.row(r).iter().all(|x| x.is_finite()));
        }
    }

    #[test]
    fn identical_sequences_converge_together() {
        let shared = vec!["x", "y", "z", "x", "y", "z"];
        let mut seqs = vec![shared.clone(), shared];
        for i in 0..8 {
            let a = ["a", "b", "c", "d"][i % 4];
            let b = ["e", "f", "g", "h"][i % 4];
            seqs.push(vec![a, b, a, b, a, b]);
        }
        let config = TrainingConfig {
            dim: 32,
            epochs: 120,
            ..TrainingConfig::default()
        };
        let model = train(&corpus_from(seqs), &config).unwrap();
        let twin = cosine_similarity(model.sequence_vector(0), model.sequence_vector(1));
        let mut others = Vec::new();
        for i in 2..10 {
            for j in (i + 1)..10 {
                others.push(cosine_similarity(
                    model.sequence_vector(i),
                    model.sequence_vector(j),
                ));
            }
        }
        others.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let median = others[others.len() / 2];
        assert!(twin >= 0.9, "twin cosine {twin} below 0.9");
        assert!(twin > median, "twin {twin} not above median {median}");
    }

    #[test]
    fn training_loss_decreases() {
        let corpus = corpus_from(vec![
            vec!["a", "b", "a", "b"],
            vec!["c", "d", "c", "d"],
            vec!["a", "c", "a", "c"],
        ]);
        let model = train(&corpus, &small_config(16, 20, Architecture::PvDbow)).unwrap();
        assert!(model.epoch_losses.last().unwrap() < model.epoch_losses.first().unwrap());
        let dm = train(&corpus, &small_config(16, 20, Architecture::PvDm)).unwrap();
        assert!(dm.epoch_losses.last().unwrap() < dm.epoch_losses.first().unwrap());
    }

    #[test]
    fn serial_training_is_deterministic() {
        let corpus = corpus_from(vec![vec!["a", "b", "c"], vec!["b", "c", "d"]]);
        let config = small_config(12, 5, Architecture::PvDbow);
        let m1 = train(&corpus, &config).unwrap();
        let m2 = train(&corpus, &config).unwrap();
        assert_eq!(m1.sequence_vectors, m2.sequence_vectors);
        assert_eq!(m1.token_output, m2.token_output);
    }

    #[test]
    fn hogwild_training_completes_and_stays_finite() {
        let seqs: Vec<Vec<&str>> = (0..20)
            .map(|i| {
                if i % 2 == 0 {
                    vec!["a", "b", "a", "b", "a"]
                } else {
                    vec!["c", "d", "c", "d", "c"]
                }
            })
            .collect();
        let config = TrainingConfig {
            dim: 16,
            epochs: 10,
            workers: 4,
            ..TrainingConfig::default()
        };
        let model = train(&corpus_from(seqs), &config).unwrap();
        for r in 0..model.sequence_vectors.rows {
            assert!(model.sequence_vectors.row(r).iter().all(|x| x.is_finite()));
        }
        assert!(model.epoch_losses.last().unwrap() < model.epoch_losses.first().unwrap());
    }

    #[test]
    fn empty_sequences_keep_initial_vectors_and_stay_finite() {
        let corpus = corpus_from(vec![vec!["a", "b", "a", "b"], vec![]]);
        let model = train(&corpus, &small_config(8, 3, Architecture::PvDbow)).unwrap();
        assert!(model.sequence_vector(1).iter().all(|x| x.is_finite()));
    }

    #[test]
    fn inference_is_deterministic_and_close_to_training_twin() {
        let seqs = vec![
            vec!["x", "y", "z", "x", "y", "z", "x", "y"],
            vec!["a", "b", "a", "b", "a", "b", "a", "b"],
            vec!["c", "d", "e", "c", "d", "e", "c", "d"],
            vec!["a", "c", "a", "c", "a", "c", "a", "c"],
        ];
        let config = TrainingConfig {
            dim: 24,
            epochs: 150,
            ..TrainingConfig::default()
        };
        let model = train(&corpus_from(seqs.clone()), &config).unwrap();
        let tokens: Vec<String> = seqs[0].iter().map(|s| s.to_string()).collect();
        let v1 = infer_vector(&model, &tokens, 120, 7).unwrap();
        let v2 = infer_vector(&model, &tokens, 120, 7).unwrap();
        assert_eq!(v1, v2);
        let cos = cosine_similarity(&v1, model.sequence_vector(0));
        assert!(cos >= 0.8, "self-inference cosine {cos} below 0.8");
    }

    #[test]
    fn inference_rejects_unknown_only_token_lists() {
        let corpus = corpus_from(vec![vec!["a", "b"]]);
        let model = train(&corpus, &small_config(8, 2, Architecture::PvDbow)).unwrap();
        let unknown = vec!["zzz".to_string()];
        assert!(infer_vector(&model, &unknown, 5, 1).is_err());
        let empty: Vec<String> = Vec::new();
        assert!(infer_vector(&model, &empty, 5, 1).is_err());
    }
}
