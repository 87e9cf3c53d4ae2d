//! Sequence embedding learning: negative-sampling paragraph-vector trainers
//! over symbol and pattern corpora, vector inference for unseen sequences, and
//! centroid aggregation of weekly vectors into user trajectory embeddings.

mod loss;
mod sqn2vec;
mod train;

pub use loss::{ns_loss, ns_loss_grad};
pub use sqn2vec::{
    aggregate_user, pattern_token, sqn2vec_embed, symbol_token, user_centroids,
    PatternVocabulary, TrajectoryEncoder,
};
pub use train::{infer_vector, train};

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::UserId;

/// Which auxiliary task drives the training.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Architecture {
    /// Predict each member token from the sequence vector alone. Contexts are
    /// treated as a set; fast and strong on small vocabularies.
    PvDbow,
    /// Predict a token from the mean of the sequence vector and the input
    /// vectors of tokens in a surrounding window.
    PvDm,
}

/// How symbol and pattern information are fused into one vector per sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Fusion {
    /// Two independent trainings (symbols, patterns); final vector is the
    /// pairwise average.
    Sep,
    /// One training over the concatenated symbol + pattern token stream.
    Sim,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingConfig {
    pub dim: usize,
    pub epochs: usize,
    pub initial_lr: f32,
    pub final_lr: f32,
    /// Negative samples drawn per positive pair.
    pub negatives: usize,
    /// Exponent applied to token frequencies in the noise distribution.
    pub noise_exponent: f64,
    /// Context half-width for the windowed architecture.
    pub window: usize,
    pub seed: u64,
    pub architecture: Architecture,
    pub fusion: Fusion,
    /// Worker threads for training. 1 is bit-deterministic; more workers make
    /// unsynchronized dense updates and give up determinism.
    pub workers: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            dim: 128,
            epochs: 50,
            initial_lr: 0.025,
            final_lr: 1e-4,
            negatives: 5,
            noise_exponent: 0.75,
            window: 5,
            seed: 42,
            architecture: Architecture::PvDbow,
            fusion: Fusion::Sep,
            workers: 1,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("embedding dim must be >= 1".into()));
        }
        if !(self.initial_lr > self.final_lr && self.final_lr >= 0.0) {
            return Err(Error::Config(format!(
                "learning rates must satisfy initial > final >= 0, got {} / {}",
                self.initial_lr, self.final_lr
            )));
        }
        if self.negatives == 0 {
            return Err(Error::Config("negatives must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.workers == 0 {
            return Err(Error::Config("workers must be >= 1".into()));
        }
        Ok(())
    }
}

/// Token dictionary with corpus frequencies. Ids are dense and assigned in
/// order of first appearance.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vocab {
    tokens: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, u32>,
}

impl Vocab {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn token(&self, id: u32) -> &str {
        &self.tokens[id as usize]
    }

    pub fn count(&self, id: u32) -> u64 {
        self.counts[id as usize]
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn get(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn intern(&mut self, token: &str) -> u32 {
        if let Some(id) = self.index.get(token) {
            self.counts[*id as usize] += 1;
            return *id;
        }
        let id = self.tokens.len() as u32;
        self.tokens.push(token.to_string());
        self.counts.push(1);
        self.index.insert(token.to_string(), id);
        id
    }

    /// Rebuilds a vocabulary from persisted tokens and counts.
    pub fn from_parts(tokens: Vec<String>, counts: Vec<u64>) -> Result<Self> {
        if tokens.len() != counts.len() {
            return Err(Error::Corrupt("vocab token/count length mismatch".into()));
        }
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Ok(Vocab {
            tokens,
            counts,
            index,
        })
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }
}

/// Identifies one training sequence: a user's week. Corpora that are not
/// weekly use week 0.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SequenceKey {
    pub user: UserId,
    pub week: u32,
}

/// An indexed training corpus: token-id sequences plus their vocabulary.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Corpus {
    pub keys: Vec<SequenceKey>,
    pub sequences: Vec<Vec<u32>>,
    pub vocab: Vocab,
}

impl Corpus {
    /// Builds a corpus from (key, token stream) pairs, interning tokens.
    pub fn from_token_sequences<I, T>(items: I) -> Self
    where
        I: IntoIterator<Item = (SequenceKey, Vec<T>)>,
        T: AsRef<str>,
    {
        let mut vocab = Vocab::default();
        let mut keys = Vec::new();
        let mut sequences = Vec::new();
        for (key, tokens) in items {
            keys.push(key);
            sequences.push(
                tokens
                    .iter()
                    .map(|t| vocab.intern(t.as_ref()))
                    .collect(),
            );
        }
        Corpus {
            keys,
            sequences,
            vocab,
        }
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }
}

/// Row-major fixed-width vector table.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    pub rows: usize,
    pub dim: usize,
    data: Vec<f32>,
}

impl Matrix {
    pub fn zeros(rows: usize, dim: usize) -> Self {
        Matrix {
            rows,
            dim,
            data: vec![0.0; rows * dim],
        }
    }

    pub fn from_data(rows: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != rows * dim {
            return Err(Error::Corrupt(format!(
                "matrix payload holds {} values, expected {}x{}",
                data.len(),
                rows,
                dim
            )));
        }
        Ok(Matrix { rows, dim, data })
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f32] {
        &mut self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }
}

/// A trained embedding model: one learned vector per training sequence plus
/// the token tables needed to infer vectors for new sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    pub config: TrainingConfig,
    pub vocab: Vocab,
    pub keys: Vec<SequenceKey>,
    pub sequence_vectors: Matrix,
    pub token_output: Matrix,
    /// Token input vectors; present only for the windowed architecture.
    pub token_input: Option<Matrix>,
    /// Mean training loss per epoch, in epoch order.
    pub epoch_losses: Vec<f64>,
}

impl EmbeddingModel {
    pub fn sequence_vector(&self, idx: usize) -> &[f32] {
        self.sequence_vectors.row(idx)
    }

    pub fn index_of(&self, key: &SequenceKey) -> Option<usize> {
        self.keys.iter().position(|k| k == key)
    }
}
