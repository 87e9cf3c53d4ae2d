//! Fusing symbol and pattern information into one vector per sequence, and
//! scaling sequence vectors up to per-user trajectory embeddings.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::train as trainer;
use super::{Corpus, EmbeddingModel, Fusion, SequenceKey, TrainingConfig};
use crate::error::{Error, Result};
use crate::mining::{annotate_sequence, GapPattern};
use crate::util::derive_seed;

/// The frozen pattern dictionary an encoder was trained with, kept so new
/// sequences can be annotated the same way at inference time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternVocabulary {
    pub patterns: Vec<GapPattern>,
    pub gap: u32,
}

impl PatternVocabulary {
    /// Sorted pattern ids contained in a rank sequence.
    pub fn annotate(&self, ranks: &[u32]) -> Vec<u32> {
        annotate_sequence(ranks, &self.patterns, self.gap)
    }
}

pub fn symbol_token(rank_or_symbol: u32) -> String {
    rank_or_symbol.to_string()
}

pub fn pattern_token(id: u32) -> String {
    format!("P{id}")
}

/// A trained sequence encoder: either two separately trained models whose
/// vectors are averaged, or one model over the concatenated token stream.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryEncoder {
    pub fusion: Fusion,
    pub symbol_model: EmbeddingModel,
    /// Present in separate-fusion mode only.
    pub pattern_model: Option<EmbeddingModel>,
    pub patterns: PatternVocabulary,
}

impl TrajectoryEncoder {
    /// Trains the encoder. Both corpora must describe the same sequences in
    /// the same order; `sp_corpus` holds each sequence's pattern tokens (and
    /// may contain empty sequences for pattern-free inputs).
    pub fn train(
        symbol_corpus: &Corpus,
        sp_corpus: &Corpus,
        patterns: PatternVocabulary,
        config: &TrainingConfig,
    ) -> Result<Self> {
        if symbol_corpus.keys != sp_corpus.keys {
            return Err(Error::Data(
                "symbol and pattern corpora describe different sequence sets".into(),
            ));
        }
        match config.fusion {
            Fusion::Sep => {
                let mut symbol_config = config.clone();
                symbol_config.seed = derive_seed(config.seed, "symbols", 0);
                let mut pattern_config = config.clone();
                pattern_config.seed = derive_seed(config.seed, "patterns", 0);
                let symbol_model = trainer::train(symbol_corpus, &symbol_config)?;
                let pattern_model = trainer::train(sp_corpus, &pattern_config)?;
                Ok(TrajectoryEncoder {
                    fusion: Fusion::Sep,
                    symbol_model,
                    pattern_model: Some(pattern_model),
                    patterns,
                })
            }
            Fusion::Sim => {
                let merged = Corpus::from_token_sequences(
                    symbol_corpus
                        .keys
                        .iter()
                        .cloned()
                        .zip(merged_token_streams(symbol_corpus, sp_corpus)),
                );
                let model = trainer::train(&merged, config)?;
                Ok(TrajectoryEncoder {
                    fusion: Fusion::Sim,
                    symbol_model: model,
                    pattern_model: None,
                    patterns,
                })
            }
        }
    }

    pub fn keys(&self) -> &[SequenceKey] {
        &self.symbol_model.keys
    }

    pub fn dim(&self) -> usize {
        self.symbol_model.config.dim
    }

    /// The fused vector of training sequence `idx`.
    pub fn sequence_vector(&self, idx: usize) -> Vec<f32> {
        match (&self.fusion, &self.pattern_model) {
            (Fusion::Sep, Some(patterns)) => average(
                self.symbol_model.sequence_vector(idx),
                patterns.sequence_vector(idx),
            ),
            _ => self.symbol_model.sequence_vector(idx).to_vec(),
        }
    }

    /// Infers the fused vector of an unseen rank sequence: symbols map to
    /// symbol tokens, the frozen pattern dictionary supplies pattern tokens.
    /// A sequence containing no known pattern keeps the initial (untrained)
    /// vector on the pattern side, mirroring how pattern-free sequences train.
    pub fn infer(&self, ranks: &[u32], epochs: usize, seed: u64) -> Result<Vec<f32>> {
        let symbol_tokens: Vec<String> = ranks.iter().map(|r| symbol_token(*r)).collect();
        let pattern_tokens: Vec<String> = self
            .patterns
            .annotate(ranks)
            .into_iter()
            .map(pattern_token)
            .collect();
        match (&self.fusion, &self.pattern_model) {
            (Fusion::Sep, Some(pattern_model)) => {
                let v1 = trainer::infer_vector(
                    &self.symbol_model,
                    &symbol_tokens,
                    epochs,
                    derive_seed(seed, "infer-symbols", 0),
                )?;
                let pattern_seed = derive_seed(seed, "infer-patterns", 0);
                let v2 = if pattern_tokens.is_empty()
                    || pattern_tokens.iter().all(|t| pattern_model.vocab.get(t).is_none())
                {
                    use rand::SeedableRng;
                    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(pattern_seed);
                    trainer::init_vector(pattern_model.config.dim, &mut rng)
                } else {
                    trainer::infer_vector(pattern_model, &pattern_tokens, epochs, pattern_seed)?
                };
                Ok(average(&v1, &v2))
            }
            _ => {
                let mut tokens = symbol_tokens;
                tokens.extend(pattern_tokens);
                trainer::infer_vector(&self.symbol_model, &tokens, epochs, seed)
            }
        }
    }
}

fn merged_token_streams(symbol_corpus: &Corpus, sp_corpus: &Corpus) -> Vec<Vec<String>> {
    symbol_corpus
        .sequences
        .iter()
        .zip(&sp_corpus.sequences)
        .map(|(symbols, sps)| {
            let mut tokens: Vec<String> = symbols
                .iter()
                .map(|id| symbol_corpus.vocab.token(*id).to_string())
                .collect();
            tokens.extend(sps.iter().map(|id| sp_corpus.vocab.token(*id).to_string()));
            tokens
        })
        .collect()
}

fn average(a: &[f32], b: &[f32]) -> Vec<f32> {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x + y) / 2.0).collect()
}

/// Trains both corpora under the given fusion and returns the fused vector per
/// sequence key.
pub fn sqn2vec_embed(
    symbol_corpus: &Corpus,
    sp_corpus: &Corpus,
    patterns: PatternVocabulary,
    config: &TrainingConfig,
) -> Result<Vec<(SequenceKey, Vec<f32>)>> {
    let encoder = TrajectoryEncoder::train(symbol_corpus, sp_corpus, patterns, config)?;
    Ok(encoder
        .keys()
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, key)| (key, encoder.sequence_vector(i)))
        .collect())
}

/// Centroid of a user's weekly vectors: the trajectory embedding.
pub fn aggregate_user(weekly_vectors: &[Vec<f32>]) -> Result<Vec<f32>> {
    let first = weekly_vectors
        .first()
        .ok_or_else(|| Error::Data("cannot aggregate zero weekly vectors".into()))?;
    let dim = first.len();
    if weekly_vectors.iter().any(|v| v.len() != dim) {
        return Err(Error::Data("weekly vectors have mixed widths".into()));
    }
    let mut centroid = vec![0.0f32; dim];
    for v in weekly_vectors {
        for (c, x) in centroid.iter_mut().zip(v) {
            *c += *x;
        }
    }
    let n = weekly_vectors.len() as f32;
    for c in centroid.iter_mut() {
        *c /= n;
    }
    Ok(centroid)
}

/// Groups fused weekly vectors by user and aggregates each group, keeping the
/// week order stable.
pub fn user_centroids(
    vectors: &[(SequenceKey, Vec<f32>)],
) -> Result<BTreeMap<crate::model::UserId, Vec<f32>>> {
    let mut grouped: BTreeMap<crate::model::UserId, Vec<Vec<f32>>> = BTreeMap::new();
    for (key, v) in vectors {
        grouped.entry(key.user.clone()).or_default().push(v.clone());
    }
    grouped
        .into_iter()
        .map(|(user, vs)| aggregate_user(&vs).map(|c| (user, c)))
        .collect()
}
