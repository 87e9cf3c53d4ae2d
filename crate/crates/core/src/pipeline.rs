//! In-memory orchestration of the full pipeline, shared by the CLI stages and
//! the experiment harnesses.

use std::collections::BTreeMap;

use rayon::prelude::*;

use crate::embedding::{
    pattern_token, symbol_token, user_centroids, Corpus, SequenceKey, TrainingConfig,
    TrajectoryEncoder,
};
use crate::error::{Error, Result};
use crate::eval::RankDistribution;
use crate::generalize::{split_weeks, to_rank};
use crate::mining::{mine_patterns, MiningParams};
use crate::model::{CdrTrajectory, RankTrajectory, SummaryTrajectory, UserId, WeeklyTrajectory};
use crate::reduction::{umap_fit, Points, UmapParams, UmapReducer};
use crate::seqscan::{segment, SeqScanParams};
use crate::time::WeekCalendar;

/// Everything data preparation yields: summaries, rank trajectories and their
/// weekly fragments, restricted to users that keep at least one segment inside
/// the trimmed observation period.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub calendar: WeekCalendar,
    pub summaries: Vec<SummaryTrajectory>,
    pub ranks: Vec<RankTrajectory>,
    /// All (user, week) fragments in (user, week) order, empty weeks included.
    pub weekly: Vec<WeeklyTrajectory>,
    /// Users dropped because segmentation or trimming left them empty.
    pub dropped_users: usize,
}

impl Prepared {
    pub fn weekly_by_user(&self) -> BTreeMap<UserId, Vec<WeeklyTrajectory>> {
        let mut map: BTreeMap<UserId, Vec<WeeklyTrajectory>> = BTreeMap::new();
        for w in &self.weekly {
            map.entry(w.user.clone()).or_default().push(w.clone());
        }
        map
    }

    /// Per-user rank distribution over the concatenation of all weekly ranks.
    pub fn distributions(&self) -> BTreeMap<UserId, RankDistribution> {
        let mut concatenated: BTreeMap<UserId, Vec<u32>> = BTreeMap::new();
        for w in &self.weekly {
            concatenated
                .entry(w.user.clone())
                .or_default()
                .extend(&w.ranks);
        }
        concatenated
            .into_iter()
            .map(|(u, ranks)| {
                let d = RankDistribution::from_ranks(&ranks)
                    .expect("prepared users keep at least one in-period segment");
                (u, d)
            })
            .collect()
    }

    /// Non-empty weekly fragments, the training corpus.
    pub fn trained_weekly(&self) -> Vec<&WeeklyTrajectory> {
        self.weekly.iter().filter(|w| !w.ranks.is_empty()).collect()
    }
}

/// Runs segmentation (or the pass-through for unsummarized data), ranking and
/// weekly splitting over a corpus.
pub fn prepare(
    trajectories: &[CdrTrajectory],
    seqscan: &SeqScanParams,
    calendar: &WeekCalendar,
    summarize: bool,
) -> Result<Prepared> {
    let summaries: Vec<SummaryTrajectory> = trajectories
        .par_iter()
        .map(|t| {
            if summarize {
                segment(t, seqscan)
            } else {
                SummaryTrajectory::from_native(t)
            }
        })
        .collect();

    let mut kept_summaries = Vec::new();
    let mut ranks = Vec::new();
    let mut weekly = Vec::new();
    let mut dropped = 0usize;
    for summary in summaries {
        if summary.segments.is_empty() {
            dropped += 1;
            continue;
        }
        let (rank, _) = to_rank(&summary)?;
        let weeks = split_weeks(&rank, calendar)?;
        if weeks.iter().all(|w| w.ranks.is_empty()) {
            dropped += 1;
            continue;
        }
        kept_summaries.push(summary);
        ranks.push(rank);
        weekly.extend(weeks);
    }
    weekly.sort_by(|a, b| a.user.cmp(&b.user).then(a.week.cmp(&b.week)));
    kept_summaries.sort_by(|a, b| a.user.cmp(&b.user));
    ranks.sort_by(|a, b| a.user.cmp(&b.user));

    Ok(Prepared {
        calendar: *calendar,
        summaries: kept_summaries,
        ranks,
        weekly,
        dropped_users: dropped,
    })
}

/// Weekly token sequences carrying location labels instead of ranks, with the
/// label-to-integer mapping needed for pattern mining.
pub fn weekly_label_sequences(
    summaries: &[SummaryTrajectory],
    calendar: &WeekCalendar,
) -> (Vec<SequenceKey>, Vec<Vec<u32>>, Vec<String>) {
    let mut names: Vec<String> = Vec::new();
    let mut index: BTreeMap<String, u32> = BTreeMap::new();
    let mut keys = Vec::new();
    let mut sequences = Vec::new();
    for summary in summaries {
        let mut weeks: Vec<Vec<u32>> = vec![Vec::new(); calendar.weeks as usize];
        for seg in &summary.segments {
            if let Some(week) = calendar.week_of(seg.interval.start) {
                let label = seg.location.label();
                let id = *index.entry(label.to_string()).or_insert_with(|| {
                    names.push(label.to_string());
                    (names.len() - 1) as u32
                });
                weeks[(week - 1) as usize].push(id);
            }
        }
        for (i, tokens) in weeks.into_iter().enumerate() {
            if tokens.is_empty() {
                continue;
            }
            keys.push(SequenceKey {
                user: summary.user.clone(),
                week: (i + 1) as u32,
            });
            sequences.push(tokens);
        }
    }
    (keys, sequences, names)
}

/// Mines patterns over integer sequences and trains the two-corpus encoder.
/// `token_name` renders a sequence symbol as its training token.
pub fn train_encoder_over(
    keys: Vec<SequenceKey>,
    sequences: Vec<Vec<u32>>,
    token_name: impl Fn(u32) -> String,
    mining: &MiningParams,
    training: &TrainingConfig,
) -> Result<TrajectoryEncoder> {
    if keys.len() != sequences.len() {
        return Err(Error::Data("keys and sequences differ in length".into()));
    }
    if sequences.is_empty() {
        return Err(Error::Data("no non-empty sequences to train on".into()));
    }
    let mined = mine_patterns(&sequences, mining)?;
    let symbol_corpus = Corpus::from_token_sequences(keys.iter().cloned().zip(
        sequences
            .iter()
            .map(|seq| seq.iter().map(|s| token_name(*s)).collect::<Vec<_>>()),
    ));
    let sp_corpus = Corpus::from_token_sequences(keys.iter().cloned().zip(
        mined
            .per_sequence
            .iter()
            .map(|ids| ids.iter().map(|id| pattern_token(*id)).collect::<Vec<_>>()),
    ));
    let vocabulary = crate::embedding::PatternVocabulary {
        patterns: mined.patterns,
        gap: mined.gap,
    };
    TrajectoryEncoder::train(&symbol_corpus, &sp_corpus, vocabulary, training)
}

/// Trains the encoder over the non-empty weekly rank fragments.
pub fn train_rank_encoder(
    prepared: &Prepared,
    mining: &MiningParams,
    training: &TrainingConfig,
) -> Result<TrajectoryEncoder> {
    let trained = prepared.trained_weekly();
    let keys: Vec<SequenceKey> = trained
        .iter()
        .map(|w| SequenceKey {
            user: w.user.clone(),
            week: w.week,
        })
        .collect();
    let sequences: Vec<Vec<u32>> = trained.iter().map(|w| w.ranks.clone()).collect();
    train_encoder_over(keys, sequences, symbol_token, mining, training)
}

/// Fused weekly vectors aggregated into one trajectory embedding per user.
pub fn user_embeddings(encoder: &TrajectoryEncoder) -> Result<BTreeMap<UserId, Vec<f32>>> {
    let fused: Vec<(SequenceKey, Vec<f32>)> = encoder
        .keys()
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, key)| (key, encoder.sequence_vector(i)))
        .collect();
    user_centroids(&fused)
}

/// Fits the reducer over user embeddings and returns the per-user 2D points.
pub fn reduce_users(
    user_vectors: &BTreeMap<UserId, Vec<f32>>,
    params: &UmapParams,
) -> Result<(UmapReducer, BTreeMap<UserId, Vec<f64>>)> {
    let users: Vec<&UserId> = user_vectors.keys().collect();
    let rows: Vec<Vec<f32>> = users.iter().map(|u| user_vectors[*u].clone()).collect();
    let points = Points::from_f32_rows(&rows)?;
    let (reducer, layout) = umap_fit(&points, params)?;
    let placed = users
        .into_iter()
        .enumerate()
        .map(|(i, u)| (u.clone(), layout.row(i).to_vec()))
        .collect();
    Ok((reducer, placed))
}

/// A complete trained pipeline over one corpus.
pub struct PipelineArtifacts {
    pub prepared: Prepared,
    pub encoder: TrajectoryEncoder,
    pub user_vectors: BTreeMap<UserId, Vec<f32>>,
    pub reducer: UmapReducer,
    pub user_points: BTreeMap<UserId, Vec<f64>>,
}

/// Prepares, trains, aggregates and reduces in one call.
pub fn run_pipeline(
    trajectories: &[CdrTrajectory],
    calendar: &WeekCalendar,
    seqscan: &SeqScanParams,
    mining: &MiningParams,
    training: &TrainingConfig,
    umap: &UmapParams,
    summarize: bool,
) -> Result<PipelineArtifacts> {
    let prepared = prepare(trajectories, seqscan, calendar, summarize)?;
    let encoder = train_rank_encoder(&prepared, mining, training)?;
    let user_vectors = user_embeddings(&encoder)?;
    let (reducer, user_points) = reduce_users(&user_vectors, umap)?;
    Ok(PipelineArtifacts {
        prepared,
        encoder,
        user_vectors,
        reducer,
        user_points,
    })
}
