//! Embedding quality metric and the perturbation experiment.
//!
//! The coherence metric correlates two pairwise distances over users: the
//! distance between their points in the reduced embedding space, and the
//! Jensen-Shannon distance between their rank-frequency distributions. A
//! strongly positive Pearson coefficient means the embedding geometry tracks
//! the behavioral signal the ranks encode.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::embedding::TrajectoryEncoder;
use crate::error::{Error, Result};
use crate::model::{UserId, WeeklyTrajectory};
use crate::reduction::{Points, UmapReducer};
use crate::util::{derive_seed, euclidean, percentile};

/// Empirical distribution over rank values; index i holds P(rank = i + 1).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankDistribution {
    probs: Vec<f64>,
}

impl RankDistribution {
    pub fn from_ranks(ranks: &[u32]) -> Result<Self> {
        if ranks.is_empty() {
            return Err(Error::Data("rank distribution over an empty sequence".into()));
        }
        let max = *ranks.iter().max().expect("non-empty") as usize;
        let mut counts = vec![0usize; max];
        for &r in ranks {
            if r == 0 {
                return Err(Error::Data("rank values are 1-based".into()));
            }
            counts[(r - 1) as usize] += 1;
        }
        let n = ranks.len() as f64;
        Ok(RankDistribution {
            probs: counts.into_iter().map(|c| c as f64 / n).collect(),
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn support(&self) -> usize {
        self.probs.len()
    }

    /// Jensen-Shannon distance between two rank distributions, zero-padding
    /// to the union support first.
    pub fn js(&self, other: &RankDistribution) -> f64 {
        let len = self.probs.len().max(other.probs.len());
        let mut p = self.probs.clone();
        let mut q = other.probs.clone();
        p.resize(len, 0.0);
        q.resize(len, 0.0);
        js_distance(&p, &q).expect("padded supports always match")
    }
}

/// Jensen-Shannon distance: the square root of the divergence against the
/// mixture M = (p + q) / 2, with base-2 logarithms so the range is [0, 1].
/// The two distributions must already share a support.
pub fn js_distance(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::Data(format!(
            "distribution supports differ: {} vs {}",
            p.len(),
            q.len()
        )));
    }
    let mut divergence = 0.0f64;
    for (&pi, &qi) in p.iter().zip(q) {
        let m = 0.5 * (pi + qi);
        if pi > 0.0 {
            divergence += 0.5 * pi * (pi / m).log2();
        }
        if qi > 0.0 {
            divergence += 0.5 * qi * (qi / m).log2();
        }
    }
    // Rounding can push an exact zero a hair negative.
    Ok(divergence.max(0.0).sqrt())
}

/// Sample Pearson correlation coefficient.
pub fn pearson_r(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::Data("correlation inputs differ in length".into()));
    }
    if xs.len() < 2 {
        return Err(Error::Data("correlation requires at least two pairs".into()));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (&x, &y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::Data("correlation undefined under zero variance".into()));
    }
    Ok(sxy / (sxx * syy).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceKind {
    Euclidean,
    Cosine,
}

fn embedding_distance(a: &[f64], b: &[f64], kind: DistanceKind) -> f64 {
    match kind {
        DistanceKind::Euclidean => euclidean(a, b),
        DistanceKind::Cosine => {
            let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
            let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
            let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
            if na == 0.0 || nb == 0.0 {
                1.0
            } else {
                1.0 - dot / (na * nb)
            }
        }
    }
}

/// One evaluated user pair: embedding distance vs distribution distance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairSample {
    pub embedding_distance: f64,
    pub js_distance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub sampled_users: usize,
    pub pair_count: usize,
    pub pearson: f64,
    pub distance: DistanceKind,
    pub seed: u64,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub pairs: Vec<PairSample>,
}

/// Samples users, forms all pairs among them, and correlates embedding
/// distance with Jensen-Shannon distance of the rank distributions.
pub fn embedding_quality(
    embeddings: &BTreeMap<UserId, Vec<f64>>,
    distributions: &BTreeMap<UserId, RankDistribution>,
    sample: usize,
    distance: DistanceKind,
    seed: u64,
) -> Result<EvaluationReport> {
    if embeddings.keys().ne(distributions.keys()) {
        return Err(Error::Data(
            "embedding and distribution maps cover different users".into(),
        ));
    }
    let mut users: Vec<&UserId> = embeddings.keys().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "pair-sample", 0));
    users.shuffle(&mut rng);
    users.truncate(sample);
    if users.len() < 2 {
        return Err(Error::Data("need at least two sampled users".into()));
    }
    users.sort();

    let mut pairs = Vec::with_capacity(users.len() * (users.len() - 1) / 2);
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..users.len() {
        for j in (i + 1)..users.len() {
            let d_emb = embedding_distance(
                &embeddings[users[i]],
                &embeddings[users[j]],
                distance,
            );
            let d_js = distributions[users[i]].js(&distributions[users[j]]);
            pairs.push(PairSample {
                embedding_distance: d_emb,
                js_distance: d_js,
            });
            xs.push(d_emb);
            ys.push(d_js);
        }
    }
    let pearson = pearson_r(&xs, &ys)?;
    Ok(EvaluationReport {
        sampled_users: users.len(),
        pair_count: pairs.len(),
        pearson,
        distance,
        seed,
        pairs,
    })
}

/// Removes the occurrences of the `k` largest distinct rank values.
///
/// When the sequence has no more distinct ranks than `k`, only rank-1
/// occurrences survive. An empty result is an error so callers can skip the
/// trajectory.
pub fn perturb_trajectory(weekly: &WeeklyTrajectory, k: usize) -> Result<WeeklyTrajectory> {
    if k == 0 {
        return Err(Error::Config("perturbation strength k must be >= 1".into()));
    }
    let mut distinct: Vec<u32> = weekly.ranks.clone();
    distinct.sort_unstable();
    distinct.dedup();

    let ranks: Vec<u32> = if k < distinct.len() {
        let cutoff = distinct[distinct.len() - k];
        weekly
            .ranks
            .iter()
            .copied()
            .filter(|r| *r < cutoff)
            .collect()
    } else if k > distinct.len() {
        weekly.ranks.iter().copied().filter(|r| *r == 1).collect()
    } else {
        // Removing every distinct value empties the sequence.
        Vec::new()
    };
    if ranks.is_empty() {
        return Err(Error::Data(format!(
            "perturbation with k = {k} empties the sequence"
        )));
    }
    Ok(WeeklyTrajectory {
        user: weekly.user.clone(),
        week: weekly.week,
        ranks,
    })
}

/// Distance summary for one perturbation strength.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KDistanceSummary {
    pub k: usize,
    pub samples: usize,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationReport {
    pub per_k: Vec<KDistanceSummary>,
    /// Largest pairwise distance between fitted points (the reference line).
    pub max_pairwise_distance: f64,
    /// True when median distance never decreases as k grows.
    pub monotone_medians: bool,
    pub sources: usize,
    pub seed: u64,
    /// Raw distances per k, in (k, distances) order, for external plotting.
    #[serde(skip)]
    pub distances: Vec<(usize, Vec<f64>)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationConfig {
    pub n_sources: usize,
    pub k_max: usize,
    pub infer_epochs: usize,
    pub seed: u64,
}

impl Default for PerturbationConfig {
    fn default() -> Self {
        PerturbationConfig {
            n_sources: 1000,
            k_max: 5,
            infer_epochs: 50,
            seed: 42,
        }
    }
}

/// Re-infers perturbed copies of sampled user trajectories and measures how
/// far their reduced embeddings drift from the fitted source points.
pub fn similarity_experiment(
    encoder: &TrajectoryEncoder,
    reducer: &UmapReducer,
    weekly_by_user: &BTreeMap<UserId, Vec<WeeklyTrajectory>>,
    user_points: &BTreeMap<UserId, Vec<f64>>,
    config: &PerturbationConfig,
) -> Result<PerturbationReport> {
    let max_pairwise = max_pairwise_distance(user_points);
    let mut report = PerturbationReport {
        per_k: Vec::new(),
        max_pairwise_distance: max_pairwise,
        monotone_medians: true,
        sources: 0,
        seed: config.seed,
        distances: Vec::new(),
    };
    if config.k_max == 0 {
        return Ok(report);
    }

    let mut sources: Vec<&UserId> = weekly_by_user
        .keys()
        .filter(|u| user_points.contains_key(*u))
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, "sources", 0));
    sources.shuffle(&mut rng);
    sources.truncate(config.n_sources);
    sources.sort();
    report.sources = sources.len();

    for k in 1..=config.k_max {
        let mut dists = Vec::with_capacity(sources.len());
        for (s_idx, user) in sources.iter().enumerate() {
            let weeks = &weekly_by_user[*user];
            let mut weekly_vectors = Vec::new();
            for w in weeks.iter().filter(|w| !w.ranks.is_empty()) {
                let Ok(perturbed) = perturb_trajectory(w, k) else {
                    continue;
                };
                let seed = derive_seed(
                    config.seed,
                    "perturb-infer",
                    (s_idx as u64) << 24 | (w.week as u64) << 8 | k as u64,
                );
                weekly_vectors.push(encoder.infer(&perturbed.ranks, config.infer_epochs, seed)?);
            }
            if weekly_vectors.is_empty() {
                continue;
            }
            let centroid = crate::embedding::aggregate_user(&weekly_vectors)?;
            let placed = reducer.transform(&Points::from_f32_rows(&[centroid])?)?;
            dists.push(euclidean(placed.row(0), &user_points[*user]));
        }
        if dists.is_empty() {
            continue;
        }
        report.per_k.push(KDistanceSummary {
            k,
            samples: dists.len(),
            q1: percentile(&dists, 0.25),
            median: percentile(&dists, 0.5),
            q3: percentile(&dists, 0.75),
            max: dists.iter().copied().fold(f64::MIN, f64::max),
        });
        report.distances.push((k, dists));
    }

    report.monotone_medians = report
        .per_k
        .windows(2)
        .all(|w| w[1].median + 1e-12 >= w[0].median);
    Ok(report)
}

pub fn max_pairwise_distance(points: &BTreeMap<UserId, Vec<f64>>) -> f64 {
    let rows: Vec<&Vec<f64>> = points.values().collect();
    let mut best = 0.0f64;
    for i in 0..rows.len() {
        for j in (i + 1)..rows.len() {
            best = best.max(euclidean(rows[i], rows[j]));
        }
    }
    best
}
