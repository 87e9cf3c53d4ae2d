// Scratch probe: end-to-end quality metric. Removed before release.

use mob2vec_core::embedding::TrainingConfig;
use mob2vec_core::eval::{embedding_quality, DistanceKind};
use mob2vec_core::mining::MiningParams;
use mob2vec_core::pipeline;
use mob2vec_core::reduction::UmapParams;
use mob2vec_core::seqscan::SeqScanParams;
use mob2vec_core::synth::{generate_corpus, SynthConfig};
use mob2vec_core::time::WeekCalendar;

#[test]
#[ignore]
fn probe_quality() {
    let cfg = SynthConfig {
        n_users: 200,
        ..SynthConfig::default()
    };
    let (trajs, _) = generate_corpus(&cfg).unwrap();
    let cal = WeekCalendar::trim(cfg.start, cfg.period_end(), 0).unwrap();

    let mining = MiningParams::default();
    let training = TrainingConfig::default();
    let umap = UmapParams::default();

    let t0 = std::time::Instant::now();
    let prepared = pipeline::prepare(&trajs, &SeqScanParams::default(), &cal, true).unwrap();
    println!("prepare: {:?}", t0.elapsed());

    let t0 = std::time::Instant::now();
    let encoder = pipeline::train_rank_encoder(&prepared, &mining, &training).unwrap();
    println!("train: {:?}", t0.elapsed());
    println!(
        "symbol vocab {} pattern vocab {} sequences {}",
        encoder.symbol_model.vocab.len(),
        encoder.patterns.patterns.len(),
        encoder.keys().len()
    );

    let t0 = std::time::Instant::now();
    let user_vectors = pipeline::user_embeddings(&encoder).unwrap();
    let (_reducer, points) = pipeline::reduce_users(&user_vectors, &umap).unwrap();
    println!("reduce: {:?} users {}", t0.elapsed(), points.len());

    let dists = prepared.distributions();

    // r in the full-width embedding space (no reduction).
    let raw: std::collections::BTreeMap<_, _> = user_vectors
        .iter()
        .map(|(u, v)| (u.clone(), v.iter().map(|x| f64::from(*x)).collect::<Vec<f64>>()))
        .collect();
    let r_raw_euclid = embedding_quality(&raw, &dists, 800, DistanceKind::Euclidean, 1)
        .unwrap()
        .pearson;
    let r_raw_cos = embedding_quality(&raw, &dists, 800, DistanceKind::Cosine, 1)
        .unwrap()
        .pearson;
    println!("r 128d euclid {r_raw_euclid:.4} cosine {r_raw_cos:.4}");

    let report = embedding_quality(&points, &dists, 800, DistanceKind::Euclidean, 1).unwrap();
    println!(
        "r 2d umap {:.4} over {} pairs",
        report.pearson, report.pair_count
    );

    // PCA comparison.
    let rows: Vec<Vec<f32>> = user_vectors.values().cloned().collect();
    let pts = mob2vec_core::reduction::Points::from_f32_rows(&rows).unwrap();
    let (_, pca2d) = mob2vec_core::reduction::pca_fit_transform(&pts, 2).unwrap();
    let pca_points: std::collections::BTreeMap<_, _> = user_vectors
        .keys()
        .cloned()
        .enumerate()
        .map(|(i, u)| (u, pca2d.row(i).to_vec()))
        .collect();
    let r_pca = embedding_quality(&pca_points, &dists, 800, DistanceKind::Euclidean, 1)
        .unwrap()
        .pearson;
    println!("r 2d pca {r_pca:.4}");
}
