// Scratch probe: ablation directions. Removed before release.

use mob2vec_core::embedding::{Architecture, TrainingConfig};
use mob2vec_core::eval::{embedding_quality, DistanceKind};
use mob2vec_core::mining::MiningParams;
use mob2vec_core::pipeline;
use mob2vec_core::reduction::UmapParams;
use mob2vec_core::seqscan::SeqScanParams;
use mob2vec_core::synth::{generate_corpus, SynthConfig};
use mob2vec_core::time::WeekCalendar;

fn quality_of(
    prepared: &pipeline::Prepared,
    encoder: &mob2vec_core::embedding::TrajectoryEncoder,
    umap: &UmapParams,
) -> f64 {
    let user_vectors = pipeline::user_embeddings(encoder).unwrap();
    let (_, points) = pipeline::reduce_users(&user_vectors, umap).unwrap();
    let dists = prepared.distributions();
    // The label-side encoder can lack users (it is trained on the same weekly
    // set, so keys match here).
    embedding_quality(&points, &dists, 800, DistanceKind::Euclidean, 1)
        .unwrap()
        .pearson
}

#[test]
#[ignore]
fn probe_ablations() {
    let cfg = SynthConfig::default();
    let (trajs, _) = generate_corpus(&cfg).unwrap();
    let cal = WeekCalendar::trim(cfg.start, cfg.period_end(), 0).unwrap();
    let mining = MiningParams::default();
    let training = TrainingConfig::default();
    let umap = UmapParams::default();

    let prepared = pipeline::prepare(&trajs, &SeqScanParams::default(), &cal, true).unwrap();

    // Rank pipeline.
    let t0 = std::time::Instant::now();
    let rank_encoder = pipeline::train_rank_encoder(&prepared, &mining, &training).unwrap();
    let r_rank = quality_of(&prepared, &rank_encoder, &umap);
    println!("rank: r {r_rank:.4} ({:?})", t0.elapsed());

    // Location-symbol pipeline evaluated against the same rank distributions.
    let (keys, seqs, names) = pipeline::weekly_label_sequences(&prepared.summaries, &cal);
    let t0 = std::time::Instant::now();
    let label_encoder = pipeline::train_encoder_over(
        keys,
        seqs,
        |id| names[id as usize].clone(),
        &mining,
        &training,
    )
    .unwrap();
    let r_label = quality_of(&prepared, &label_encoder, &umap);
    println!(
        "location: r {r_label:.4} ({:?}) pattern vocab {}",
        t0.elapsed(),
        label_encoder.patterns.patterns.len()
    );
    println!("gap rank-location: {:.4}", r_rank - r_label);

    // PV-DM on the same corpus.
    let dm_training = TrainingConfig {
        architecture: Architecture::PvDm,
        ..training.clone()
    };
    let t0 = std::time::Instant::now();
    let dm_encoder = pipeline::train_rank_encoder(&prepared, &mining, &dm_training).unwrap();
    let dm_elapsed = t0.elapsed();
    let r_dm = quality_of(&prepared, &dm_encoder, &umap);
    println!("pv-dm: r {r_dm:.4} ({dm_elapsed:?})");

    // Dims 64 and 256.
    for dim in [64usize, 256] {
        let t0 = std::time::Instant::now();
        let cfg_d = TrainingConfig {
            dim,
            ..training.clone()
        };
        let enc = pipeline::train_rank_encoder(&prepared, &mining, &cfg_d).unwrap();
        let r = quality_of(&prepared, &enc, &umap);
        println!("dim {dim}: r {r:.4} ({:?})", t0.elapsed());
    }
}

#[test]
#[ignore]
fn probe_noise_ablation() {
    let cfg = SynthConfig {
        n_users: 200,
        noise_rate: 0.25,
        events_per_day: 2.0,
        ..SynthConfig::default()
    };
    let (trajs, _) = generate_corpus(&cfg).unwrap();
    let cal = WeekCalendar::trim(cfg.start, cfg.period_end(), 0).unwrap();
    let mining = MiningParams { min_support: 0.1, gap: 2, max_len: 4 };
    let training = TrainingConfig::default();
    let umap = UmapParams::default();

    let summarized = pipeline::prepare(&trajs, &SeqScanParams::default(), &cal, true).unwrap();
    {
        let trained = summarized.trained_weekly();
        let avg: f64 = trained.iter().map(|w| w.ranks.len()).sum::<usize>() as f64 / trained.len().max(1) as f64;
        println!("summarized weekly len avg {avg:.1}, users kept {} dropped {}", summarized.ranks.len(), summarized.dropped_users);
    }
    let t0 = std::time::Instant::now();
    let enc_s = pipeline::train_rank_encoder(&summarized, &mining, &training).unwrap();
    let r_s = quality_of(&summarized, &enc_s, &umap);
    println!("summarized at noise 0.25: r {r_s:.4} ({:?})", t0.elapsed());

    let native = pipeline::prepare(&trajs, &SeqScanParams::default(), &cal, false).unwrap();
    let trained = native.trained_weekly();
    let avg_len: f64 = trained.iter().map(|w| w.ranks.len()).sum::<usize>() as f64
        / trained.len() as f64;
    println!("native weekly len avg {avg_len:.1}");
    let t0 = std::time::Instant::now();
    let enc_n = pipeline::train_rank_encoder(&native, &mining, &training).unwrap();
    println!(
        "native train: {:?} pattern vocab {}",
        t0.elapsed(),
        enc_n.patterns.patterns.len()
    );
    let r_n = quality_of(&native, &enc_n, &umap);
    println!("native at noise 0.25: r {r_n:.4}");
    println!("gap summary-native: {:.4}", r_s - r_n);
}
