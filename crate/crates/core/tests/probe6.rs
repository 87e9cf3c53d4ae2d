// Scratch probe: architecture margin stability. Removed before release.

use mob2vec_core::embedding::{Architecture, TrainingConfig};
use mob2vec_core::eval::{embedding_quality, DistanceKind};
use mob2vec_core::mining::MiningParams;
use mob2vec_core::pipeline;
use mob2vec_core::reduction::UmapParams;
use mob2vec_core::seqscan::SeqScanParams;
use mob2vec_core::synth::{generate_corpus, SynthConfig};
use mob2vec_core::time::WeekCalendar;

#[test]
#[ignore]
fn probe_arch_margin() {
    for epochs in [5usize, 10, 20] {
    for seed in [42u64, 7, 1234] {
        let cfg = SynthConfig {
            seed,
            ..SynthConfig::default()
        };
        let (trajs, _) = generate_corpus(&cfg).unwrap();
        let cal = WeekCalendar::trim(cfg.start, cfg.period_end(), 0).unwrap();
        let prepared = pipeline::prepare(&trajs, &SeqScanParams::default(), &cal, true).unwrap();
        let mining = MiningParams::default();
        let umap = UmapParams::default();
        let mut rs = Vec::new();
        for arch in [Architecture::PvDbow, Architecture::PvDm] {
            let training = TrainingConfig {
                architecture: arch,
                epochs,
                ..TrainingConfig::default()
            };
            let encoder = pipeline::train_rank_encoder(&prepared, &mining, &training).unwrap();
            let user_vectors = pipeline::user_embeddings(&encoder).unwrap();
            let (_, points) = pipeline::reduce_users(&user_vectors, &umap).unwrap();
            let dists = prepared.distributions();
            rs.push(
                embedding_quality(&points, &dists, 800, DistanceKind::Euclidean, 1)
                    .unwrap()
                    .pearson,
            );
        }
        println!(
            "epochs {epochs} seed {seed}: dbow {:.4} dm {:.4} margin {:+.4}",
            rs[0],
            rs[1],
            rs[0] - rs[1]
        );
    }
    }
}
