//! End-to-end integration: triple files on disk through noise injection,
//! path precomputation, every training variant, and all three evaluation
//! protocols.

mod common;

use std::fs;
use std::io::{BufReader, Cursor};

use ckrl_core::confidence::{ConfidenceConfig, PriorPathCache};
use ckrl_core::eval::{classify, detect_noise, entity_prediction, fit_thresholds, relation_prediction};
use ckrl_core::kg::{ColumnOrder, KnowledgeGraph, Triple, TripleLoader};
use ckrl_core::noise::{
    generate_classification_negatives, inject_noise, read_labeled_tsv, write_labeled_tsv, Label,
    NoiseSpec,
};
use ckrl_core::paths::{
    build_path_index, build_path_stats, read_path_index, read_path_stats, write_path_index,
    write_path_stats, PathConfig,
};
use ckrl_core::trainer::{train, Checkpoint, TrainingConfig, Variant};
use common::{graph_of, learnable_triples};

fn write_split(path: &std::path::Path, kg: &KnowledgeGraph, triples: &[Triple]) {
    let mut buf = Vec::new();
    for t in triples {
        buf.extend_from_slice(
            format!(
                "{}\t{}\t{}\n",
                kg.entities().name(t.head),
                kg.entities().name(t.tail),
                kg.relations().name(t.relation)
            )
            .as_bytes(),
        );
    }
    fs::write(path, buf).unwrap();
}

#[test]
fn files_to_reports_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let all = learnable_triples(120, 8, 800, 1);
    let (train_part, rest) = all.split_at(640);
    let (valid_part, test_part) = rest.split_at(80);

    // Materialize splits in FB15K's native head⇥tail⇥relation layout.
    let staging = graph_of(&all, 120, 8, &[]);
    write_split(&dir.path().join("train.txt"), &staging, train_part);
    write_split(&dir.path().join("valid.txt"), &staging, valid_part);
    write_split(&dir.path().join("test.txt"), &staging, test_part);

    // Load with a fresh vocabulary; ids must be dense and stable.
    let mut loader = TripleLoader::new();
    let train_loaded = loader
        .load(&dir.path().join("train.txt"), ColumnOrder::Htr)
        .unwrap();
    let valid_loaded = loader
        .load(&dir.path().join("valid.txt"), ColumnOrder::Htr)
        .unwrap();
    let test_loaded = loader
        .load(&dir.path().join("test.txt"), ColumnOrder::Htr)
        .unwrap();
    assert_eq!(train_loaded.len(), 640);
    let kg_clean = KnowledgeGraph::build(
        loader.entities.clone(),
        loader.relations.clone(),
        &train_loaded,
        &[&valid_loaded, &test_loaded],
    );

    // Inject noise and round-trip the labels file.
    let labeled = inject_noise(
        &kg_clean,
        kg_clean.triples(),
        &NoiseSpec {
            noise_ratio: 0.15,
            rng_seed: 5,
        },
    )
    .unwrap();
    let mut labels_buf = Vec::new();
    write_labeled_tsv(&mut labels_buf, &kg_clean, &labeled).unwrap();
    let labels_path = dir.path().join("labels.tsv");
    fs::write(&labels_path, &labels_buf).unwrap();
    let labeled_back = read_labeled_tsv(
        BufReader::new(fs::File::open(&labels_path).unwrap()),
        &kg_clean,
        &labels_path,
    )
    .unwrap();
    assert_eq!(labeled_back, labeled);

    // The trainer sees the noisy training set as ground truth.
    let noisy: Vec<Triple> = labeled.iter().map(|lt| lt.triple).collect();
    let kg = KnowledgeGraph::build(
        loader.entities.clone(),
        loader.relations.clone(),
        &noisy,
        &[&valid_loaded, &test_loaded],
    );

    // Path caches through real files.
    let path_cfg = PathConfig::default();
    let index = build_path_index(&kg, kg.triples(), &path_cfg);
    let stats = build_path_stats(&kg, kg.triples(), 0.01, &path_cfg);
    let index_path = dir.path().join("paths.tsv");
    let stats_path = dir.path().join("stats.tsv");
    let mut buf = Vec::new();
    write_path_index(&mut buf, &index, kg.triples(), "deadbeef").unwrap();
    fs::write(&index_path, &buf).unwrap();
    let mut buf = Vec::new();
    write_path_stats(&mut buf, &stats, "deadbeef").unwrap();
    fs::write(&stats_path, &buf).unwrap();
    let (index_back, digest) = read_path_index(
        BufReader::new(fs::File::open(&index_path).unwrap()),
        &index_path,
    )
    .unwrap();
    assert_eq!(digest, "deadbeef");
    for t in kg.triples() {
        assert_eq!(index_back.get(t), index.get(t));
    }
    let (stats_back, _) = read_path_stats(
        BufReader::new(fs::File::open(&stats_path).unwrap()),
        &stats_path,
    )
    .unwrap();
    assert_eq!(stats_back, stats);

    // Every variant trains; the full variant uses the reloaded caches.
    for variant in [Variant::TransE, Variant::Lt, Variant::LtPp, Variant::LtPpAp] {
        let cfg = TrainingConfig {
            variant,
            confidence: ConfidenceConfig {
                lambda: variant.default_lambda(),
                ..ConfidenceConfig::default()
            },
            dim: 12,
            epochs: 15,
            batch_size: 128,
            learning_rate: 0.01,
            rng_seed: 99,
            ..TrainingConfig::default()
        };
        let caches = variant
            .uses_paths()
            .then_some((&index_back, &stats_back));
        let out = train(&kg, kg.triples(), caches, &cfg).unwrap();
        assert_eq!(out.log.len(), 15);
        assert!(out.log.iter().all(|e| e.mean_loss.is_finite()));

        // Noise detection against the ground-truth labels.
        let curve = detect_noise(&out.model, &labeled).unwrap();
        assert!(curve.auc > 0.0 && curve.auc <= 1.0);

        // Entity prediction on the held-out test split.
        let report = entity_prediction(&out.model, &test_loaded, &kg).unwrap();
        assert!(report.mean_rank_filtered <= report.mean_rank_raw);
        let rel_report = relation_prediction(&out.model, &test_loaded, &kg).unwrap();
        assert!(rel_report.mean_rank_filtered <= rel_report.mean_rank_raw);

        // Triple classification with generated negatives.
        let valid_labeled = generate_classification_negatives(&kg, &valid_loaded, 21).unwrap();
        let test_labeled = generate_classification_negatives(&kg, &test_loaded, 22).unwrap();
        let thresholds = fit_thresholds(&out.model, &valid_labeled).unwrap();
        let accuracy = classify(&out.model, &thresholds, &test_labeled);
        assert!(
            accuracy > 0.5,
            "{variant:?} classification accuracy {accuracy} not better than chance"
        );

        // Checkpoint round trip.
        let mut ckpt_buf = Vec::new();
        Checkpoint::write(&mut ckpt_buf, &out.model, variant, &out.lt).unwrap();
        let ckpt = Checkpoint::read(
            &mut Cursor::new(&ckpt_buf),
            &dir.path().join("model.ckpt"),
        )
        .unwrap();
        assert_eq!(ckpt.model, out.model);
        assert_eq!(ckpt.variant, variant);
    }
}

#[test]
fn pp_cache_values_match_direct_computation() {
    let all = learnable_triples(60, 5, 300, 2);
    let kg = graph_of(&all, 60, 5, &[]);
    let cfg = PathConfig::default();
    let index = build_path_index(&kg, kg.triples(), &cfg);
    let stats = build_path_stats(&kg, kg.triples(), 0.01, &cfg);
    let pp = PriorPathCache::build(kg.triples(), &index, &stats).unwrap();
    for t in kg.triples() {
        let direct =
            ckrl_core::confidence::prior_path_confidence(*t, index.get(t), &stats).unwrap();
        assert_eq!(pp.get(*t), direct);
        if index.get(t).is_empty() {
            assert_eq!(pp.get(*t), 0.0);
        } else {
            assert!(pp.get(*t) > 0.0);
        }
    }
}

#[test]
fn noise_injection_statistics_are_plausible() {
    // The injected set respects the requested count and the head/tail balance
    // stays near 50/50 (chi-squared sanity bound).
    let all = learnable_triples(200, 10, 2000, 3);
    let kg = graph_of(&all, 200, 10, &[]);
    let (labeled, positions) = ckrl_core::noise::inject_noise_traced(
        &kg,
        kg.triples(),
        &NoiseSpec {
            noise_ratio: 0.25,
            rng_seed: 17,
        },
    )
    .unwrap();
    let noise: Vec<_> = labeled
        .iter()
        .filter(|lt| lt.label == Label::Noise)
        .collect();
    assert_eq!(noise.len(), (0.25 * kg.triples().len() as f64).round() as usize);
    assert_eq!(positions.len(), noise.len());
    let heads = positions.iter().filter(|&&h| h).count() as f64;
    let expected = positions.len() as f64 / 2.0;
    let chi2 = 2.0 * (heads - expected).powi(2) / expected;
    assert!(chi2 < 6.635, "chi2 {chi2}");
}
