//! The four pipeline stages behind the subcommands.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use ckrl_core::confidence::{write_confidence_dump, PriorPathCache};
use ckrl_core::error::{CkrlError, Result};
use ckrl_core::eval::{
    classify, detect_noise, entity_prediction, fit_thresholds, relation_prediction,
    write_report_json,
};
use ckrl_core::kg::{ColumnOrder, KnowledgeGraph, Triple, TripleLoader};
use ckrl_core::noise::{
    generate_classification_negatives, inject_noise, read_labeled_tsv, write_labeled_tsv, Label,
    NoiseSpec,
};
use ckrl_core::paths::{
    build_path_index, build_path_stats, read_path_index, read_path_stats, write_path_index,
    write_path_stats, PathIndex, PathStats,
};
use ckrl_core::trainer::{train, write_training_log, Checkpoint, EmbeddingModel, TrainingConfig};

use crate::config::RunConfig;

/// Loaded splits sharing one id space.
struct Splits {
    loader: TripleLoader,
    train: Vec<Triple>,
    valid: Vec<Triple>,
    test: Vec<Triple>,
}

impl Splits {
    /// Loads train, then valid, then test; id assignment order is part of
    /// the artifact contract, so every command loads the same way.
    fn load(cfg: &RunConfig) -> Result<Splits> {
        let order = cfg.column_order()?;
        let mut loader = TripleLoader::new();
        let train = loader.load(&required(&cfg.data.train, "data.train")?, order)?;
        let valid = match &cfg.data.valid {
            Some(path) => loader.load(path, order)?,
            None => Vec::new(),
        };
        let test = match &cfg.data.test {
            Some(path) => loader.load(path, order)?,
            None => Vec::new(),
        };
        Ok(Splits {
            loader,
            train,
            valid,
            test,
        })
    }

    fn graph(&self) -> KnowledgeGraph {
        KnowledgeGraph::build(
            self.loader.entities.clone(),
            self.loader.relations.clone(),
            &self.train,
            &[&self.valid, &self.test],
        )
    }
}

fn required(path: &Option<PathBuf>, key: &str) -> Result<PathBuf> {
    path.clone()
        .ok_or_else(|| CkrlError::InvalidConfig(format!("missing required input: {key}")))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(
        File::create(path).map_err(|e| CkrlError::io(path, e))?,
    ))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| CkrlError::io(dir, e))
}

fn dump_effective_config(cfg: &RunConfig, dir: &Path) -> Result<()> {
    cfg.effective()?.dump(&dir.join("effective-config.toml"))
}

fn dump_vocabs(kg: &KnowledgeGraph, dir: &Path) -> Result<()> {
    let path = dir.join("entity-vocab.tsv");
    kg.entities()
        .dump(create(&path)?)
        .map_err(|e| CkrlError::io(&path, e))?;
    let path = dir.join("relation-vocab.tsv");
    kg.relations()
        .dump(create(&path)?)
        .map_err(|e| CkrlError::io(&path, e))?;
    Ok(())
}

// ---------------------------------------------------------------------------
// inject-noise
// ---------------------------------------------------------------------------

/// Builds one noisy dataset directory (N1, N2, …) per configured ratio, each
/// holding a plain noisy training file, the ground-truth labels, and a
/// statistics summary.
pub fn cmd_inject_noise(cfg: &RunConfig) -> Result<()> {
    let splits = Splits::load(cfg)?;
    let order = cfg.column_order()?;
    let kg = splits.graph();
    let out_root = cfg.output_dir();
    ensure_dir(&out_root)?;
    dump_effective_config(cfg, &out_root)?;
    dump_vocabs(&kg, &out_root)?;

    for (i, &ratio) in cfg.noise.ratios.iter().enumerate() {
        let dir = out_root.join(format!("N{}", i + 1));
        ensure_dir(&dir)?;
        let spec = NoiseSpec {
            noise_ratio: ratio,
            rng_seed: cfg.seed.0.wrapping_add(i as u64),
        };
        let labeled = inject_noise(&kg, kg.triples(), &spec)?;
        let noise_count = labeled.iter().filter(|lt| lt.label == Label::Noise).count();

        // Plain triple file for trainers, in the configured column layout.
        let path = dir.join("noisy-train.txt");
        let mut w = create(&path)?;
        for lt in &labeled {
            let h = kg.entities().name(lt.triple.head);
            let r = kg.relations().name(lt.triple.relation);
            let t = kg.entities().name(lt.triple.tail);
            match order {
                ColumnOrder::Hrt => writeln!(w, "{h}\t{r}\t{t}"),
                ColumnOrder::Htr => writeln!(w, "{h}\t{t}\t{r}"),
            }
            .map_err(|e| CkrlError::io(&path, e))?;
        }

        let path = dir.join("labels.tsv");
        write_labeled_tsv(create(&path)?, &kg, &labeled).map_err(|e| CkrlError::io(&path, e))?;

        let path = dir.join("stats.txt");
        let mut w = create(&path)?;
        (|| {
            writeln!(w, "entities\t{}", kg.num_entities())?;
            writeln!(w, "relations\t{}", kg.num_relations())?;
            writeln!(w, "train\t{}", kg.triples().len())?;
            writeln!(w, "valid\t{}", splits.valid.len())?;
            writeln!(w, "test\t{}", splits.test.len())?;
            writeln!(w, "noise_ratio\t{ratio}")?;
            writeln!(w, "noise\t{noise_count}")?;
            writeln!(w, "noisy_train\t{}", labeled.len())
        })()
        .map_err(|e| CkrlError::io(&path, e))?;

        log::info!(
            "wrote {} ({} positives + {} noise)",
            dir.display(),
            kg.triples().len(),
            noise_count
        );
        println!(
            "{}: {} positives, {} noise triples (ratio {ratio})",
            dir.display(),
            kg.triples().len(),
            noise_count
        );
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// precompute-paths
// ---------------------------------------------------------------------------

fn cache_digest(cfg: &RunConfig, train_path: &Path) -> Result<String> {
    let bytes = fs::read(train_path).map_err(|e| CkrlError::io(train_path, e))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    hasher.update(cfg.data.column_order.as_bytes());
    hasher.update(cfg.paths.epsilon.to_le_bytes());
    hasher.update((cfg.paths.fanout_cap as u64).to_le_bytes());
    hasher.update((cfg.paths.max_len as u64).to_le_bytes());
    Ok(format!("{:x}", hasher.finalize()))
}

fn default_cache_paths(cfg: &RunConfig) -> (PathBuf, PathBuf) {
    let out = cfg.output_dir();
    (
        cfg.paths
            .index_file
            .clone()
            .unwrap_or_else(|| out.join("paths-index.tsv")),
        cfg.paths
            .stats_file
            .clone()
            .unwrap_or_else(|| out.join("paths-stats.tsv")),
    )
}

/// Precomputes the per-triple path index and the relation–path statistics,
/// writing both caches with a digest of the inputs. With `reuse_cache`,
/// up-to-date caches short-circuit the computation.
pub fn cmd_precompute_paths(cfg: &RunConfig) -> Result<()> {
    let train_path = required(&cfg.data.train, "data.train")?;
    let digest = cache_digest(cfg, &train_path)?;
    let (index_path, stats_path) = default_cache_paths(cfg);

    if cfg.paths.reuse_cache && caches_current(&index_path, &stats_path, &digest) {
        println!(
            "caches up to date, skipping recomputation ({}, {})",
            index_path.display(),
            stats_path.display()
        );
        return Ok(());
    }

    let splits = Splits::load(cfg)?;
    let kg = splits.graph();
    let out_root = cfg.output_dir();
    ensure_dir(&out_root)?;
    if let Some(parent) = index_path.parent() {
        ensure_dir(parent)?;
    }
    dump_effective_config(cfg, &out_root)?;

    let path_cfg = cfg.path_config();
    let index = build_path_index(&kg, kg.triples(), &path_cfg);
    let stats = build_path_stats(&kg, kg.triples(), cfg.paths.epsilon, &path_cfg);

    write_path_index(create(&index_path)?, &index, kg.triples(), &digest)
        .map_err(|e| CkrlError::io(&index_path, e))?;
    write_path_stats(create(&stats_path)?, &stats, &digest)
        .map_err(|e| CkrlError::io(&stats_path, e))?;

    let with_paths = kg.triples().iter().filter(|t| !index.get(t).is_empty()).count();
    println!(
        "indexed {} triples ({} with at least one path) -> {}, {}",
        kg.triples().len(),
        with_paths,
        index_path.display(),
        stats_path.display()
    );
    Ok(())
}

fn caches_current(index_path: &Path, stats_path: &Path, digest: &str) -> bool {
    let check = |path: &Path, read_digest: &dyn Fn(&Path) -> Result<String>| match read_digest(path)
    {
        Ok(found) => found == digest,
        Err(_) => false,
    };
    check(index_path, &|p| {
        let file = File::open(p).map_err(|e| CkrlError::io(p, e))?;
        read_path_index(BufReader::new(file), p).map(|(_, d)| d)
    }) && check(stats_path, &|p| {
        let file = File::open(p).map_err(|e| CkrlError::io(p, e))?;
        read_path_stats(BufReader::new(file), p).map(|(_, d)| d)
    })
}

fn load_caches(cfg: &RunConfig) -> Result<(PathIndex, PathStats)> {
    let (index_path, stats_path) = default_cache_paths(cfg);
    let missing = |p: &Path| {
        CkrlError::MissingPathCache {
            variant: format!(
                "{} (no cache at {})",
                cfg.training.variant,
                p.display()
            ),
        }
    };
    if !index_path.exists() {
        return Err(missing(&index_path));
    }
    if !stats_path.exists() {
        return Err(missing(&stats_path));
    }
    let file = File::open(&index_path).map_err(|e| CkrlError::io(&index_path, e))?;
    let (index, index_digest) = read_path_index(BufReader::new(file), &index_path)?;
    let file = File::open(&stats_path).map_err(|e| CkrlError::io(&stats_path, e))?;
    let (stats, stats_digest) = read_path_stats(BufReader::new(file), &stats_path)?;

    if let Some(train_path) = &cfg.data.train {
        let digest = cache_digest(cfg, train_path)?;
        if index_digest != digest || stats_digest != digest {
            return Err(CkrlError::CacheFormat {
                path: index_path,
                msg: "cache was built from different inputs or parameters".to_owned(),
            });
        }
    }
    Ok((index, stats))
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

/// Trains the configured variant and writes the checkpoint, the training log,
/// the confidence dump, and optional TSV exports.
pub fn cmd_train(cfg: &RunConfig) -> Result<()> {
    let splits = Splits::load(cfg)?;
    let kg = splits.graph();
    let out_root = cfg.output_dir();
    ensure_dir(&out_root)?;
    dump_effective_config(cfg, &out_root)?;
    dump_vocabs(&kg, &out_root)?;

    let mut trainer_cfg: TrainingConfig = cfg.training_config()?;
    if trainer_cfg.checkpoint_every > 0 {
        trainer_cfg.checkpoint_dir = Some(out_root.clone());
    }

    let caches = if trainer_cfg.variant.uses_paths() {
        Some(load_caches(cfg)?)
    } else {
        None
    };
    let cache_refs = caches.as_ref().map(|(i, s)| (i, s));

    let started = std::time::Instant::now();
    let out = train(&kg, kg.triples(), cache_refs, &trainer_cfg)?;
    log::info!("training finished in {:?}", started.elapsed());

    let ckpt_path = out_root.join("model.ckpt");
    Checkpoint::write_path(&ckpt_path, &out.model, trainer_cfg.variant, &out.lt)?;

    let log_path = out_root.join("training-log.csv");
    write_training_log(create(&log_path)?, &out.log).map_err(|e| CkrlError::io(&log_path, e))?;

    // Confidence audit dump; path-based signals are zero without caches.
    let dump_path = out_root.join("confidence.tsv");
    let empty_index = PathIndex::default();
    let (index_ref, pp_cache) = match &caches {
        Some((index, stats)) => (
            index,
            PriorPathCache::build(kg.triples(), index, stats)?,
        ),
        None => (&empty_index, PriorPathCache::default()),
    };
    write_confidence_dump(
        create(&dump_path)?,
        &kg,
        &out.lt,
        &pp_cache,
        index_ref,
        &out.model,
        &trainer_cfg.confidence,
    )
    .map_err(|e| CkrlError::io(&dump_path, e))?;

    if cfg.training.export_tsv {
        let path = out_root.join("entity-embeddings.tsv");
        out.model
            .write_entities_tsv(create(&path)?, &kg)
            .map_err(|e| CkrlError::io(&path, e))?;
        let path = out_root.join("relation-embeddings.tsv");
        out.model
            .write_relations_tsv(create(&path)?, &kg)
            .map_err(|e| CkrlError::io(&path, e))?;
    }

    let last = out.log.last();
    println!(
        "trained {} for {} epochs: mean loss {:.6}, mean LT {:.4} -> {}",
        trainer_cfg.variant.as_str(),
        out.log.len(),
        last.map(|e| e.mean_loss).unwrap_or(f64::NAN),
        last.map(|e| e.mean_lt).unwrap_or(f64::NAN),
        ckpt_path.display()
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

/// Runs the selected tasks against a checkpoint and writes the report files.
pub fn cmd_evaluate(cfg: &RunConfig) -> Result<()> {
    let known_tasks = [
        "noise-detection",
        "completion",
        "classification",
        "relation-prediction",
    ];
    for task in &cfg.eval.tasks {
        if !known_tasks.contains(&task.as_str()) {
            return Err(CkrlError::InvalidConfig(format!(
                "unknown task {task:?} (expected one of {known_tasks:?})"
            )));
        }
    }

    let splits = Splits::load(cfg)?;
    let kg = splits.graph();
    let out_root = cfg.output_dir();
    ensure_dir(&out_root)?;
    dump_effective_config(cfg, &out_root)?;

    let ckpt_path = required(&cfg.eval.checkpoint, "eval.checkpoint")?;
    let ckpt = Checkpoint::read_path(&ckpt_path)?;
    let model: EmbeddingModel = ckpt.model;
    if model.num_entities() != kg.num_entities() || model.num_relations() != kg.num_relations() {
        return Err(CkrlError::CheckpointMismatch {
            msg: format!(
                "checkpoint has {}x{} entities/relations, data has {}x{}",
                model.num_entities(),
                model.num_relations(),
                kg.num_entities(),
                kg.num_relations()
            ),
        });
    }

    let mut report = std::collections::BTreeMap::new();
    report.insert(
        "variant".to_owned(),
        serde_json::Value::from(ckpt.variant.as_str()),
    );
    let mut summary: Vec<(String, String)> = Vec::new();

    for task in &cfg.eval.tasks {
        match task.as_str() {
            "noise-detection" => {
                let labels_path = cfg.eval.labels.clone().ok_or_else(|| {
                    CkrlError::InvalidConfig(
                        "noise-detection needs eval.labels (ground-truth label file)".to_owned(),
                    )
                })?;
                let file = File::open(&labels_path).map_err(|e| CkrlError::io(&labels_path, e))?;
                let labeled = read_labeled_tsv(BufReader::new(file), &kg, &labels_path)?;
                let curve = detect_noise(&model, &labeled)?;
                let csv_path = out_root.join("pr-curve.csv");
                curve
                    .write_csv(create(&csv_path)?)
                    .map_err(|e| CkrlError::io(&csv_path, e))?;
                report.insert("noise_detection_auc".to_owned(), curve.auc.into());
                for (recall, precision) in curve.precision_at_decades() {
                    report.insert(
                        format!("noise_detection_precision_at_{recall:.1}"),
                        precision.into(),
                    );
                }
                summary.push(("noise-detection AUC".to_owned(), format!("{:.4}", curve.auc)));
                summary.push((
                    "precision @ recall 0.1".to_owned(),
                    format!("{:.4}", curve.precision_at(0.1)),
                ));
            }
            "completion" => {
                let ranking = entity_prediction(&model, &splits.test, &kg)?;
                report.extend(ranking.to_flat_json("entity_prediction_"));
                summary.push((
                    "entity mean rank (raw/filter)".to_owned(),
                    format!(
                        "{:.1} / {:.1}",
                        ranking.mean_rank_raw, ranking.mean_rank_filtered
                    ),
                ));
                summary.push((
                    "entity hits@10 (raw/filter)".to_owned(),
                    format!("{:.4} / {:.4}", ranking.hits10_raw, ranking.hits10_filtered),
                ));
            }
            "classification" => {
                if splits.valid.is_empty() || splits.test.is_empty() {
                    return Err(CkrlError::InvalidConfig(
                        "classification needs data.valid and data.test".to_owned(),
                    ));
                }
                let valid_labeled =
                    generate_classification_negatives(&kg, &splits.valid, cfg.seed.0.wrapping_add(1))?;
                let test_labeled =
                    generate_classification_negatives(&kg, &splits.test, cfg.seed.0.wrapping_add(2))?;
                let thresholds = fit_thresholds(&model, &valid_labeled)?;
                let accuracy = classify(&model, &thresholds, &test_labeled);
                let valid_accuracy = classify(&model, &thresholds, &valid_labeled);
                report.insert("classification_accuracy".to_owned(), accuracy.into());
                report.insert(
                    "classification_valid_accuracy".to_owned(),
                    valid_accuracy.into(),
                );
                summary.push(("classification accuracy".to_owned(), format!("{accuracy:.4}")));
            }
            "relation-prediction" => {
                let ranking = relation_prediction(&model, &splits.test, &kg)?;
                report.extend(ranking.to_flat_json("relation_prediction_"));
                summary.push((
                    "relation mean rank (raw/filter)".to_owned(),
                    format!(
                        "{:.1} / {:.1}",
                        ranking.mean_rank_raw, ranking.mean_rank_filtered
                    ),
                ));
            }
            _ => unreachable!("validated above"),
        }
    }

    let report_path = out_root.join("report.json");
    write_report_json(create(&report_path)?, &report)
        .map_err(|e| CkrlError::io(&report_path, e))?;

    println!("evaluation of {}:", ckpt_path.display());
    let width = summary.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    for (key, value) in &summary {
        println!("  {key:width$}  {value}");
    }
    println!("report written to {}", report_path.display());
    Ok(())
}
