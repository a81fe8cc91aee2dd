//! Confidence-aware translation-based knowledge-graph embeddings.
//!
//! The toolkit learns entity/relation embeddings from noisy triple sets while
//! estimating a per-triple confidence, detects injected noise by energy
//! ranking, and evaluates entity prediction and triple classification. Plain
//! TransE is the degenerate case of constant confidence.
//!
//! Pipeline: [`kg`] loads and indexes triple files; [`noise`] synthesizes
//! labeled noisy datasets; [`paths`] precomputes two-step relation paths with
//! resource-allocation reliabilities; [`confidence`] maintains the local,
//! prior-path and adaptive-path confidence signals; [`trainer`] runs the
//! confidence-weighted margin SGD; [`eval`] implements the three evaluation
//! protocols.

pub mod confidence;
pub mod error;
pub mod eval;
pub mod kg;
pub mod noise;
pub mod paths;
pub mod trainer;

pub use confidence::{
    adaptive_path_confidence, combined_confidence, prior_path_confidence, triple_quality,
    ConfidenceConfig, LocalConfidenceTable, PriorPathCache,
};
pub use error::{CkrlError, Result};
pub use eval::{
    classify, detect_noise, entity_prediction, fit_thresholds, relation_prediction,
    ClassifierThresholds, PrCurve, PrPoint, RankingReport,
};
pub use kg::{ColumnOrder, EdgeId, EntityId, KnowledgeGraph, RelationId, Triple, TripleLoader, Vocab};
pub use noise::{
    generate_classification_negatives, inject_noise, Label, LabeledTriple, NoiseSpec,
};
pub use paths::{
    build_path_index, build_path_stats, enumerate_paths, pcra_reliability, PathConfig, PathIndex,
    PathIndexEntry, PathStats, RelationPath,
};
pub use trainer::{
    hinge_loss, init_embeddings, sample_negative, sgd_step, train, Checkpoint, EmbeddingModel,
    EpochStats, InitMode, Norm, TrainOutput, TrainingConfig, Variant,
};
