//! Confidence-weighted margin SGD over translation embeddings.
//!
//! The energy of a triple is `‖h + r - t‖` under the configured norm; training
//! minimizes a pair-wise hinge against sampled negatives, with each positive's
//! loss scaled by its triple confidence. The plain-TransE baseline is the
//! degenerate case of constant confidence 1.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::confidence::{
    adaptive_path_confidence, combined_confidence, triple_quality, ConfidenceConfig,
    LocalConfidenceTable, PriorPathCache,
};
use crate::error::{CkrlError, Result};
use crate::kg::{EntityId, KnowledgeGraph, RelationId, Triple};
use crate::paths::{PathIndex, PathStats, RelationPath};

/// Distance norm for the energy function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Norm {
    #[default]
    L1,
    L2,
}

impl Norm {
    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Norm::L1),
            "l2" => Ok(Norm::L2),
            other => Err(CkrlError::InvalidConfig(format!(
                "unknown norm {other:?} (expected \"l1\" or \"l2\")"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Norm::L1 => "l1",
            Norm::L2 => "l2",
        }
    }
}

/// Confidence-weighting strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Variant {
    /// Constant confidence 1 (baseline).
    TransE,
    /// Local triple confidence only.
    #[default]
    Lt,
    /// Local + prior path confidence.
    LtPp,
    /// Local + prior + adaptive path confidence.
    LtPpAp,
}

impl Variant {
    /// Default combination weights for each strategy.
    pub fn default_lambda(&self) -> [f64; 3] {
        match self {
            Variant::TransE => [0.0, 0.0, 0.0],
            Variant::Lt => [1.0, 0.0, 0.0],
            Variant::LtPp => [0.9, 0.1, 0.0],
            Variant::LtPpAp => [1.5, 0.1, 0.4],
        }
    }

    pub fn uses_paths(&self) -> bool {
        matches!(self, Variant::LtPp | Variant::LtPpAp)
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "transe" => Ok(Variant::TransE),
            "lt" => Ok(Variant::Lt),
            "lt+pp" | "lt_pp" => Ok(Variant::LtPp),
            "lt+pp+ap" | "lt_pp_ap" => Ok(Variant::LtPpAp),
            other => Err(CkrlError::InvalidConfig(format!(
                "unknown variant {other:?} (expected transe, lt, lt+pp or lt+pp+ap)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Variant::TransE => "transe",
            Variant::Lt => "lt",
            Variant::LtPp => "lt+pp",
            Variant::LtPpAp => "lt+pp+ap",
        }
    }

    fn to_byte(self) -> u8 {
        match self {
            Variant::TransE => 0,
            Variant::Lt => 1,
            Variant::LtPp => 2,
            Variant::LtPpAp => 3,
        }
    }

    fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Variant::TransE),
            1 => Some(Variant::Lt),
            2 => Some(Variant::LtPp),
            3 => Some(Variant::LtPpAp),
            _ => None,
        }
    }
}

/// How to seed the embedding matrices.
#[derive(Debug, Clone, Default)]
pub enum InitMode {
    #[default]
    Random,
    Pretrained(PathBuf),
}

/// Dense entity and relation matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingModel {
    dim: usize,
    norm: Norm,
    num_entities: usize,
    num_relations: usize,
    entities: Vec<f64>,
    relations: Vec<f64>,
}

impl EmbeddingModel {
    pub fn zeros(num_entities: usize, num_relations: usize, dim: usize, norm: Norm) -> Self {
        EmbeddingModel {
            dim,
            norm,
            num_entities,
            num_relations,
            entities: vec![0.0; num_entities * dim],
            relations: vec![0.0; num_relations * dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn norm(&self) -> Norm {
        self.norm
    }

    pub fn num_entities(&self) -> usize {
        self.num_entities
    }

    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    pub fn entity(&self, id: EntityId) -> &[f64] {
        let i = id as usize * self.dim;
        &self.entities[i..i + self.dim]
    }

    pub fn entity_mut(&mut self, id: EntityId) -> &mut [f64] {
        let i = id as usize * self.dim;
        &mut self.entities[i..i + self.dim]
    }

    pub fn relation(&self, id: RelationId) -> &[f64] {
        let i = id as usize * self.dim;
        &self.relations[i..i + self.dim]
    }

    pub fn relation_mut(&mut self, id: RelationId) -> &mut [f64] {
        let i = id as usize * self.dim;
        &mut self.relations[i..i + self.dim]
    }

    fn apply_norm(&self, sum_abs: f64, sum_sq: f64) -> f64 {
        match self.norm {
            Norm::L1 => sum_abs,
            Norm::L2 => sum_sq.sqrt(),
        }
    }

    /// `‖h + r - t‖` under the configured norm.
    pub fn energy(&self, t: Triple) -> f64 {
        let h = self.entity(t.head);
        let r = self.relation(t.relation);
        let tl = self.entity(t.tail);
        let mut sum_abs = 0.0;
        let mut sum_sq = 0.0;
        for i in 0..self.dim {
            let u = h[i] + r[i] - tl[i];
            sum_abs += u.abs();
            sum_sq += u * u;
        }
        self.apply_norm(sum_abs, sum_sq)
    }

    /// `‖r - (r_1 + … + r_k)‖` where reversed edges embed as the negated
    /// forward relation vector.
    pub fn relation_path_distance(&self, r: RelationId, p: RelationPath) -> f64 {
        let nr = self.num_relations as u32;
        let mut diff: Vec<f64> = self.relation(r).to_vec();
        for e in p.edges() {
            let (row, sign) = if e < nr {
                (self.relation(e), 1.0)
            } else {
                (self.relation(e - nr), -1.0)
            };
            for i in 0..self.dim {
                diff[i] -= sign * row[i];
            }
        }
        let sum_abs: f64 = diff.iter().map(|v| v.abs()).sum();
        let sum_sq: f64 = diff.iter().map(|v| v * v).sum();
        self.apply_norm(sum_abs, sum_sq)
    }

    /// Rescales the given entity rows to unit L2 norm.
    pub fn normalize_entities<I: IntoIterator<Item = EntityId>>(&mut self, rows: I) {
        for id in rows {
            let row = self.entity_mut(id);
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for v in row {
                    *v /= norm;
                }
            }
        }
    }

    fn normalize_all(&mut self) {
        for id in 0..self.num_entities as u32 {
            self.normalize_entities([id]);
        }
        for id in 0..self.num_relations as u32 {
            let row = self.relation_mut(id);
            let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for v in row {
                    *v /= norm;
                }
            }
        }
    }

    /// Writes `name⇥v1,…,vd` rows for all entities.
    pub fn write_entities_tsv<W: Write>(&self, mut w: W, kg: &KnowledgeGraph) -> std::io::Result<()> {
        for id in 0..self.num_entities as u32 {
            write_row(&mut w, kg.entities().name(id), self.entity(id))?;
        }
        Ok(())
    }

    /// Writes `name⇥v1,…,vd` rows for all relations.
    pub fn write_relations_tsv<W: Write>(
        &self,
        mut w: W,
        kg: &KnowledgeGraph,
    ) -> std::io::Result<()> {
        for id in 0..self.num_relations as u32 {
            write_row(&mut w, kg.relations().name(id), self.relation(id))?;
        }
        Ok(())
    }
}

fn write_row<W: Write>(w: &mut W, name: &str, row: &[f64]) -> std::io::Result<()> {
    write!(w, "{name}\t")?;
    for (i, v) in row.iter().enumerate() {
        if i > 0 {
            write!(w, ",")?;
        }
        write!(w, "{v}")?;
    }
    writeln!(w)
}

/// Everything the training loop needs.
#[derive(Debug, Clone)]
pub struct TrainingConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub dim: usize,
    pub norm: Norm,
    pub variant: Variant,
    /// Probabilities of corrupting (head, tail, relation); must sum to 1.
    pub corruption_weights: [f64; 3],
    pub rng_seed: u64,
    pub init: InitMode,
    /// Draw a separate negative for the quality signal instead of reusing
    /// the loss negative.
    pub fresh_quality_negative: bool,
    pub confidence: ConfidenceConfig,
    /// Write an intermediate checkpoint every N epochs (0 = only final).
    pub checkpoint_every: usize,
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        let variant = Variant::default();
        let confidence = ConfidenceConfig {
            lambda: variant.default_lambda(),
            ..ConfidenceConfig::default()
        };
        TrainingConfig {
            gamma: 1.0,
            learning_rate: 0.001,
            epochs: 1000,
            batch_size: 4096,
            dim: 50,
            norm: Norm::L1,
            variant,
            corruption_weights: [0.4, 0.4, 0.2],
            rng_seed: 42,
            init: InitMode::Random,
            fresh_quality_negative: false,
            confidence,
            checkpoint_every: 0,
            checkpoint_dir: None,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if self.gamma <= 0.0 {
            return Err(CkrlError::InvalidConfig(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if self.learning_rate <= 0.0 {
            return Err(CkrlError::InvalidConfig(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if self.dim == 0 || self.batch_size == 0 {
            return Err(CkrlError::InvalidConfig(
                "dim and batch_size must be at least 1".to_owned(),
            ));
        }
        let w = &self.corruption_weights;
        if w.iter().any(|&x| x < 0.0) || (w.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(CkrlError::InvalidConfig(format!(
                "corruption weights must be nonnegative and sum to 1, got {w:?}"
            )));
        }
        if self.variant != Variant::TransE {
            self.confidence.validate()?;
        }
        Ok(())
    }
}

pub const NEGATIVE_RETRY_BUDGET: usize = 1000;

/// Corrupts one slot of `t` (chosen by the configured weights) with a
/// uniformly drawn different id, rejecting candidates present anywhere in the
/// known-triple set.
pub fn sample_negative(
    kg: &KnowledgeGraph,
    t: Triple,
    cfg: &TrainingConfig,
    rng: &mut ChaCha8Rng,
) -> Result<Triple> {
    let ne = kg.num_entities() as u32;
    let nr = kg.num_relations() as u32;
    let [w_head, w_tail, _] = cfg.corruption_weights;
    for _ in 0..NEGATIVE_RETRY_BUDGET {
        let u: f64 = rng.random();
        let candidate = if u < w_head {
            if ne < 2 {
                continue;
            }
            Triple::new(different(t.head, ne, rng), t.relation, t.tail)
        } else if u < w_head + w_tail {
            if ne < 2 {
                continue;
            }
            Triple::new(t.head, t.relation, different(t.tail, ne, rng))
        } else {
            if nr < 2 {
                continue;
            }
            Triple::new(t.head, different(t.relation, nr, rng), t.tail)
        };
        if !kg.contains(candidate) {
            return Ok(candidate);
        }
    }
    Err(CkrlError::NegativeSamplingExhausted {
        triple: t,
        budget: NEGATIVE_RETRY_BUDGET,
    })
}

/// Uniform draw from `0..n` excluding `current`.
fn different(current: u32, n: u32, rng: &mut ChaCha8Rng) -> u32 {
    let v = rng.random_range(0..n - 1);
    if v >= current {
        v + 1
    } else {
        v
    }
}

/// Confidence-weighted margin loss `C · max(0, γ + E_pos - E_neg)`.
pub fn hinge_loss(e_pos: f64, e_neg: f64, gamma: f64, c: f64) -> f64 {
    c * (gamma + e_pos - e_neg).max(0.0)
}

/// One SGD update: if the margin is violated, every involved embedding moves
/// against the confidence-scaled energy-difference gradient. Returns whether
/// anything changed.
///
/// Subgradients: componentwise sign for L1 (zero at kinks), `u / ‖u‖` for L2.
pub fn sgd_step(
    model: &mut EmbeddingModel,
    pos: Triple,
    neg: Triple,
    c: f64,
    cfg: &TrainingConfig,
) -> bool {
    let e_pos = model.energy(pos);
    let e_neg = model.energy(neg);
    if cfg.gamma + e_pos - e_neg <= 0.0 || c == 0.0 {
        return false;
    }
    let g_pos = residual_gradient(model, pos);
    let g_neg = residual_gradient(model, neg);
    let step = cfg.learning_rate * c;

    axpy(model.entity_mut(pos.head), &g_pos, -step);
    axpy(model.relation_mut(pos.relation), &g_pos, -step);
    axpy(model.entity_mut(pos.tail), &g_pos, step);

    axpy(model.entity_mut(neg.head), &g_neg, step);
    axpy(model.relation_mut(neg.relation), &g_neg, step);
    axpy(model.entity_mut(neg.tail), &g_neg, -step);
    true
}

/// Gradient of `‖h + r - t‖` with respect to `h` (equivalently `r`; the tail
/// gradient is its negation).
fn residual_gradient(model: &EmbeddingModel, t: Triple) -> Vec<f64> {
    let h = model.entity(t.head);
    let r = model.relation(t.relation);
    let tl = model.entity(t.tail);
    let mut u: Vec<f64> = (0..model.dim()).map(|i| h[i] + r[i] - tl[i]).collect();
    match model.norm() {
        Norm::L1 => {
            for v in &mut u {
                *v = if *v > 0.0 {
                    1.0
                } else if *v < 0.0 {
                    -1.0
                } else {
                    0.0
                };
            }
        }
        Norm::L2 => {
            let n = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n > 0.0 {
                for v in &mut u {
                    *v /= n;
                }
            } else {
                u.iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }
    u
}

fn axpy(row: &mut [f64], g: &[f64], scale: f64) {
    for (v, gi) in row.iter_mut().zip(g) {
        *v += scale * gi;
    }
}

/// Builds the initial model: uniform components in `[-6/√d, 6/√d]` with all
/// rows L2-normalized, or a checkpoint reload. Also returns any carried local
/// confidence values (empty for random init).
pub fn init_embeddings(
    cfg: &TrainingConfig,
    num_entities: usize,
    num_relations: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(EmbeddingModel, Vec<(Triple, f64)>)> {
    match &cfg.init {
        InitMode::Random => {
            let mut model = EmbeddingModel::zeros(num_entities, num_relations, cfg.dim, cfg.norm);
            let bound = 6.0 / (cfg.dim as f64).sqrt();
            for v in model.entities.iter_mut().chain(model.relations.iter_mut()) {
                *v = rng.random_range(-bound..bound);
            }
            model.normalize_all();
            Ok((model, Vec::new()))
        }
        InitMode::Pretrained(path) => {
            let ckpt = Checkpoint::read_path(path)?;
            if ckpt.model.dim != cfg.dim
                || ckpt.model.num_entities != num_entities
                || ckpt.model.num_relations != num_relations
            {
                return Err(CkrlError::CheckpointMismatch {
                    msg: format!(
                        "checkpoint is {}x{} entities/relations at d={}, expected {}x{} at d={}",
                        ckpt.model.num_entities,
                        ckpt.model.num_relations,
                        ckpt.model.dim,
                        num_entities,
                        num_relations,
                        cfg.dim
                    ),
                });
            }
            let mut model = ckpt.model;
            model.norm = cfg.norm;
            Ok((model, ckpt.lt))
        }
    }
}

/// Per-epoch training statistics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub mean_loss: f64,
    pub mean_lt: f64,
    pub wall_ms: u64,
}

/// Writes the training log as `epoch,mean_loss,mean_lt,wall_ms` CSV.
pub fn write_training_log<W: Write>(mut w: W, log: &[EpochStats]) -> std::io::Result<()> {
    writeln!(w, "epoch,mean_loss,mean_lt,wall_ms")?;
    for e in log {
        writeln!(w, "{},{},{},{}", e.epoch, e.mean_loss, e.mean_lt, e.wall_ms)?;
    }
    Ok(())
}

/// Result of a training run.
#[derive(Debug)]
pub struct TrainOutput {
    pub model: EmbeddingModel,
    pub lt: LocalConfidenceTable,
    pub log: Vec<EpochStats>,
}

/// Runs confidence-weighted margin SGD.
///
/// Per epoch the training list is reshuffled (seeded); per positive a negative
/// is sampled, the local confidence is updated from the margin quality, the
/// combined confidence is computed for the configured variant, and one SGD
/// step is applied. Entity rows touched by a batch are renormalized to unit
/// L2 after it. Path-based variants need the precomputed index and stats.
pub fn train(
    kg: &KnowledgeGraph,
    train_triples: &[Triple],
    caches: Option<(&PathIndex, &PathStats)>,
    cfg: &TrainingConfig,
) -> Result<TrainOutput> {
    cfg.validate()?;
    let conf = &cfg.confidence;
    let needs_paths = cfg.variant.uses_paths();
    let (index, pp_cache) = match (needs_paths, caches) {
        (false, _) => (None, None),
        (true, Some((index, stats))) => {
            let pp = PriorPathCache::build(train_triples, index, stats)?;
            (Some(index), Some(pp))
        }
        (true, None) => {
            return Err(CkrlError::MissingPathCache {
                variant: cfg.variant.as_str().to_owned(),
            });
        }
    };

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.rng_seed);
    let (mut model, carried_lt) =
        init_embeddings(cfg, kg.num_entities(), kg.num_relations(), &mut rng)?;
    let mut lt = LocalConfidenceTable::new(train_triples);
    let mut carried = 0usize;
    for (t, v) in carried_lt {
        if lt.set(t, v).is_ok() {
            carried += 1;
        }
    }
    if carried > 0 {
        log::info!("carried {carried} local confidence values from the checkpoint");
    }

    let n = train_triples.len();
    let mut order: Vec<usize> = (0..n).collect();
    let mut log_out = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        let started = Instant::now();
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let mut touched: HashSet<EntityId> = HashSet::new();
            for &i in batch {
                let pos = train_triples[i];
                let neg = sample_negative(kg, pos, cfg, &mut rng)?;
                let e_pos = model.energy(pos);
                let e_neg = model.energy(neg);

                let c = if cfg.variant == Variant::TransE {
                    1.0
                } else {
                    let quality_neg_energy = if cfg.fresh_quality_negative {
                        model.energy(sample_negative(kg, pos, cfg, &mut rng)?)
                    } else {
                        e_neg
                    };
                    let q = triple_quality(e_pos, quality_neg_energy, cfg.gamma);
                    let lt_value = lt.update(pos, q, conf)?;
                    let pp_value = pp_cache.as_ref().map_or(0.0, |pp| pp.get(pos));
                    let ap_value = match (cfg.variant, index) {
                        (Variant::LtPpAp, Some(index)) => {
                            adaptive_path_confidence(pos, index.get(&pos), &model, conf)
                        }
                        _ => 0.0,
                    };
                    combined_confidence(lt_value, pp_value, ap_value, conf)
                };

                let loss = hinge_loss(e_pos, e_neg, cfg.gamma, c);
                if !loss.is_finite() {
                    return Err(CkrlError::NonFiniteLoss { epoch });
                }
                loss_sum += loss;

                if sgd_step(&mut model, pos, neg, c, cfg) {
                    touched.extend([pos.head, pos.tail, neg.head, neg.tail]);
                }
            }
            model.normalize_entities(touched);
        }

        log_out.push(EpochStats {
            epoch,
            mean_loss: loss_sum / n as f64,
            mean_lt: lt.mean(),
            wall_ms: started.elapsed().as_millis() as u64,
        });

        if cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 {
            if let Some(dir) = &cfg.checkpoint_dir {
                let path = dir.join(format!("epoch-{epoch:05}.ckpt"));
                Checkpoint::write_path(&path, &model, cfg.variant, &lt)?;
            }
        }
    }

    Ok(TrainOutput {
        model,
        lt,
        log: log_out,
    })
}

// ---------------------------------------------------------------------------
// Checkpoints
// ---------------------------------------------------------------------------

const CKPT_MAGIC: &[u8; 8] = b"CKRLCKPT";
const CKPT_VERSION: u32 = 1;

/// Byte offset of the variant tag within a checkpoint; the only header field
/// that differs between a TransE run and its degenerate confidence-weighted
/// twin.
pub const CKPT_VARIANT_OFFSET: usize = 8 + 4 + 4 + 4 + 4 + 1;

/// A serialized model plus its local confidence table.
#[derive(Debug, Clone)]
pub struct Checkpoint {
    pub model: EmbeddingModel,
    pub variant: Variant,
    pub lt: Vec<(Triple, f64)>,
}

impl Checkpoint {
    pub fn write_path(
        path: &Path,
        model: &EmbeddingModel,
        variant: Variant,
        lt: &LocalConfidenceTable,
    ) -> Result<()> {
        let file = File::create(path).map_err(|e| CkrlError::io(path, e))?;
        let mut w = BufWriter::new(file);
        Checkpoint::write(&mut w, model, variant, lt).map_err(|e| CkrlError::io(path, e))
    }

    pub fn write<W: Write>(
        w: &mut W,
        model: &EmbeddingModel,
        variant: Variant,
        lt: &LocalConfidenceTable,
    ) -> std::io::Result<()> {
        w.write_all(CKPT_MAGIC)?;
        w.write_u32::<LittleEndian>(CKPT_VERSION)?;
        w.write_u32::<LittleEndian>(model.dim as u32)?;
        w.write_u32::<LittleEndian>(model.num_entities as u32)?;
        w.write_u32::<LittleEndian>(model.num_relations as u32)?;
        w.write_u8(match model.norm {
            Norm::L1 => 0,
            Norm::L2 => 1,
        })?;
        w.write_u8(variant.to_byte())?;
        for &v in &model.entities {
            w.write_f64::<LittleEndian>(v)?;
        }
        for &v in &model.relations {
            w.write_f64::<LittleEndian>(v)?;
        }
        w.write_u64::<LittleEndian>(lt.len() as u64)?;
        for (t, v) in lt.iter() {
            w.write_u32::<LittleEndian>(t.head)?;
            w.write_u32::<LittleEndian>(t.relation)?;
            w.write_u32::<LittleEndian>(t.tail)?;
            w.write_f64::<LittleEndian>(v)?;
        }
        Ok(())
    }

    pub fn read_path(path: &Path) -> Result<Checkpoint> {
        let file = File::open(path).map_err(|e| CkrlError::io(path, e))?;
        Checkpoint::read(&mut BufReader::new(file), path)
    }

    pub fn read<R: Read>(r: &mut R, path: &Path) -> Result<Checkpoint> {
        let bad = |msg: &str| CkrlError::CheckpointFormat {
            path: path.to_owned(),
            msg: msg.to_owned(),
        };
        let io_err = |e: std::io::Error| CkrlError::io(path, e);

        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io_err)?;
        if &magic != CKPT_MAGIC {
            return Err(bad("not a checkpoint file"));
        }
        let version = r.read_u32::<LittleEndian>().map_err(io_err)?;
        if version != CKPT_VERSION {
            return Err(bad(&format!("unsupported version {version}")));
        }
        let dim = r.read_u32::<LittleEndian>().map_err(io_err)? as usize;
        let ne = r.read_u32::<LittleEndian>().map_err(io_err)? as usize;
        let nr = r.read_u32::<LittleEndian>().map_err(io_err)? as usize;
        let norm = match r.read_u8().map_err(io_err)? {
            0 => Norm::L1,
            1 => Norm::L2,
            _ => return Err(bad("bad norm tag")),
        };
        let variant =
            Variant::from_byte(r.read_u8().map_err(io_err)?).ok_or_else(|| bad("bad variant tag"))?;

        let mut model = EmbeddingModel::zeros(ne, nr, dim, norm);
        for v in model.entities.iter_mut() {
            *v = r.read_f64::<LittleEndian>().map_err(io_err)?;
        }
        for v in model.relations.iter_mut() {
            *v = r.read_f64::<LittleEndian>().map_err(io_err)?;
        }
        let count = r.read_u64::<LittleEndian>().map_err(io_err)? as usize;
        let mut lt = Vec::with_capacity(count);
        for _ in 0..count {
            let h = r.read_u32::<LittleEndian>().map_err(io_err)?;
            let rel = r.read_u32::<LittleEndian>().map_err(io_err)?;
            let t = r.read_u32::<LittleEndian>().map_err(io_err)?;
            let v = r.read_f64::<LittleEndian>().map_err(io_err)?;
            lt.push((Triple::new(h, rel, t), v));
        }
        Ok(Checkpoint { model, variant, lt })
    }
}
