//! Triple confidences.
//!
//! Three signals weigh a training triple's loss contribution:
//!
//! * **LT** — local triple confidence, per-triple state in `(0, 1]` that
//!   decays geometrically on margin violations and recovers additively;
//! * **PP** — prior path confidence, a static score from relation–path
//!   co-occurrence statistics weighted by path reliability;
//! * **AP** — adaptive path confidence, a sigmoid of reliability-weighted
//!   inverse distances between the relation embedding and path embeddings,
//!   recomputed from the current model every visit.
//!
//! The combined confidence is the weighted sum `λ₁·LT + λ₂·PP + λ₃·AP`.

use std::collections::HashMap;
use std::io::Write;

use crate::error::{CkrlError, Result};
use crate::kg::{KnowledgeGraph, Triple};
use crate::paths::{PathIndex, PathIndexEntry, PathStats};
use crate::trainer::EmbeddingModel;

/// Hyper-parameters for confidence maintenance.
#[derive(Debug, Clone, Copy)]
pub struct ConfidenceConfig {
    /// Geometric decay factor applied to LT on margin violations; in (0, 1).
    pub alpha: f64,
    /// Additive LT recovery step; > 0.
    pub beta: f64,
    /// Combination weights (λ₁, λ₂, λ₃) for (LT, PP, AP).
    pub lambda: [f64; 3],
    /// Smoothing for the prior relation–path quality.
    pub epsilon: f64,
    /// Lower bound on the adaptive quality denominator.
    pub ap_guard: f64,
}

impl Default for ConfidenceConfig {
    fn default() -> Self {
        ConfidenceConfig {
            alpha: 0.9,
            beta: 1e-4,
            lambda: [1.0, 0.0, 0.0],
            epsilon: 0.01,
            ap_guard: 1e-6,
        }
    }
}

impl ConfidenceConfig {
    /// `alpha = 1` and `beta = 0` are admitted: they freeze LT at 1, which is
    /// exactly the plain-TransE degeneracy.
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(CkrlError::InvalidConfig(format!(
                "alpha must be in (0, 1], got {}",
                self.alpha
            )));
        }
        if self.beta < 0.0 {
            return Err(CkrlError::InvalidConfig(format!(
                "beta must be nonnegative, got {}",
                self.beta
            )));
        }
        if self.lambda.iter().all(|&l| l <= 0.0) {
            return Err(CkrlError::InvalidConfig(
                "at least one lambda must be positive".to_owned(),
            ));
        }
        if self.ap_guard <= 0.0 {
            return Err(CkrlError::InvalidConfig(format!(
                "ap_guard must be positive, got {}",
                self.ap_guard
            )));
        }
        Ok(())
    }
}

/// Pair-wise quality of a triple given its own energy and a negative's:
/// `-(γ + E_pos - E_neg)`. Positive means the margin is satisfied.
pub fn triple_quality(e_pos: f64, e_neg: f64, gamma: f64) -> f64 {
    -(gamma + e_pos - e_neg)
}

/// Per-training-triple local confidence, initialized to 1.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalConfidenceTable {
    keys: Vec<Triple>,
    index: HashMap<Triple, u32>,
    values: Vec<f64>,
}

impl LocalConfidenceTable {
    pub fn new(train: &[Triple]) -> Self {
        let mut keys = Vec::with_capacity(train.len());
        let mut index = HashMap::with_capacity(train.len());
        for &t in train {
            if !index.contains_key(&t) {
                index.insert(t, keys.len() as u32);
                keys.push(t);
            }
        }
        let values = vec![1.0; keys.len()];
        LocalConfidenceTable {
            keys,
            index,
            values,
        }
    }

    pub fn get(&self, t: Triple) -> Option<f64> {
        self.index.get(&t).map(|&i| self.values[i as usize])
    }

    /// Applies the quality-driven update: decay by `alpha` when `q <= 0`,
    /// grow by `beta` (clamped to 1) when `q > 0`. Returns the new value.
    pub fn update(&mut self, t: Triple, q: f64, cfg: &ConfidenceConfig) -> Result<f64> {
        let &i = self.index.get(&t).ok_or(CkrlError::UnknownTriple(t))?;
        let v = &mut self.values[i as usize];
        *v = if q <= 0.0 {
            cfg.alpha * *v
        } else {
            (*v + cfg.beta).min(1.0)
        };
        Ok(*v)
    }

    /// Overwrites the value for a known triple; used when restoring state
    /// from a checkpoint.
    pub fn set(&mut self, t: Triple, value: f64) -> Result<()> {
        let &i = self.index.get(&t).ok_or(CkrlError::UnknownTriple(t))?;
        self.values[i as usize] = value;
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        if self.values.is_empty() {
            return 0.0;
        }
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    /// Entries in first-insertion (training) order.
    pub fn iter(&self) -> impl Iterator<Item = (Triple, f64)> + '_ {
        self.keys.iter().copied().zip(self.values.iter().copied())
    }
}

/// Prior relation–path quality `ε + (1 - ε) · P(r, p) / P(p)`.
fn prior_quality(r: u32, p: crate::paths::RelationPath, stats: &PathStats) -> Result<f64> {
    let pair = stats.pair_count(p);
    if pair == 0 {
        return Err(CkrlError::InconsistentStats(format!(
            "path {p} is indexed for relation {r} but has pair count 0"
        )));
    }
    let co = stats.co_count(r, p);
    Ok(stats.epsilon + (1.0 - stats.epsilon) * co as f64 / pair as f64)
}

/// Prior path confidence: reliability-weighted sum of prior relation–path
/// qualities over the triple's path set; 0 when the set is empty.
pub fn prior_path_confidence(
    t: Triple,
    paths: &[PathIndexEntry],
    stats: &PathStats,
) -> Result<f64> {
    let mut total = 0.0;
    for entry in paths {
        total += prior_quality(t.relation, entry.path, stats)? * entry.reliability;
    }
    Ok(total)
}

/// Static per-triple PP values, computed once before training.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PriorPathCache {
    values: HashMap<Triple, f64>,
}

impl PriorPathCache {
    pub fn build(train: &[Triple], index: &PathIndex, stats: &PathStats) -> Result<Self> {
        let mut values = HashMap::with_capacity(train.len());
        for &t in train {
            if !values.contains_key(&t) {
                values.insert(t, prior_path_confidence(t, index.get(&t), stats)?);
            }
        }
        Ok(PriorPathCache { values })
    }

    /// 0 for triples without paths (or unknown triples).
    pub fn get(&self, t: Triple) -> f64 {
        self.values.get(&t).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Adaptive path confidence from the current embeddings:
/// `σ(Σᵢ Rᵢ / max(‖r - pᵢ‖, guard))`, 0 when the path set is empty.
pub fn adaptive_path_confidence(
    t: Triple,
    paths: &[PathIndexEntry],
    model: &EmbeddingModel,
    cfg: &ConfidenceConfig,
) -> f64 {
    if paths.is_empty() {
        return 0.0;
    }
    let mut arg = 0.0;
    for entry in paths {
        let q = model.relation_path_distance(t.relation, entry.path);
        arg += entry.reliability / q.max(cfg.ap_guard);
    }
    sigmoid(arg)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Weighted combination `λ₁·lt + λ₂·pp + λ₃·ap`.
pub fn combined_confidence(lt: f64, pp: f64, ap: f64, cfg: &ConfidenceConfig) -> f64 {
    cfg.lambda[0] * lt + cfg.lambda[1] * pp + cfg.lambda[2] * ap
}

/// Writes `h⇥r⇥t⇥LT⇥PP⇥AP⇥C` rows for noise auditing, in training order.
#[allow(clippy::too_many_arguments)]
pub fn write_confidence_dump<W: Write>(
    mut w: W,
    kg: &KnowledgeGraph,
    table: &LocalConfidenceTable,
    pp_cache: &PriorPathCache,
    index: &PathIndex,
    model: &EmbeddingModel,
    cfg: &ConfidenceConfig,
) -> std::io::Result<()> {
    for (t, lt) in table.iter() {
        let pp = pp_cache.get(t);
        let ap = adaptive_path_confidence(t, index.get(&t), model, cfg);
        let c = combined_confidence(lt, pp, ap, cfg);
        writeln!(
            w,
            "{}\t{}\t{}\t{lt}\t{pp}\t{ap}\t{c}",
            kg.entities().name(t.head),
            kg.relations().name(t.relation),
            kg.entities().name(t.tail),
        )?;
    }
    Ok(())
}
