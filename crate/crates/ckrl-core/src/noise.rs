//! Synthetic noise injection.
//!
//! Corrupts training triples under the local closed-world assumption: a
//! replacement head (or tail) must already appear as a head (or tail) of the
//! same relation, so generated noise is type-consistent and hard to spot.
//! Because sampling is restricted to the observed domains up front, no
//! post-hoc discard pass is needed.

use std::collections::HashSet;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

use crate::error::{CkrlError, Result};
use crate::kg::{EntityId, KnowledgeGraph, Triple};

/// Ground-truth label assigned at generation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Positive,
    Noise,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LabeledTriple {
    pub triple: Triple,
    pub label: Label,
}

/// How much noise to inject, as a fraction of the positive count.
#[derive(Debug, Clone, Copy)]
pub struct NoiseSpec {
    pub noise_ratio: f64,
    pub rng_seed: u64,
}

/// Attempts per noise triple before giving up.
pub const RETRY_BUDGET: usize = 100;

/// Labels `train` as positive and appends `round(ratio * |train|)` distinct
/// corrupted triples, each derived from a uniformly sampled positive by
/// swapping its head or tail (chosen uniformly) for a different entity from
/// the relation's observed domain. Emitted noise never occurs in the graph's
/// known-triple set. Output order: positives in input order, then noise.
pub fn inject_noise(
    kg: &KnowledgeGraph,
    train: &[Triple],
    spec: &NoiseSpec,
) -> Result<Vec<LabeledTriple>> {
    Ok(inject_noise_traced(kg, train, spec)?.0)
}

/// As [`inject_noise`], additionally reporting which position (head = true)
/// each emitted noise triple was corrupted at.
pub fn inject_noise_traced(
    kg: &KnowledgeGraph,
    train: &[Triple],
    spec: &NoiseSpec,
) -> Result<(Vec<LabeledTriple>, Vec<bool>)> {
    let requested = (spec.noise_ratio * train.len() as f64).round() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let mut out: Vec<LabeledTriple> = train
        .iter()
        .map(|&t| LabeledTriple {
            triple: t,
            label: Label::Positive,
        })
        .collect();
    let mut positions = Vec::with_capacity(requested);
    if requested == 0 {
        return Ok((out, positions));
    }

    let mut generated: HashSet<Triple> = HashSet::with_capacity(requested);
    for produced in 0..requested {
        match corrupt_one(kg, train, &generated, &mut rng) {
            Some((noise, at_head)) => {
                generated.insert(noise);
                positions.push(at_head);
                out.push(LabeledTriple {
                    triple: noise,
                    label: Label::Noise,
                });
            }
            None => {
                return Err(CkrlError::NoiseExhausted {
                    requested,
                    achieved: produced,
                });
            }
        }
    }
    Ok((out, positions))
}

/// One negative per positive, by the same corruption mechanics; used to build
/// labeled validation/test sets for triple classification.
pub fn generate_classification_negatives(
    kg: &KnowledgeGraph,
    positives: &[Triple],
    seed: u64,
) -> Result<Vec<LabeledTriple>> {
    inject_noise(
        kg,
        positives,
        &NoiseSpec {
            noise_ratio: 1.0,
            rng_seed: seed,
        },
    )
}

fn corrupt_one(
    kg: &KnowledgeGraph,
    train: &[Triple],
    already: &HashSet<Triple>,
    rng: &mut ChaCha8Rng,
) -> Option<(Triple, bool)> {
    for _ in 0..RETRY_BUDGET {
        let seed_triple = train[rng.random_range(0..train.len())];
        let corrupt_head = rng.random_range(0..2u8) == 0;
        let (domain, keep) = if corrupt_head {
            (kg.head_domain(seed_triple.relation), seed_triple.head)
        } else {
            (kg.tail_domain(seed_triple.relation), seed_triple.tail)
        };
        if domain.len() < 2 {
            log::warn!(
                "skipping seed triple {seed_triple}: single-entity {} domain",
                if corrupt_head { "head" } else { "tail" }
            );
            continue;
        }
        let Some(replacement) = sample_excluding(domain, keep, rng) else {
            continue;
        };
        let candidate = if corrupt_head {
            Triple::new(replacement, seed_triple.relation, seed_triple.tail)
        } else {
            Triple::new(seed_triple.head, seed_triple.relation, replacement)
        };
        if kg.contains(candidate) || already.contains(&candidate) {
            continue;
        }
        return Some((candidate, corrupt_head));
    }
    None
}

/// Uniform draw from a sorted domain minus one excluded entity.
fn sample_excluding(domain: &[EntityId], excluded: EntityId, rng: &mut ChaCha8Rng) -> Option<EntityId> {
    match domain.binary_search(&excluded) {
        Ok(pos) => {
            if domain.len() < 2 {
                return None;
            }
            let idx = rng.random_range(0..domain.len() - 1);
            Some(if idx >= pos { domain[idx + 1] } else { domain[idx] })
        }
        // Excluded entity not in this domain (possible when corrupting
        // validation/test triples): the whole domain is fair game.
        Err(_) => Some(domain[rng.random_range(0..domain.len())]),
    }
}

/// Writes `head⇥relation⇥tail⇥label` lines with label 1 or -1.
pub fn write_labeled_tsv<W: Write>(
    mut w: W,
    kg: &KnowledgeGraph,
    labeled: &[LabeledTriple],
) -> std::io::Result<()> {
    for lt in labeled {
        let h = kg.entities().name(lt.triple.head);
        let r = kg.relations().name(lt.triple.relation);
        let t = kg.entities().name(lt.triple.tail);
        let label = match lt.label {
            Label::Positive => 1,
            Label::Noise => -1,
        };
        writeln!(w, "{h}\t{r}\t{t}\t{label}")?;
    }
    Ok(())
}

/// Reads a `head⇥relation⇥tail⇥label` file against an existing vocabulary.
pub fn read_labeled_tsv<R: BufRead>(
    reader: R,
    kg: &KnowledgeGraph,
    path: &Path,
) -> Result<Vec<LabeledTriple>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| CkrlError::io(path, e))?;
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 4 {
            return Err(CkrlError::Parse {
                path: path.to_owned(),
                line: lineno,
                msg: format!("expected 4 tab-separated fields, found {}", fields.len()),
            });
        }
        let miss = |token: &str| CkrlError::UnknownToken {
            path: path.to_owned(),
            line: lineno,
            token: token.to_owned(),
        };
        let triple = Triple {
            head: kg.entities().get(fields[0]).ok_or_else(|| miss(fields[0]))?,
            relation: kg
                .relations()
                .get(fields[1])
                .ok_or_else(|| miss(fields[1]))?,
            tail: kg.entities().get(fields[2]).ok_or_else(|| miss(fields[2]))?,
        };
        let label = match fields[3] {
            "1" => Label::Positive,
            "-1" => Label::Noise,
            other => {
                return Err(CkrlError::Parse {
                    path: path.to_owned(),
                    line: lineno,
                    msg: format!("bad label {other:?} (expected 1 or -1)"),
                });
            }
        };
        out.push(LabeledTriple { triple, label });
    }
    if out.is_empty() {
        return Err(CkrlError::EmptyInput {
            path: path.to_owned(),
        });
    }
    Ok(out)
}
