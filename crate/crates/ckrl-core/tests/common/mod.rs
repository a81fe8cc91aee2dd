//! Shared fixtures for the integration and acceptance suites.

#![allow(dead_code)]

use ckrl_core::kg::{KnowledgeGraph, Triple, Vocab};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ContinuousCDF, Normal};
use std::collections::HashSet;

pub fn vocabs(ne: usize, nr: usize) -> (Vocab, Vocab) {
    let mut entities = Vocab::new();
    let mut relations = Vocab::new();
    for i in 0..ne {
        entities.intern(&format!("/m/{i:04}"));
    }
    for i in 0..nr {
        relations.intern(&format!("/rel/{i}"));
    }
    (entities, relations)
}

pub fn graph_of(train: &[Triple], ne: usize, nr: usize, extra: &[&[Triple]]) -> KnowledgeGraph {
    let (entities, relations) = vocabs(ne, nr);
    KnowledgeGraph::build(entities, relations, train, extra)
}

/// Uniformly random triples (duplicates possible), for structure-free oracles.
pub fn random_triples(ne: u32, nr: u32, count: usize, seed: u64) -> Vec<Triple> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            Triple::new(
                rng.random_range(0..ne),
                rng.random_range(0..nr),
                rng.random_range(0..ne),
            )
        })
        .collect()
}

/// A triple set consistent with a translation geometry: entities get latent
/// unit vectors, relations get latent offsets, and each generated triple's
/// tail is one of the entities nearest to `z_h + v_r`. Margin training can
/// drive such a set to low energy, so injected domain-respecting noise stands
/// out.
pub fn learnable_triples(ne: usize, nr: usize, count: usize, seed: u64) -> Vec<Triple> {
    let latent = 8usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let unit = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        let v: Vec<f64> = (0..latent).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt().max(1e-9);
        v.into_iter().map(|x| x / n).collect()
    };
    let entity_z: Vec<Vec<f64>> = (0..ne).map(|_| unit(&mut rng)).collect();
    let relation_z: Vec<Vec<f64>> = (0..nr)
        .map(|_| {
            let v = unit(&mut rng);
            v.into_iter().map(|x| x * 0.8).collect::<Vec<f64>>()
        })
        .collect();

    let mut seen: HashSet<Triple> = HashSet::with_capacity(count);
    let mut out = Vec::with_capacity(count);
    let mut stale = 0usize;
    while out.len() < count && stale < 50 * count {
        let h = rng.random_range(0..ne);
        let r = rng.random_range(0..nr);
        let target: Vec<f64> = (0..latent)
            .map(|k| entity_z[h][k] + relation_z[r][k])
            .collect();
        // Nearest three entities to the translated point; sample one.
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(4);
        for (e, z) in entity_z.iter().enumerate() {
            let d: f64 = (0..latent).map(|k| (z[k] - target[k]).powi(2)).sum();
            best.push((d, e));
            if best.len() > 3 {
                best.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
                best.pop();
            }
        }
        let t = best[rng.random_range(0..best.len())].1;
        let triple = Triple::new(h as u32, r as u32, t as u32);
        if seen.insert(triple) {
            out.push(triple);
            stale = 0;
        } else {
            stale += 1;
        }
    }
    assert_eq!(out.len(), count, "generator stalled before reaching {count}");
    out
}

/// One-sided Mann–Whitney rank-sum p-value for the hypothesis that `smaller`
/// values are stochastically less than `larger` values, with tie correction
/// and normal approximation.
pub fn rank_sum_p_less(smaller: &[f64], larger: &[f64]) -> f64 {
    let n1 = smaller.len() as f64;
    let n2 = larger.len() as f64;
    assert!(n1 > 0.0 && n2 > 0.0);
    let mut all: Vec<(f64, bool)> = smaller
        .iter()
        .map(|&v| (v, true))
        .chain(larger.iter().map(|&v| (v, false)))
        .collect();
    all.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());

    let n = all.len();
    let mut rank_sum_smaller = 0.0;
    let mut tie_term = 0.0;
    let mut i = 0usize;
    while i < n {
        let mut j = i;
        while j < n && all[j].0 == all[i].0 {
            j += 1;
        }
        // Average rank for the tied block [i, j).
        let avg_rank = (i + 1 + j) as f64 / 2.0;
        let t = (j - i) as f64;
        tie_term += t * t * t - t;
        for item in &all[i..j] {
            if item.1 {
                rank_sum_smaller += avg_rank;
            }
        }
        i = j;
    }

    let u = rank_sum_smaller - n1 * (n1 + 1.0) / 2.0;
    let mean = n1 * n2 / 2.0;
    let nf = n as f64;
    let var = n1 * n2 / 12.0 * ((nf + 1.0) - tie_term / (nf * (nf - 1.0)));
    if var <= 0.0 {
        // All values tied: no evidence either way.
        return 0.5;
    }
    let z = (u - mean + 0.5) / var.sqrt();
    Normal::new(0.0, 1.0).unwrap().cdf(z)
}
