//! Evaluation protocols: noise detection by energy ranking, entity prediction
//! (mean rank / Hits@10, raw and filtered), and triple classification with
//! per-relation thresholds.

use std::collections::BTreeMap;
use std::collections::HashMap;
use std::io::Write;

use rayon::prelude::*;

use crate::error::{CkrlError, Result};
use crate::kg::{KnowledgeGraph, RelationId, Triple};
use crate::noise::{Label, LabeledTriple};
use crate::trainer::EmbeddingModel;

/// One precision/recall sample, recorded at the rank of a true noise triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrPoint {
    /// 1-based position in the energy-descending ranking.
    pub rank: usize,
    pub recall: f64,
    pub precision: f64,
}

/// Precision/recall curve over an energy-ranked training set.
#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    pub points: Vec<PrPoint>,
    /// Average precision over the noise positions.
    pub auc: f64,
}

impl PrCurve {
    /// Precision at the first point whose recall reaches `recall`.
    pub fn precision_at(&self, recall: f64) -> f64 {
        self.points
            .iter()
            .find(|p| p.recall + 1e-12 >= recall)
            .map(|p| p.precision)
            .unwrap_or(0.0)
    }

    /// Precision at recall 0.1, 0.2, …, 0.9.
    pub fn precision_at_decades(&self) -> Vec<(f64, f64)> {
        (1..=9)
            .map(|i| {
                let r = i as f64 / 10.0;
                (r, self.precision_at(r))
            })
            .collect()
    }

    /// Writes `rank,recall,precision` CSV.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "rank,recall,precision")?;
        for p in &self.points {
            writeln!(w, "{},{},{}", p.rank, p.recall, p.precision)?;
        }
        Ok(())
    }
}

/// Ranks the labeled training triples by energy (highest first, ties broken
/// by input order) and sweeps the ranking: triples ranked earlier are
/// predicted to be noise.
pub fn detect_noise(model: &EmbeddingModel, labeled: &[LabeledTriple]) -> Result<PrCurve> {
    let total_noise = labeled.iter().filter(|lt| lt.label == Label::Noise).count();
    if total_noise == 0 {
        return Err(CkrlError::NoNoiseLabeled);
    }
    let energies: Vec<f64> = labeled
        .par_iter()
        .map(|lt| model.energy(lt.triple))
        .collect();
    let mut ranking: Vec<usize> = (0..labeled.len()).collect();
    // Stable sort keeps input order among equal energies.
    ranking.sort_by(|&a, &b| energies[b].partial_cmp(&energies[a]).unwrap());

    let mut points = Vec::with_capacity(total_noise);
    let mut noise_seen = 0usize;
    let mut precision_sum = 0.0;
    for (pos, &idx) in ranking.iter().enumerate() {
        if labeled[idx].label == Label::Noise {
            noise_seen += 1;
            let rank = pos + 1;
            let precision = noise_seen as f64 / rank as f64;
            points.push(PrPoint {
                rank,
                recall: noise_seen as f64 / total_noise as f64,
                precision,
            });
            precision_sum += precision;
        }
    }
    Ok(PrCurve {
        auc: precision_sum / total_noise as f64,
        points,
    })
}

/// Mean rank and Hits@10 under the raw and filtered protocols.
#[derive(Debug, Clone, PartialEq)]
pub struct RankingReport {
    pub mean_rank_raw: f64,
    pub mean_rank_filtered: f64,
    pub hits10_raw: f64,
    pub hits10_filtered: f64,
    pub query_count: usize,
    /// `(raw, filtered)` per query: head query then tail query per triple.
    pub per_query: Vec<(usize, usize)>,
}

impl RankingReport {
    fn from_ranks(per_query: Vec<(usize, usize)>) -> RankingReport {
        let n = per_query.len() as f64;
        let hits = |f: &dyn Fn(&(usize, usize)) -> usize| {
            per_query.iter().filter(|q| f(q) <= 10).count() as f64 / n
        };
        RankingReport {
            mean_rank_raw: per_query.iter().map(|q| q.0 as f64).sum::<f64>() / n,
            mean_rank_filtered: per_query.iter().map(|q| q.1 as f64).sum::<f64>() / n,
            hits10_raw: hits(&|q| q.0),
            hits10_filtered: hits(&|q| q.1),
            query_count: per_query.len(),
            per_query,
        }
    }

    /// Flat key/value view for the report file.
    pub fn to_flat_json(&self, prefix: &str) -> BTreeMap<String, serde_json::Value> {
        let mut m = BTreeMap::new();
        m.insert(format!("{prefix}mean_rank_raw"), self.mean_rank_raw.into());
        m.insert(
            format!("{prefix}mean_rank_filtered"),
            self.mean_rank_filtered.into(),
        );
        m.insert(format!("{prefix}hits10_raw"), self.hits10_raw.into());
        m.insert(
            format!("{prefix}hits10_filtered"),
            self.hits10_filtered.into(),
        );
        m.insert(
            format!("{prefix}query_count"),
            (self.query_count as u64).into(),
        );
        m
    }
}

/// Entity prediction: for each test triple, the true head is ranked against
/// every entity by `E(·, r, t)` ascending, and likewise the true tail. The
/// filtered rank skips candidates that form a known triple other than the
/// query itself.
pub fn entity_prediction(
    model: &EmbeddingModel,
    test: &[Triple],
    kg: &KnowledgeGraph,
) -> Result<RankingReport> {
    for &t in test {
        kg.check_ids(t)?;
    }
    let per_query: Vec<(usize, usize)> = test
        .par_iter()
        .flat_map_iter(|&t| {
            let head_query = rank_entity_query(model, kg, t, true);
            let tail_query = rank_entity_query(model, kg, t, false);
            [head_query, tail_query]
        })
        .collect();
    Ok(RankingReport::from_ranks(per_query))
}

fn rank_entity_query(
    model: &EmbeddingModel,
    kg: &KnowledgeGraph,
    query: Triple,
    replace_head: bool,
) -> (usize, usize) {
    let true_id = if replace_head { query.head } else { query.tail };
    let true_energy = model.energy(query);
    let mut raw = 1usize;
    let mut filtered = 1usize;
    for e in 0..kg.num_entities() as u32 {
        if e == true_id {
            continue;
        }
        let candidate = if replace_head {
            Triple::new(e, query.relation, query.tail)
        } else {
            Triple::new(query.head, query.relation, e)
        };
        if model.energy(candidate) < true_energy {
            raw += 1;
            if !kg.contains(candidate) {
                filtered += 1;
            }
        }
    }
    (raw, filtered)
}

/// Relation prediction, same protocol over the relation vocabulary. Reported
/// as an optional extra.
pub fn relation_prediction(
    model: &EmbeddingModel,
    test: &[Triple],
    kg: &KnowledgeGraph,
) -> Result<RankingReport> {
    for &t in test {
        kg.check_ids(t)?;
    }
    let per_query: Vec<(usize, usize)> = test
        .par_iter()
        .map(|&t| {
            let true_energy = model.energy(t);
            let mut raw = 1usize;
            let mut filtered = 1usize;
            for r in 0..kg.num_relations() as u32 {
                if r == t.relation {
                    continue;
                }
                let candidate = Triple::new(t.head, r, t.tail);
                if model.energy(candidate) < true_energy {
                    raw += 1;
                    if !kg.contains(candidate) {
                        filtered += 1;
                    }
                }
            }
            (raw, filtered)
        })
        .collect();
    Ok(RankingReport::from_ranks(per_query))
}

/// Per-relation classification thresholds plus a fallback for relations
/// absent from the validation set.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierThresholds {
    pub per_relation: HashMap<RelationId, f64>,
    pub global_fallback: f64,
}

impl ClassifierThresholds {
    pub fn threshold_for(&self, r: RelationId) -> f64 {
        self.per_relation
            .get(&r)
            .copied()
            .unwrap_or(self.global_fallback)
    }
}

/// Fits a threshold per relation by maximizing validation accuracy over all
/// cut points (midpoints of consecutive distinct energies plus ±∞ sentinels);
/// ties go to the smallest threshold.
pub fn fit_thresholds(
    model: &EmbeddingModel,
    valid: &[LabeledTriple],
) -> Result<ClassifierThresholds> {
    let scored: Vec<(RelationId, f64, Label)> = valid
        .par_iter()
        .map(|lt| (lt.triple.relation, model.energy(lt.triple), lt.label))
        .collect();
    fit_thresholds_from_scores(&scored)
}

/// Threshold fitting on precomputed `(relation, energy, label)` rows.
pub fn fit_thresholds_from_scores(
    scored: &[(RelationId, f64, Label)],
) -> Result<ClassifierThresholds> {
    if scored.is_empty() {
        return Err(CkrlError::EmptyValidation);
    }
    let mut by_relation: BTreeMap<RelationId, Vec<(f64, Label)>> = BTreeMap::new();
    let mut pooled = Vec::with_capacity(scored.len());
    for &(r, e, label) in scored {
        by_relation.entry(r).or_default().push((e, label));
        pooled.push((e, label));
    }
    let per_relation = by_relation
        .into_iter()
        .map(|(r, rows)| (r, best_threshold(&rows)))
        .collect();
    Ok(ClassifierThresholds {
        per_relation,
        global_fallback: best_threshold(&pooled),
    })
}

/// Accuracy of the rule `energy < threshold → positive` on the given rows.
fn threshold_accuracy(rows: &[(f64, Label)], threshold: f64) -> f64 {
    let correct = rows
        .iter()
        .filter(|(e, label)| (*e < threshold) == (*label == Label::Positive))
        .count();
    correct as f64 / rows.len() as f64
}

fn best_threshold(rows: &[(f64, Label)]) -> f64 {
    let mut energies: Vec<f64> = rows.iter().map(|(e, _)| *e).collect();
    energies.sort_by(|a, b| a.partial_cmp(b).unwrap());
    energies.dedup();
    let mut candidates = Vec::with_capacity(energies.len() + 1);
    candidates.push(f64::NEG_INFINITY);
    for pair in energies.windows(2) {
        candidates.push((pair[0] + pair[1]) / 2.0);
    }
    candidates.push(f64::INFINITY);

    let mut best = candidates[0];
    let mut best_acc = threshold_accuracy(rows, best);
    for &cut in &candidates[1..] {
        let acc = threshold_accuracy(rows, cut);
        if acc > best_acc {
            best = cut;
            best_acc = acc;
        }
    }
    best
}

/// Mean accuracy of the fitted thresholds on a labeled test set. A triple is
/// positive iff its energy is strictly below its relation's threshold.
pub fn classify(
    model: &EmbeddingModel,
    thresholds: &ClassifierThresholds,
    test: &[LabeledTriple],
) -> f64 {
    if test.is_empty() {
        return 0.0;
    }
    let correct = test
        .par_iter()
        .filter(|lt| {
            let predicted_positive =
                model.energy(lt.triple) < thresholds.threshold_for(lt.triple.relation);
            predicted_positive == (lt.label == Label::Positive)
        })
        .count();
    correct as f64 / test.len() as f64
}

/// Writes a flat JSON object with sorted keys.
pub fn write_report_json<W: Write>(
    mut w: W,
    entries: &BTreeMap<String, serde_json::Value>,
) -> std::io::Result<()> {
    let object = serde_json::Value::Object(entries.clone().into_iter().collect());
    writeln!(w, "{}", serde_json::to_string_pretty(&object)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::Vocab;
    use crate::trainer::{Checkpoint, Norm, Variant};
    use approx::assert_relative_eq;

    /// Model whose energies are controlled directly: entities on a line, one
    /// zero relation, so E((i, 0, j)) = |x_i - x_j| in L1.
    fn line_model(xs: &[f64]) -> EmbeddingModel {
        let mut model = EmbeddingModel::zeros(xs.len(), 1, 1, Norm::L1);
        for (i, &x) in xs.iter().enumerate() {
            model.entity_mut(i as u32)[0] = x;
        }
        model
    }

    fn labeled(triple: Triple, noise: bool) -> LabeledTriple {
        LabeledTriple {
            triple,
            label: if noise { Label::Noise } else { Label::Positive },
        }
    }

    #[test]
    fn perfect_separation_gives_unit_precision_everywhere() {
        // Noise triples span larger gaps → larger energies.
        let model = line_model(&[0.0, 0.1, 5.0, 9.0]);
        let data = vec![
            labeled(Triple::new(0, 0, 1), false), // E = 0.1
            labeled(Triple::new(0, 0, 2), true),  // E = 5.0
            labeled(Triple::new(0, 0, 3), true),  // E = 9.0
        ];
        let curve = detect_noise(&model, &data).unwrap();
        assert!(curve.points.iter().all(|p| p.precision == 1.0));
        assert_relative_eq!(curve.auc, 1.0);
        assert_relative_eq!(curve.precision_at(0.5), 1.0);
    }

    #[test]
    fn random_scores_give_precision_near_noise_rate() {
        // 5000 triples, 10% noise, energies decorrelated from labels.
        let n = 5000usize;
        let mut xs = vec![0.0f64];
        let mut state = 1u64;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..n {
            xs.push(next() * 100.0);
        }
        let model = line_model(&xs);
        let data: Vec<LabeledTriple> = (1..=n)
            .map(|i| labeled(Triple::new(0, 0, i as u32), next() < 0.1))
            .collect();
        let noise_rate =
            data.iter().filter(|lt| lt.label == Label::Noise).count() as f64 / n as f64;
        let curve = detect_noise(&model, &data).unwrap();
        for (_, precision) in curve.precision_at_decades() {
            assert!(
                (precision - noise_rate).abs() < 0.05,
                "precision {precision} vs rate {noise_rate}"
            );
        }
        assert!((curve.auc - noise_rate).abs() < 0.05);
    }

    #[test]
    fn hand_traced_pr_points() {
        // Energies descending: t3 (9, noise), t2 (5, clean), t1 (3, noise),
        // t4 (2, clean), ..., t5 (1, noise) among 10 triples.
        let model = line_model(&[0.0, 9.0, 5.0, 3.0, 2.0, 1.0, 0.9, 0.8, 0.7, 0.6, 0.5]);
        let mut data = vec![
            labeled(Triple::new(0, 0, 1), true),
            labeled(Triple::new(0, 0, 2), false),
            labeled(Triple::new(0, 0, 3), true),
            labeled(Triple::new(0, 0, 4), false),
            labeled(Triple::new(0, 0, 5), true),
        ];
        for i in 6..=10 {
            data.push(labeled(Triple::new(0, 0, i), false));
        }
        let curve = detect_noise(&model, &data).unwrap();
        // Noise at ranks 1, 3, 5 → (recall, precision) = (1/3, 1), (2/3, 2/3), (1, 3/5).
        assert_eq!(curve.points.len(), 3);
        assert_eq!(curve.points[0].rank, 1);
        assert_relative_eq!(curve.points[0].precision, 1.0);
        assert_relative_eq!(curve.points[0].recall, 1.0 / 3.0);
        assert_eq!(curve.points[1].rank, 3);
        assert_relative_eq!(curve.points[1].precision, 2.0 / 3.0);
        assert_eq!(curve.points[2].rank, 5);
        assert_relative_eq!(curve.points[2].precision, 3.0 / 5.0);
        assert_relative_eq!(curve.auc, (1.0 + 2.0 / 3.0 + 0.6) / 3.0);
    }

    #[test]
    fn precision_two_definitions_agree() {
        let model = line_model(&[0.0, 4.0, 3.0, 2.5, 2.0, 1.0, 0.5]);
        let data: Vec<LabeledTriple> = (1..=6)
            .map(|i| labeled(Triple::new(0, 0, i), i % 2 == 0))
            .collect();
        let curve = detect_noise(&model, &data).unwrap();
        // Direct definition at each cut: recount noise among the top-k by
        // re-sorting energies.
        let mut by_energy: Vec<&LabeledTriple> = data.iter().collect();
        by_energy.sort_by(|a, b| {
            model
                .energy(b.triple)
                .partial_cmp(&model.energy(a.triple))
                .unwrap()
        });
        for p in &curve.points {
            let noise_in_top = by_energy[..p.rank]
                .iter()
                .filter(|lt| lt.label == Label::Noise)
                .count();
            assert_eq!(p.precision, noise_in_top as f64 / p.rank as f64);
        }
    }

    #[test]
    fn zero_noise_is_an_error() {
        let model = line_model(&[0.0, 1.0]);
        let data = vec![labeled(Triple::new(0, 0, 1), false)];
        assert!(matches!(
            detect_noise(&model, &data),
            Err(CkrlError::NoNoiseLabeled)
        ));
    }

    fn graph_of(train: &[Triple], ne: usize, nr: usize, extra: &[&[Triple]]) -> KnowledgeGraph {
        let mut entities = Vocab::new();
        let mut relations = Vocab::new();
        for i in 0..ne {
            entities.intern(&format!("e{i}"));
        }
        for i in 0..nr {
            relations.intern(&format!("r{i}"));
        }
        KnowledgeGraph::build(entities, relations, train, extra)
    }

    #[test]
    fn two_entity_prediction_is_rank_one() {
        // Entities at 0 and 1 with relation vector 1: the true entity has
        // strictly lowest energy for both query directions.
        let mut model = EmbeddingModel::zeros(2, 1, 1, Norm::L1);
        model.entity_mut(1)[0] = 1.0;
        model.relation_mut(0)[0] = 1.0;
        let kg = graph_of(&[Triple::new(0, 0, 1)], 2, 1, &[]);
        let report = entity_prediction(&model, &[Triple::new(0, 0, 1)], &kg).unwrap();
        assert_eq!(report.query_count, 2);
        assert_eq!(report.mean_rank_raw, 1.0);
        assert_eq!(report.hits10_raw, 1.0);
        assert_eq!(report.hits10_filtered, 1.0);
    }

    /// Brute-force oracle: recompute each query by fully scoring and sorting
    /// all candidates.
    fn oracle_ranks(
        model: &EmbeddingModel,
        kg: &KnowledgeGraph,
        t: Triple,
        replace_head: bool,
    ) -> (usize, usize) {
        let ne = kg.num_entities() as u32;
        let make = |e: u32| {
            if replace_head {
                Triple::new(e, t.relation, t.tail)
            } else {
                Triple::new(t.head, t.relation, e)
            }
        };
        let true_id = if replace_head { t.head } else { t.tail };
        let mut scored: Vec<(f64, u32)> = (0..ne).map(|e| (model.energy(make(e)), e)).collect();
        scored.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let true_energy = model.energy(t);
        let raw = 1 + scored
            .iter()
            .filter(|(s, e)| *e != true_id && *s < true_energy)
            .count();
        let filtered = 1 + scored
            .iter()
            .filter(|(s, e)| *e != true_id && *s < true_energy && !kg.contains(make(*e)))
            .count();
        (raw, filtered)
    }

    #[test]
    fn twenty_entity_ranks_match_full_rescoring_oracle() {
        let mut xs = Vec::new();
        let mut state = 77u64;
        for _ in 0..20 {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            xs.push((state >> 40) as f64 / 1e4);
        }
        let model = line_model(&xs);
        let mut train = Vec::new();
        for i in 0..20u32 {
            train.push(Triple::new(i, 0, (i + 3) % 20));
        }
        let test: Vec<Triple> = (0..20u32).map(|i| Triple::new(i, 0, (i + 7) % 20)).collect();
        let kg = graph_of(&train, 20, 1, &[&test]);
        let report = entity_prediction(&model, &test, &kg).unwrap();
        let mut expected = Vec::new();
        for &t in &test {
            expected.push(oracle_ranks(&model, &kg, t, true));
            expected.push(oracle_ranks(&model, &kg, t, false));
        }
        assert_eq!(report.per_query, expected);
        for (raw, filtered) in &report.per_query {
            assert!(filtered <= raw, "filtered {filtered} > raw {raw}");
        }
        assert!(report.mean_rank_filtered <= report.mean_rank_raw);
        assert!(report.hits10_filtered >= report.hits10_raw);
    }

    #[test]
    fn out_of_vocab_test_triple_is_an_error() {
        let model = line_model(&[0.0, 1.0]);
        let kg = graph_of(&[Triple::new(0, 0, 1)], 2, 1, &[]);
        let err = entity_prediction(&model, &[Triple::new(0, 0, 9)], &kg).unwrap_err();
        assert!(matches!(err, CkrlError::IdOutOfRange { .. }));
    }

    #[test]
    fn separable_energies_fit_the_midpoint() {
        // Positives at energies {1, 2}, negatives at {3, 4} → midpoint 2.5.
        let rows = vec![
            (0u32, 1.0, Label::Positive),
            (0, 2.0, Label::Positive),
            (0, 3.0, Label::Noise),
            (0, 4.0, Label::Noise),
        ];
        let thresholds = fit_thresholds_from_scores(&rows).unwrap();
        assert_eq!(thresholds.threshold_for(0), 2.5);
    }

    #[test]
    fn all_positive_relation_gets_infinite_threshold() {
        let rows = vec![
            (0u32, 1.0, Label::Positive),
            (0, 5.0, Label::Positive),
            (1, 1.0, Label::Positive),
            (1, 2.0, Label::Noise),
        ];
        let thresholds = fit_thresholds_from_scores(&rows).unwrap();
        assert_eq!(thresholds.threshold_for(0), f64::INFINITY);
        assert_eq!(thresholds.threshold_for(1), 1.5);
    }

    #[test]
    fn unseen_relation_falls_back_to_pooled_threshold() {
        let rows = vec![
            (0u32, 1.0, Label::Positive),
            (0, 3.0, Label::Noise),
        ];
        let thresholds = fit_thresholds_from_scores(&rows).unwrap();
        assert_eq!(thresholds.threshold_for(42), thresholds.global_fallback);
        assert_eq!(thresholds.global_fallback, 2.0);
    }

    #[test]
    fn empty_validation_is_an_error() {
        assert!(matches!(
            fit_thresholds_from_scores(&[]),
            Err(CkrlError::EmptyValidation)
        ));
    }

    #[test]
    fn fitted_accuracy_matches_exhaustive_sweep() {
        // Random labeled rows; the oracle tries every candidate by rescan.
        let mut state = 5u64;
        let mut next = || {
            state = state
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..50 {
            let rows: Vec<(RelationId, f64, Label)> = (0..30)
                .map(|_| {
                    let r = (next() * 3.0) as u32;
                    let e = next() * 10.0;
                    let label = if next() < 0.5 {
                        Label::Positive
                    } else {
                        Label::Noise
                    };
                    (r, e, label)
                })
                .collect();
            let fitted = fit_thresholds_from_scores(&rows).unwrap();
            let mut by_relation: HashMap<RelationId, Vec<(f64, Label)>> = HashMap::new();
            for &(r, e, l) in &rows {
                by_relation.entry(r).or_default().push((e, l));
            }
            for (r, rel_rows) in by_relation {
                let fitted_acc = threshold_accuracy(&rel_rows, fitted.threshold_for(r));
                // Oracle: scan a fine grid plus the exact energies ± eps.
                let mut best = 0.0f64;
                let mut grid: Vec<f64> = rel_rows.iter().map(|(e, _)| *e - 1e-9).collect();
                grid.extend(rel_rows.iter().map(|(e, _)| *e + 1e-9));
                grid.push(f64::NEG_INFINITY);
                grid.push(f64::INFINITY);
                for cut in grid {
                    best = best.max(threshold_accuracy(&rel_rows, cut));
                }
                assert_eq!(fitted_acc, best, "relation {r}");
            }
        }
    }

    #[test]
    fn energy_equal_to_threshold_classifies_negative() {
        let model = line_model(&[0.0, 2.0]);
        let thresholds = ClassifierThresholds {
            per_relation: HashMap::from([(0u32, 2.0)]),
            global_fallback: 2.0,
        };
        // E = 2.0 exactly → strict `<` fails → predicted negative.
        let as_noise = vec![labeled(Triple::new(0, 0, 1), true)];
        assert_eq!(classify(&model, &thresholds, &as_noise), 1.0);
        let as_positive = vec![labeled(Triple::new(0, 0, 1), false)];
        assert_eq!(classify(&model, &thresholds, &as_positive), 0.0);
    }

    #[test]
    fn separable_sets_classify_perfectly() {
        let model = line_model(&[0.0, 1.0, 2.0, 6.0, 8.0]);
        let valid = vec![
            labeled(Triple::new(0, 0, 1), false),
            labeled(Triple::new(0, 0, 2), false),
            labeled(Triple::new(0, 0, 3), true),
            labeled(Triple::new(0, 0, 4), true),
        ];
        let thresholds = fit_thresholds(&model, &valid).unwrap();
        let test = vec![
            labeled(Triple::new(1, 0, 2), false), // E = 1
            labeled(Triple::new(1, 0, 4), true),  // E = 7
        ];
        assert_eq!(classify(&model, &thresholds, &test), 1.0);
    }

    #[test]
    fn hand_built_six_triple_classification() {
        let model = line_model(&[0.0, 1.0, 3.0, 5.0, 7.0, 9.0, 11.0]);
        let thresholds = ClassifierThresholds {
            per_relation: HashMap::from([(0u32, 4.0)]),
            global_fallback: 4.0,
        };
        // Energies: 1, 3, 5, 7, 9, 11. Predicted positive: first two.
        let test = vec![
            labeled(Triple::new(0, 0, 1), false), // E=1, pred pos, correct
            labeled(Triple::new(0, 0, 2), true),  // E=3, pred pos, wrong
            labeled(Triple::new(0, 0, 3), false), // E=5, pred neg, wrong
            labeled(Triple::new(0, 0, 4), true),  // E=7, pred neg, correct
            labeled(Triple::new(0, 0, 5), true),  // E=9, pred neg, correct
            labeled(Triple::new(0, 0, 6), true),  // E=11, pred neg, correct
        ];
        assert_relative_eq!(classify(&model, &thresholds, &test), 4.0 / 6.0);
    }

    #[test]
    fn threshold_fit_is_invariant_to_monotone_rescaling() {
        let rows: Vec<(RelationId, f64, Label)> = vec![
            (0u32, 1.0, Label::Positive),
            (0, 2.5, Label::Noise),
            (0, 2.0, Label::Positive),
            (0, 4.0, Label::Noise),
            (1, 0.5, Label::Positive),
            (1, 3.0, Label::Noise),
        ];
        let rescaled: Vec<(RelationId, f64, Label)> = rows
            .iter()
            .map(|&(r, e, l)| (r, (e * 1.7).exp(), l))
            .collect();
        let base = fit_thresholds_from_scores(&rows).unwrap();
        let scaled = fit_thresholds_from_scores(&rescaled).unwrap();
        for r in [0u32, 1] {
            let rel_rows: Vec<(f64, Label)> = rows
                .iter()
                .filter(|(rr, _, _)| *rr == r)
                .map(|&(_, e, l)| (e, l))
                .collect();
            let rel_rescaled: Vec<(f64, Label)> = rescaled
                .iter()
                .filter(|(rr, _, _)| *rr == r)
                .map(|&(_, e, l)| (e, l))
                .collect();
            assert_eq!(
                threshold_accuracy(&rel_rows, base.threshold_for(r)),
                threshold_accuracy(&rel_rescaled, scaled.threshold_for(r)),
                "relation {r}"
            );
        }
    }

    #[test]
    fn evaluation_leaves_model_bytes_unchanged() {
        let model = line_model(&[0.0, 1.0, 2.0, 3.0]);
        let kg = graph_of(&[Triple::new(0, 0, 1), Triple::new(1, 0, 2)], 4, 1, &[]);
        let lt = crate::confidence::LocalConfidenceTable::new(kg.triples());
        let snapshot = |m: &EmbeddingModel| {
            let mut buf = Vec::new();
            Checkpoint::write(&mut buf, m, Variant::TransE, &lt).unwrap();
            buf
        };
        let before = snapshot(&model);
        let data = vec![
            labeled(Triple::new(0, 0, 1), false),
            labeled(Triple::new(0, 0, 3), true),
        ];
        detect_noise(&model, &data).unwrap();
        entity_prediction(&model, &[Triple::new(0, 0, 1)], &kg).unwrap();
        let thresholds = fit_thresholds(&model, &data).unwrap();
        classify(&model, &thresholds, &data);
        assert_eq!(snapshot(&model), before);
    }
}
