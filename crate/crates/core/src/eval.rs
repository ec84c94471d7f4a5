//! Filtered link-prediction ranking, metric aggregation and triple
//! classification.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::data::{Category, FilterIndex, RelationStats, Triple};
use crate::error::{Error, Result};
use crate::model::Scorer;
use crate::training::{sample_negative, BernoulliStats};

/// How candidates scoring exactly the same as the target are counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TiePolicy {
    /// Only strictly higher scores push the target down.
    #[default]
    Optimistic,
    /// Equal scores count against the target too.
    Pessimistic,
}

impl TiePolicy {
    #[inline]
    fn beats(self, candidate: f64, target: f64) -> bool {
        match self {
            TiePolicy::Optimistic => candidate > target,
            TiePolicy::Pessimistic => candidate >= target,
        }
    }
}

/// Filtered head and tail rank of one test triple, both in `1..=|E|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Ranking {
    pub triple: Triple,
    pub head: usize,
    pub tail: usize,
}

fn rank_in(
    scores: &[f64],
    target: u32,
    known: &[u32],
    ties: TiePolicy,
) -> usize {
    let s = scores[target as usize];
    let mut above = scores
        .iter()
        .enumerate()
        .filter(|&(e, &x)| e != target as usize && ties.beats(x, s))
        .count();
    for &e in known {
        if e != target && ties.beats(scores[e as usize], s) {
            above -= 1;
        }
    }
    above + 1
}

/// Ranks the true head and tail of `triple` among all entities. With a
/// filter, other known-true completions are skipped.
pub fn rank_triple(
    scorer: &Scorer<'_>,
    triple: Triple,
    filter: Option<&FilterIndex>,
    ties: TiePolicy,
) -> Result<Ranking> {
    let tails = scorer.tails(triple.head, triple.relation)?;
    let heads = scorer.heads(triple.relation, triple.tail)?;
    let (known_tails, known_heads) = match filter {
        Some(f) => (
            f.tails(triple.head, triple.relation),
            f.heads(triple.relation, triple.tail),
        ),
        None => (&[][..], &[][..]),
    };
    Ok(Ranking {
        triple,
        head: rank_in(&heads, triple.head, known_heads, ties),
        tail: rank_in(&tails, triple.tail, known_tails, ties),
    })
}

pub fn rank_split(
    scorer: &Scorer<'_>,
    triples: &[Triple],
    filter: Option<&FilterIndex>,
    ties: TiePolicy,
) -> Result<Vec<Ranking>> {
    triples
        .iter()
        .map(|&t| rank_triple(scorer, t, filter, ties))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub mr: f64,
    pub mrr: f64,
    pub hit1: f64,
    pub hit3: f64,
    pub hit10: f64,
    /// Number of ranks aggregated.
    pub count: usize,
}

impl Metrics {
    pub fn from_ranks<I: IntoIterator<Item = usize>>(ranks: I) -> Result<Self> {
        let mut n = 0usize;
        let (mut sum, mut rsum) = (0.0, 0.0);
        let mut hits = [0usize; 3];
        for r in ranks {
            n += 1;
            sum += r as f64;
            rsum += 1.0 / r as f64;
            for (h, cut) in hits.iter_mut().zip([1, 3, 10]) {
                if r <= cut {
                    *h += 1;
                }
            }
        }
        if n == 0 {
            return Err(Error::EmptySplit);
        }
        let n_f = n as f64;
        Ok(Self {
            mr: sum / n_f,
            mrr: rsum / n_f,
            hit1: hits[0] as f64 / n_f,
            hit3: hits[1] as f64 / n_f,
            hit10: hits[2] as f64 / n_f,
            count: n,
        })
    }

    /// Head and tail ranks each count as one sample.
    pub fn from_rankings(rankings: &[Ranking]) -> Result<Self> {
        Self::from_ranks(rankings.iter().flat_map(|r| [r.head, r.tail]))
    }
}

/// Metrics over both sides, and head-only / tail-only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SideMetrics {
    pub both: Metrics,
    pub head: Metrics,
    pub tail: Metrics,
}

impl SideMetrics {
    pub fn from_rankings(rankings: &[Ranking]) -> Result<Self> {
        Ok(Self {
            both: Metrics::from_rankings(rankings)?,
            head: Metrics::from_ranks(rankings.iter().map(|r| r.head))?,
            tail: Metrics::from_ranks(rankings.iter().map(|r| r.tail))?,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationReport {
    pub overall: SideMetrics,
    pub per_relation: BTreeMap<u32, SideMetrics>,
    /// Relations without training statistics are left out.
    pub per_category: BTreeMap<Category, SideMetrics>,
}

impl EvaluationReport {
    pub fn from_rankings(rankings: &[Ranking], stats: Option<&RelationStats>) -> Result<Self> {
        let overall = SideMetrics::from_rankings(rankings)?;
        let mut by_relation: BTreeMap<u32, Vec<Ranking>> = BTreeMap::new();
        let mut by_category: BTreeMap<Category, Vec<Ranking>> = BTreeMap::new();
        for r in rankings {
            by_relation.entry(r.triple.relation).or_default().push(*r);
            if let Some(cat) = stats.and_then(|s| s.category(r.triple.relation)) {
                by_category.entry(cat).or_default().push(*r);
            }
        }
        let per_relation = by_relation
            .into_iter()
            .map(|(rel, rs)| Ok((rel, SideMetrics::from_rankings(&rs)?)))
            .collect::<Result<_>>()?;
        let per_category = by_category
            .into_iter()
            .map(|(cat, rs)| Ok((cat, SideMetrics::from_rankings(&rs)?)))
            .collect::<Result<_>>()?;
        Ok(Self {
            overall,
            per_relation,
            per_category,
        })
    }
}

/// Ranks every triple in `split` and aggregates overall, per-relation and
/// per-category metrics.
pub fn evaluate(
    split: &[Triple],
    scorer: &Scorer<'_>,
    filter: &FilterIndex,
    stats: Option<&RelationStats>,
    ties: TiePolicy,
) -> Result<EvaluationReport> {
    if split.is_empty() {
        return Err(Error::EmptySplit);
    }
    let rankings = rank_split(scorer, split, Some(filter), ties)?;
    EvaluationReport::from_rankings(&rankings, stats)
}

/// Per-relation score thresholds; `score >= threshold` predicts true.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationModel {
    pub per_relation: BTreeMap<u32, f64>,
    pub global: f64,
}

impl ClassificationModel {
    pub fn threshold(&self, relation: u32) -> f64 {
        self.per_relation
            .get(&relation)
            .copied()
            .unwrap_or(self.global)
    }
}

/// Threshold maximizing accuracy over labeled scores, with that accuracy.
///
/// Candidates are one below the minimum, the midpoints between consecutive
/// distinct scores and one above the maximum; the lowest best candidate wins.
pub fn best_threshold(positives: &[f64], negatives: &[f64]) -> Option<(f64, f64)> {
    let mut labeled: Vec<(f64, bool)> = positives
        .iter()
        .map(|&s| (s, true))
        .chain(negatives.iter().map(|&s| (s, false)))
        .collect();
    if labeled.is_empty() {
        return None;
    }
    labeled.sort_by(|x, y| x.0.total_cmp(&y.0));
    let n = labeled.len();

    // Threshold below everything: all predicted positive.
    let mut correct = positives.len();
    let mut best = (labeled[0].0 - 1.0, correct);
    let mut i = 0;
    while i < n {
        let s = labeled[i].0;
        while i < n && labeled[i].0 == s {
            correct = if labeled[i].1 { correct - 1 } else { correct + 1 };
            i += 1;
        }
        let threshold = if i < n {
            (s + labeled[i].0) / 2.0
        } else {
            s + 1.0
        };
        if correct > best.1 {
            best = (threshold, correct);
        }
    }
    Some((best.0, best.1 as f64 / n as f64))
}

fn scores_of(scorer: &Scorer<'_>, triples: &[Triple]) -> Result<Vec<f64>> {
    triples.iter().map(|&t| scorer.score(t)).collect()
}

/// Learns one threshold per relation that has both positives and negatives
/// in validation, plus a global fallback.
pub fn learn_thresholds(
    valid_positives: &[Triple],
    valid_negatives: &[Triple],
    scorer: &Scorer<'_>,
) -> Result<ClassificationModel> {
    let pos = scores_of(scorer, valid_positives)?;
    let neg = scores_of(scorer, valid_negatives)?;
    let (global, _) = best_threshold(&pos, &neg).ok_or(Error::EmptySplit)?;

    let mut grouped: BTreeMap<u32, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for (t, s) in valid_positives.iter().zip(&pos) {
        grouped.entry(t.relation).or_default().0.push(*s);
    }
    for (t, s) in valid_negatives.iter().zip(&neg) {
        grouped.entry(t.relation).or_default().1.push(*s);
    }
    let per_relation = grouped
        .into_iter()
        .filter(|(_, (p, n))| !p.is_empty() && !n.is_empty())
        .filter_map(|(r, (p, n))| best_threshold(&p, &n).map(|(th, _)| (r, th)))
        .collect();
    Ok(ClassificationModel {
        per_relation,
        global,
    })
}

/// Fraction of correctly labeled triples.
pub fn classify(
    test_positives: &[Triple],
    test_negatives: &[Triple],
    model: &ClassificationModel,
    scorer: &Scorer<'_>,
) -> Result<f64> {
    let total = test_positives.len() + test_negatives.len();
    if total == 0 {
        return Err(Error::EmptySplit);
    }
    let mut correct = 0usize;
    for (triples, truth) in [(test_positives, true), (test_negatives, false)] {
        for &t in triples {
            let predicted = scorer.score(t)? >= model.threshold(t.relation);
            if predicted == truth {
                correct += 1;
            }
        }
    }
    Ok(correct as f64 / total as f64)
}

/// One Bernoulli-corrupted negative per positive, avoiding known triples.
pub fn corrupt_split(
    positives: &[Triple],
    stats: &BernoulliStats,
    filter: &FilterIndex,
    num_entities: usize,
    seed: u64,
) -> Vec<Triple> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    positives
        .iter()
        .map(|&t| sample_negative(t, stats, filter, num_entities, &mut rng))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{ModelParams, ModelVariant, Table};
    use alloc::vec;

    /// Scores `(0, 0, e)` are the `a` components of entity `e`; every other
    /// component is zero and W is the identity.
    fn scalar_model(tail_scores: &[f64]) -> ModelParams {
        let n = tail_scores.len();
        let mut entities = Table::zeros(n, 1);
        for (e, &s) in tail_scores.iter().enumerate() {
            entities.set(e, 0, crate::Quaternion::new(s, 0.0, 0.0, 0.0));
        }
        // entity 0 must carry a unit head so that (0, 0, e) scores exactly s_e
        entities.set(0, 0, crate::Quaternion::ONE);
        ModelParams::from_tables(
            1,
            entities,
            Table::identity(1, 1),
            Table::identity(n, 1),
            Table::identity(1, 1),
        )
        .unwrap()
    }

    #[test]
    fn four_candidate_table() {
        // Tail candidates 0..4 score {1 (head itself), 9, 7 (target), 8}.
        let p = scalar_model(&[1.0, 9.0, 7.0, 8.0]);
        let scorer = Scorer::new(&p, ModelVariant::QuatE).unwrap();
        let target = Triple::new(0, 0, 2);
        let raw = rank_triple(&scorer, target, None, TiePolicy::Optimistic).unwrap();
        assert_eq!(raw.tail, 3);
        let filter = FilterIndex::from_triples(&[target, Triple::new(0, 0, 3)]);
        let filtered = rank_triple(&scorer, target, Some(&filter), TiePolicy::Optimistic).unwrap();
        assert_eq!(filtered.tail, 2);
        let filter = FilterIndex::from_triples(&[target, Triple::new(0, 0, 1), Triple::new(0, 0, 3)]);
        let filtered = rank_triple(&scorer, target, Some(&filter), TiePolicy::Optimistic).unwrap();
        assert_eq!(filtered.tail, 1);
    }

    #[test]
    fn ties_follow_policy() {
        let p = scalar_model(&[1.0, 5.0, 5.0, 5.0]);
        let scorer = Scorer::new(&p, ModelVariant::QuatE).unwrap();
        let t = Triple::new(0, 0, 2);
        assert_eq!(rank_triple(&scorer, t, None, TiePolicy::Optimistic).unwrap().tail, 1);
        assert_eq!(rank_triple(&scorer, t, None, TiePolicy::Pessimistic).unwrap().tail, 3);
    }

    #[test]
    fn best_candidate_ranks_first() {
        let p = scalar_model(&[1.0, 2.0, 30.0, 4.0]);
        let scorer = Scorer::new(&p, ModelVariant::QuatE).unwrap();
        let r = rank_triple(&scorer, Triple::new(0, 0, 2), None, TiePolicy::Optimistic).unwrap();
        assert_eq!(r.tail, 1);
    }

    #[test]
    fn metrics_by_definition() {
        let m = Metrics::from_ranks([1, 1, 1, 1]).unwrap();
        assert_eq!((m.mr, m.mrr, m.hit1, m.hit3, m.hit10), (1.0, 1.0, 1.0, 1.0, 1.0));
        let m = Metrics::from_ranks([1, 4]).unwrap();
        assert_eq!(m.mr, 2.5);
        assert_eq!(m.mrr, 0.625);
        assert_eq!((m.hit1, m.hit3, m.hit10), (0.5, 0.5, 1.0));
        assert_eq!(Metrics::from_ranks(core::iter::empty()), Err(Error::EmptySplit));
    }

    #[test]
    fn per_relation_recombines() {
        let rankings = [
            Ranking { triple: Triple::new(0, 0, 1), head: 1, tail: 3 },
            Ranking { triple: Triple::new(1, 1, 2), head: 7, tail: 2 },
            Ranking { triple: Triple::new(2, 1, 0), head: 12, tail: 1 },
            Ranking { triple: Triple::new(3, 2, 3), head: 5, tail: 5 },
        ];
        let report = EvaluationReport::from_rankings(&rankings, None).unwrap();
        let total: usize = report.per_relation.values().map(|m| m.both.count).sum();
        let weighted: f64 = report
            .per_relation
            .values()
            .map(|m| m.both.mrr * m.both.count as f64)
            .sum::<f64>()
            / total as f64;
        assert!((weighted - report.overall.both.mrr).abs() < 1e-12);
        assert_eq!(report.overall.head.count, 4);
        assert!(report.per_category.is_empty());
    }

    #[test]
    fn threshold_separable_and_degenerate() {
        let (th, acc) = best_threshold(&[3.0, 4.0, 5.0], &[0.0, 1.0]).unwrap();
        assert_eq!(acc, 1.0);
        assert_eq!(th, 2.0);
        let (_, acc) = best_threshold(&[1.0, 1.0], &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(acc, 0.6);
        let (_, acc) = best_threshold(&[1.0, 1.0, 1.0], &[1.0]).unwrap();
        assert_eq!(acc, 0.75);
        assert!(best_threshold(&[], &[]).is_none());
    }

    /// Exhaustive scan: every score value and both extremes as a threshold.
    fn scan_oracle(pos: &[f64], neg: &[f64]) -> f64 {
        let mut cands: Vec<f64> = pos.iter().chain(neg).copied().collect();
        cands.push(f64::NEG_INFINITY);
        cands.push(f64::INFINITY);
        cands
            .iter()
            .map(|&th| {
                let ok = pos.iter().filter(|&&s| s >= th).count()
                    + neg.iter().filter(|&&s| s < th).count();
                ok as f64 / (pos.len() + neg.len()) as f64
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn threshold_matches_scan_oracle() {
        let pos = [0.9, 0.1, 0.7];
        let neg = [0.3, 0.8, -0.2];
        let (th, acc) = best_threshold(&pos, &neg).unwrap();
        assert_eq!(acc, scan_oracle(&pos, &neg));
        let achieved = (pos.iter().filter(|&&s| s >= th).count()
            + neg.iter().filter(|&&s| s < th).count()) as f64
            / 6.0;
        assert_eq!(achieved, acc);
    }

    #[test]
    fn classification_complement() {
        let p = scalar_model(&[1.0, 9.0, 7.0, 8.0, -3.0, -1.0]);
        let scorer = Scorer::new(&p, ModelVariant::QuatE).unwrap();
        let pos = vec![Triple::new(0, 0, 1), Triple::new(0, 0, 3), Triple::new(0, 0, 4)];
        let neg = vec![Triple::new(0, 0, 5), Triple::new(0, 0, 2)];
        let model = ClassificationModel {
            per_relation: BTreeMap::new(),
            global: 7.5,
        };
        // 9, 8 >= 7.5 correct; -3 wrong; -1 correct; 7 correct.
        let acc = classify(&pos, &neg, &model, &scorer).unwrap();
        assert_eq!(acc, 0.8);
        let flipped = classify(&neg, &pos, &model, &scorer).unwrap();
        assert!((flipped - (1.0 - acc)).abs() < 1e-15);
    }

    #[test]
    fn learned_thresholds_separate_validation() {
        let p = scalar_model(&[1.0, 9.0, 7.0, 8.0, -3.0, -1.0]);
        let scorer = Scorer::new(&p, ModelVariant::QuatE).unwrap();
        let pos = vec![Triple::new(0, 0, 1), Triple::new(0, 0, 3), Triple::new(0, 0, 2)];
        let neg = vec![Triple::new(0, 0, 5), Triple::new(0, 0, 4)];
        let model = learn_thresholds(&pos, &neg, &scorer).unwrap();
        assert_eq!(model.per_relation.len(), 1);
        assert_eq!(classify(&pos, &neg, &model, &scorer).unwrap(), 1.0);
        assert_eq!(model.threshold(4), model.global);
    }

    #[test]
    fn evaluate_rejects_empty_split() {
        let p = scalar_model(&[1.0, 2.0]);
        let scorer = Scorer::new(&p, ModelVariant::QuatE).unwrap();
        let err = evaluate(&[], &scorer, &FilterIndex::default(), None, TiePolicy::Optimistic);
        assert_eq!(err, Err(Error::EmptySplit));
    }
}
