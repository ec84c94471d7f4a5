//! Data-parallel ranking. Each triple is ranked independently and results
//! keep the input order, so output matches the sequential evaluator exactly.

use quatde_core::data::RelationStats;
use quatde_core::eval::{self, Ranking};
use quatde_core::{Error, EvaluationReport, FilterIndex, Metrics, Result, Scorer, TiePolicy, Triple};
use rayon::prelude::*;

pub fn rank_split(
    scorer: &Scorer<'_>,
    triples: &[Triple],
    filter: Option<&FilterIndex>,
    ties: TiePolicy,
) -> Result<Vec<Ranking>> {
    triples
        .par_iter()
        .map(|&t| eval::rank_triple(scorer, t, filter, ties))
        .collect()
}

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

pub fn metrics(
    split: &[Triple],
    scorer: &Scorer<'_>,
    filter: &FilterIndex,
    ties: TiePolicy,
) -> Result<Metrics> {
    Metrics::from_rankings(&rank_split(scorer, split, Some(filter), ties)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use quatde_core::data::build_filter_index;
    use quatde_core::synthetic::random_graph;
    use quatde_core::{ModelParams, ModelVariant};
    use rand::SeedableRng;

    #[test]
    fn matches_sequential() {
        let ds = random_graph(40, 3, 250, 11);
        let filter = build_filter_index(&ds);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let params = ModelParams::random(40, 3, 4, &mut rng).unwrap();
        for variant in [ModelVariant::QuatE, ModelVariant::QuatDE] {
            let scorer = Scorer::new(&params, variant).unwrap();
            for ties in [TiePolicy::Optimistic, TiePolicy::Pessimistic] {
                let seq = eval::rank_split(&scorer, &ds.test, Some(&filter), ties).unwrap();
                let par = rank_split(&scorer, &ds.test, Some(&filter), ties).unwrap();
                assert_eq!(seq, par);
            }
            let seq = eval::evaluate(&ds.test, &scorer, &filter, None, TiePolicy::Optimistic).unwrap();
            let par = evaluate(&ds.test, &scorer, &filter, None, TiePolicy::Optimistic).unwrap();
            assert_eq!(seq, par);
        }
    }

    #[test]
    fn empty_split_is_an_error() {
        let ds = random_graph(10, 1, 20, 1);
        let filter = build_filter_index(&ds);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let params = ModelParams::random(10, 1, 2, &mut rng).unwrap();
        let scorer = Scorer::new(&params, ModelVariant::QuatDE).unwrap();
        assert!(matches!(
            evaluate(&[], &scorer, &filter, None, TiePolicy::Optimistic),
            Err(Error::EmptySplit)
        ));
    }
}
