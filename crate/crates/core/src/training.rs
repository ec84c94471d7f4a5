//! Bernoulli negative sampling, Adagrad and the mini-batch training loop.

use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, FilterIndex, RelationStats, Triple};
use crate::error::{Error, Result};
use crate::eval::{self, Metrics, TiePolicy};
use crate::model::{self, Label, ModelParams, ModelVariant, Scorer, SparseGrad, Table, TableId};

/// Rejection attempts before a colliding negative is accepted anyway.
pub const MAX_NEGATIVE_ATTEMPTS: usize = 100;

pub const ADAGRAD_EPS: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub nbatches: usize,
    pub learning_rate: f64,
    pub lambda: f64,
    pub negatives: usize,
    pub dim: usize,
    pub valid_interval: usize,
    pub seed: u64,
    pub variant: ModelVariant,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 3000,
            nbatches: 100,
            learning_rate: 0.1,
            lambda: 0.1,
            negatives: 10,
            dim: 100,
            valid_interval: 300,
            seed: 42,
            variant: ModelVariant::QuatDE,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.nbatches == 0 {
            return Err(Error::InvalidConfig("nbatches must be positive"));
        }
        if self.negatives == 0 {
            return Err(Error::InvalidConfig("negatives per positive must be positive"));
        }
        if self.dim == 0 {
            return Err(Error::InvalidConfig("embedding dimension must be positive"));
        }
        if self.valid_interval == 0 {
            return Err(Error::InvalidConfig("validation interval must be positive"));
        }
        if !self.learning_rate.is_finite() || self.learning_rate <= 0.0 {
            return Err(Error::InvalidConfig("learning rate must be positive"));
        }
        if !self.lambda.is_finite() || self.lambda < 0.0 {
            return Err(Error::InvalidConfig("lambda must be non-negative"));
        }
        Ok(())
    }
}

/// Adagrad accumulators, one per scalar parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdagradState {
    accum: [Table; 4],
    pub eps: f64,
}

impl AdagradState {
    pub fn new(params: &ModelParams) -> Self {
        let shape = |id| {
            let t = params.table(id);
            Table::zeros(t.rows(), t.dim())
        };
        Self {
            accum: TableId::ALL.map(shape),
            eps: ADAGRAD_EPS,
        }
    }

    pub fn accumulator(&self, id: TableId) -> &Table {
        &self.accum[id as usize]
    }
}

/// `θ -= lr · g / (√G + ε)` with `G += g²`, row by row.
pub fn adagrad_step(
    params: &mut ModelParams,
    state: &mut AdagradState,
    grads: &SparseGrad,
    lr: f64,
) -> Result<()> {
    for (id, row, _) in grads.iter() {
        params.check_row(id, row as usize)?;
    }
    let eps = state.eps;
    for (id, row, g) in grads.iter() {
        let k = params.dim();
        let span = row as usize * k..(row as usize + 1) * k;
        let theta = params.table_mut(id).components_mut();
        let acc = state.accum[id as usize].components_mut();
        for ((theta, acc), g) in theta.into_iter().zip(acc).zip(g.components()) {
            let theta = &mut theta[span.clone()];
            let acc = &mut acc[span.clone()];
            for i in 0..k {
                acc[i] += g[i] * g[i];
                theta[i] -= lr * g[i] / (libm::sqrt(acc[i]) + eps);
            }
        }
    }
    Ok(())
}

/// Per-relation probability of corrupting the head, `tph / (tph + hpt)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BernoulliStats {
    p_corrupt_head: Vec<f64>,
}

impl BernoulliStats {
    /// Relations missing from `stats` corrupt either side with probability ½.
    pub fn new(stats: &RelationStats, num_relations: usize) -> Self {
        let mut p = vec![0.5; num_relations];
        for (r, s) in stats.iter() {
            if let Some(slot) = p.get_mut(r as usize) {
                *slot = s.tph / (s.tph + s.hpt);
            }
        }
        Self { p_corrupt_head: p }
    }

    pub fn p_corrupt_head(&self, relation: u32) -> f64 {
        self.p_corrupt_head
            .get(relation as usize)
            .copied()
            .unwrap_or(0.5)
    }
}

/// Replaces the head (with the relation's Bernoulli probability) or the tail
/// by a uniform entity, resampling while the result is a known triple.
pub fn sample_negative<R: Rng + ?Sized>(
    triple: Triple,
    stats: &BernoulliStats,
    filter: &FilterIndex,
    num_entities: usize,
    rng: &mut R,
) -> Triple {
    let p = stats.p_corrupt_head(triple.relation);
    let mut candidate = triple;
    for _ in 0..MAX_NEGATIVE_ATTEMPTS {
        let corrupt_head = rng.gen_bool(p);
        let e = rng.gen_range(0..num_entities as u32);
        candidate = if corrupt_head {
            Triple { head: e, ..triple }
        } else {
            Triple { tail: e, ..triple }
        };
        if !filter.contains(candidate) {
            return candidate;
        }
    }
    log::warn!(
        "negative sample for ({}, {}, {}) still collides after {} attempts",
        triple.head,
        triple.relation,
        triple.tail,
        MAX_NEGATIVE_ATTEMPTS
    );
    candidate
}

/// One pass over the shuffled training split. Returns the loss summed over
/// each positive and its negatives, averaged over positives.
#[allow(clippy::too_many_arguments)]
pub fn train_epoch<R: Rng + ?Sized>(
    dataset: &Dataset,
    params: &mut ModelParams,
    state: &mut AdagradState,
    config: &TrainConfig,
    stats: &BernoulliStats,
    filter: &FilterIndex,
    rng: &mut R,
) -> Result<f64> {
    let n = dataset.train.len();
    if n == 0 {
        return Err(Error::EmptySplit);
    }
    let mut order = dataset.train.clone();
    order.shuffle(rng);

    let num_entities = dataset.num_entities();
    let mut batch = SparseGrad::new();
    let mut total = 0.0;
    for b in 0..config.nbatches {
        let (lo, hi) = (b * n / config.nbatches, (b + 1) * n / config.nbatches);
        if lo == hi {
            continue;
        }
        batch.clear();
        for &pos in &order[lo..hi] {
            total += model::grad_triple_into(
                params,
                config.variant,
                pos,
                Label::Positive,
                config.lambda,
                &mut batch,
            )?;
            for _ in 0..config.negatives {
                let neg = sample_negative(pos, stats, filter, num_entities, rng);
                total += model::grad_triple_into(
                    params,
                    config.variant,
                    neg,
                    Label::Negative,
                    config.lambda,
                    &mut batch,
                )?;
            }
        }
        adagrad_step(params, state, &batch, config.learning_rate)?;
    }
    Ok(total / n as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub valid: Option<Metrics>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were returned, when validation ran.
    pub best_epoch: Option<usize>,
}

/// Trains with the sequential filtered evaluator on the validation split.
pub fn train(dataset: &Dataset, config: &TrainConfig) -> Result<(ModelParams, TrainLog)> {
    let filter = crate::data::build_filter_index(dataset);
    train_with(dataset, config, |params| {
        let scorer = Scorer::new(params, config.variant)?;
        let ranks = eval::rank_split(&scorer, &dataset.valid, Some(&filter), TiePolicy::Optimistic)?;
        Metrics::from_rankings(&ranks)
    })
}

/// Trains for `config.epochs`, calling `validate` every `valid_interval`
/// epochs and keeping the parameters with the best validation Hit@10.
///
/// Negatives are filtered against the training split only.
pub fn train_with<F>(
    dataset: &Dataset,
    config: &TrainConfig,
    mut validate: F,
) -> Result<(ModelParams, TrainLog)>
where
    F: FnMut(&ModelParams) -> Result<Metrics>,
{
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut params = ModelParams::random(
        dataset.num_entities(),
        dataset.num_relations(),
        config.dim,
        &mut rng,
    )?;
    let mut log = TrainLog::default();
    if config.epochs == 0 {
        return Ok((params, log));
    }
    if dataset.train.is_empty() {
        return Err(Error::EmptySplit);
    }

    let relation_stats = RelationStats::from_triples(&dataset.train);
    let stats = BernoulliStats::new(&relation_stats, dataset.num_relations());
    let train_filter = FilterIndex::from_triples(&dataset.train);
    let mut state = AdagradState::new(&params);
    let mut best: Option<(f64, ModelParams)> = None;

    for epoch in 1..=config.epochs {
        let loss = train_epoch(
            dataset,
            &mut params,
            &mut state,
            config,
            &stats,
            &train_filter,
            &mut rng,
        )?;
        if !loss.is_finite() {
            return Err(Error::NonFinite("training loss"));
        }
        let valid = if epoch % config.valid_interval == 0 && !dataset.valid.is_empty() {
            let m = validate(&params)?;
            if best.as_ref().is_none_or(|(hit, _)| m.hit10 > *hit) {
                best = Some((m.hit10, params.clone()));
                log.best_epoch = Some(epoch);
            }
            Some(m)
        } else {
            None
        };
        log.epochs.push(EpochRecord { epoch, loss, valid });
    }

    Ok((best.map(|(_, p)| p).unwrap_or(params), log))
}
