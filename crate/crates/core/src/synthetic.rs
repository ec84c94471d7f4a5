//! Small generated graphs for smoke tests, sweeps and demos.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::{Dataset, Triple, Vocab};

pub const TOY_ENTITIES: usize = 100;
const GROUP: u32 = 5;
const GROUPS: u32 = TOY_ENTITIES as u32 / GROUP;

/// 100 entities in 20 groups of 5 with four planted relations:
///
/// * `next`: `e → e + 5 (mod 100)`, a bijection moving each entity one group on;
/// * `prev`: the inverse bijection;
/// * `fans_out`: the first entity of group `g` points at all 5 members of group `g + 10`;
/// * `block`: every member of group `g` points at every member of group `g + 3`.
///
/// The 800 triples are shuffled with `seed` and split 80/10/10.
pub fn toy_kg(seed: u64) -> Dataset {
    let n = TOY_ENTITIES as u32;
    let mut triples = Vec::new();
    for e in 0..n {
        triples.push(Triple::new(e, 0, (e + GROUP) % n));
        triples.push(Triple::new((e + GROUP) % n, 1, e));
    }
    for g in 0..GROUPS {
        let target = (g + GROUPS / 2) % GROUPS;
        for m in 0..GROUP {
            triples.push(Triple::new(g * GROUP, 2, target * GROUP + m));
        }
        let block = (g + 3) % GROUPS;
        for a in 0..GROUP {
            for b in 0..GROUP {
                triples.push(Triple::new(g * GROUP + a, 3, block * GROUP + b));
            }
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    triples.shuffle(&mut rng);
    let n_train = triples.len() * 8 / 10;
    let n_valid = triples.len() / 10;
    let test = triples.split_off(n_train + n_valid);
    let valid = triples.split_off(n_train);

    let entities = Vocab::from_names((0..n).map(|e| format!("e{e}")).collect())
        .expect("names are distinct");
    let relations = Vocab::from_names(
        ["next", "prev", "fans_out", "block"]
            .iter()
            .map(|s| alloc::string::String::from(*s))
            .collect(),
    )
    .expect("names are distinct");
    Dataset::new(entities, relations, triples, valid, test).expect("indices are in range")
}

/// Uniformly random distinct triples split 80/10/10.
pub fn random_graph(num_entities: usize, num_relations: usize, num_triples: usize, seed: u64) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let capacity = num_entities * num_entities * num_relations;
    let target = num_triples.min(capacity);
    let mut seen = alloc::collections::BTreeSet::new();
    let mut triples = Vec::with_capacity(target);
    while triples.len() < target {
        let t = Triple::new(
            rng.gen_range(0..num_entities as u32),
            rng.gen_range(0..num_relations as u32),
            rng.gen_range(0..num_entities as u32),
        );
        if seen.insert(t) {
            triples.push(t);
        }
    }
    let n_train = triples.len() * 8 / 10;
    let n_valid = triples.len() / 10;
    let test = triples.split_off(n_train + n_valid);
    let valid = triples.split_off(n_train);
    Dataset::new(
        Vocab::numbered(num_entities),
        Vocab::numbered(num_relations),
        triples,
        valid,
        test,
    )
    .expect("indices are in range")
}
