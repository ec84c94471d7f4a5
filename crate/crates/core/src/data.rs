//! Integer-indexed triples, vocabularies, the filtered-ranking index and
//! per-relation cardinality statistics.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub head: u32,
    pub relation: u32,
    pub tail: u32,
}

impl Triple {
    pub const fn new(head: u32, relation: u32, tail: u32) -> Self {
        Self {
            head,
            relation,
            tail,
        }
    }

    #[inline]
    pub(crate) fn indices(self) -> (usize, usize, usize) {
        (
            self.head as usize,
            self.relation as usize,
            self.tail as usize,
        )
    }
}

/// Bidirectional name ↔ index map; indices are dense and start at 0.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab {
    names: Vec<String>,
    index: BTreeMap<String, u32>,
}

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds a vocabulary where `names[i]` has index `i`.
    pub fn from_names(names: Vec<String>) -> Result<Self> {
        let mut index = BTreeMap::new();
        for (i, name) in names.iter().enumerate() {
            if index.insert(name.clone(), i as u32).is_some() {
                return Err(Error::InvalidDataset("duplicate vocabulary name"));
            }
        }
        Ok(Self { names, index })
    }

    /// Anonymous vocabulary of `n` entries named by their index.
    pub fn numbered(n: usize) -> Self {
        use alloc::string::ToString;
        Self::from_names((0..n).map(|i| i.to_string()).collect()).expect("names are distinct")
    }

    /// Index of `name`, inserting it at the end when unseen.
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&i) = self.index.get(name) {
            return i;
        }
        let i = self.names.len() as u32;
        self.names.push(String::from(name));
        self.index.insert(String::from(name), i);
        i
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.index.get(name).copied()
    }

    pub fn name(&self, i: u32) -> Option<&str> {
        self.names.get(i as usize).map(String::as_str)
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Valid,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Valid => "valid",
            Split::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub entities: Vocab,
    pub relations: Vocab,
    pub train: Vec<Triple>,
    pub valid: Vec<Triple>,
    pub test: Vec<Triple>,
}

impl Dataset {
    /// Validates indices and drops duplicate triples inside each split,
    /// keeping the first occurrence.
    pub fn new(
        entities: Vocab,
        relations: Vocab,
        train: Vec<Triple>,
        valid: Vec<Triple>,
        test: Vec<Triple>,
    ) -> Result<Self> {
        let mut ds = Self {
            entities,
            relations,
            train,
            valid,
            test,
        };
        let (ne, nr) = (ds.entities.len(), ds.relations.len());
        for split in [Split::Train, Split::Valid, Split::Test] {
            let triples = ds.split_mut(split);
            for t in triples.iter() {
                for (what, index, len) in [
                    ("entity", t.head as usize, ne),
                    ("relation", t.relation as usize, nr),
                    ("entity", t.tail as usize, ne),
                ] {
                    if index >= len {
                        return Err(Error::IndexOutOfRange { what, index, len });
                    }
                }
            }
            let before = triples.len();
            let mut seen = BTreeSet::new();
            triples.retain(|t| seen.insert(*t));
            if triples.len() != before {
                log::warn!(
                    "dropped {} duplicate triples from the {} split",
                    before - triples.len(),
                    split
                );
            }
        }
        Ok(ds)
    }

    pub fn split(&self, split: Split) -> &[Triple] {
        match split {
            Split::Train => &self.train,
            Split::Valid => &self.valid,
            Split::Test => &self.test,
        }
    }

    fn split_mut(&mut self, split: Split) -> &mut Vec<Triple> {
        match split {
            Split::Train => &mut self.train,
            Split::Valid => &mut self.valid,
            Split::Test => &mut self.test,
        }
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }
}

/// Every known-true triple across train, valid and test.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct FilterIndex {
    tails: BTreeMap<(u32, u32), Vec<u32>>,
    heads: BTreeMap<(u32, u32), Vec<u32>>,
    len: usize,
}

impl FilterIndex {
    pub fn from_triples<'a>(triples: impl IntoIterator<Item = &'a Triple>) -> Self {
        let mut tails: BTreeMap<(u32, u32), Vec<u32>> = BTreeMap::new();
        let mut heads: BTreeMap<(u32, u32), Vec<u32>> = BTreeMap::new();
        for t in triples {
            tails.entry((t.head, t.relation)).or_default().push(t.tail);
            heads.entry((t.relation, t.tail)).or_default().push(t.head);
        }
        let mut len = 0;
        for list in tails.values_mut().chain(heads.values_mut()) {
            list.sort_unstable();
            list.dedup();
        }
        for list in tails.values() {
            len += list.len();
        }
        Self { tails, heads, len }
    }

    pub fn contains(&self, t: Triple) -> bool {
        self.tails
            .get(&(t.head, t.relation))
            .is_some_and(|list| list.binary_search(&t.tail).is_ok())
    }

    /// Sorted true tails of `(head, relation, ?)`.
    pub fn tails(&self, head: u32, relation: u32) -> &[u32] {
        self.tails
            .get(&(head, relation))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Sorted true heads of `(?, relation, tail)`.
    pub fn heads(&self, relation: u32, tail: u32) -> &[u32] {
        self.heads
            .get(&(relation, tail))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    /// Number of distinct triples.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }
}

pub fn build_filter_index(dataset: &Dataset) -> FilterIndex {
    FilterIndex::from_triples(
        dataset
            .train
            .iter()
            .chain(&dataset.valid)
            .chain(&dataset.test),
    )
}

/// Relation cardinality class, head side first.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Category {
    OneToOne,
    OneToMany,
    ManyToOne,
    ManyToMany,
}

impl Category {
    pub const ALL: [Category; 4] = [
        Category::OneToOne,
        Category::OneToMany,
        Category::ManyToOne,
        Category::ManyToMany,
    ];

    /// Multiplicities of 1.5 or more count as "many".
    pub fn classify(tph: f64, hpt: f64) -> Self {
        const CUT: f64 = 1.5;
        match (hpt >= CUT, tph >= CUT) {
            (false, false) => Category::OneToOne,
            (false, true) => Category::OneToMany,
            (true, false) => Category::ManyToOne,
            (true, true) => Category::ManyToMany,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Category::OneToOne => "1-1",
            Category::OneToMany => "1-N",
            Category::ManyToOne => "N-1",
            Category::ManyToMany => "N-N",
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelationStat {
    pub triples: usize,
    /// Average tails per head.
    pub tph: f64,
    /// Average heads per tail.
    pub hpt: f64,
    pub category: Category,
}

/// Per-relation statistics over the training split. Relations absent from
/// train have no entry.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RelationStats {
    stats: BTreeMap<u32, RelationStat>,
}

impl RelationStats {
    pub fn from_triples(train: &[Triple]) -> Self {
        let mut heads: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
        let mut tails: BTreeMap<u32, BTreeSet<u32>> = BTreeMap::new();
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for t in train {
            *counts.entry(t.relation).or_default() += 1;
            heads.entry(t.relation).or_default().insert(t.head);
            tails.entry(t.relation).or_default().insert(t.tail);
        }
        let stats = counts
            .into_iter()
            .map(|(r, n)| {
                let tph = n as f64 / heads[&r].len() as f64;
                let hpt = n as f64 / tails[&r].len() as f64;
                (
                    r,
                    RelationStat {
                        triples: n,
                        tph,
                        hpt,
                        category: Category::classify(tph, hpt),
                    },
                )
            })
            .collect();
        Self { stats }
    }

    pub fn get(&self, relation: u32) -> Option<&RelationStat> {
        self.stats.get(&relation)
    }

    pub fn category(&self, relation: u32) -> Option<Category> {
        self.get(relation).map(|s| s.category)
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, &RelationStat)> {
        self.stats.iter().map(|(&r, s)| (r, s))
    }

    pub fn len(&self) -> usize {
        self.stats.len()
    }

    pub fn is_empty(&self) -> bool {
        self.stats.is_empty()
    }
}

pub fn relation_stats(dataset: &Dataset) -> Result<RelationStats> {
    if dataset.train.is_empty() {
        return Err(Error::EmptySplit);
    }
    Ok(RelationStats::from_triples(&dataset.train))
}
