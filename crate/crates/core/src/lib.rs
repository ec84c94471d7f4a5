//! Quaternion knowledge-graph embeddings with dynamic transfer-vector mapping.
//!
//! Entities and relations live in `H^k`. A triple `(h, r, t)` is scored by
//! mapping both entities through their own transfer vector and the
//! relation's transfer vector, rotating the head by the unit relation
//! quaternion, and taking the inner product with the mapped tail. Removing
//! the transfer vectors gives the plain rotation model
//! ([`ModelVariant::QuatE`]).
//!
//! The crate is `no_std` and only needs `alloc`. File formats, dataset
//! loading and the command line live in the companion `quatde` crate.

#![no_std]

extern crate alloc;

pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod quaternion;
pub mod synthetic;
pub mod training;

pub use data::{Category, Dataset, FilterIndex, RelationStats, Triple, Vocab};
pub use error::{Error, Result};
pub use eval::{EvaluationReport, Metrics, TiePolicy};
pub use model::{ModelParams, ModelVariant, Scorer, SparseGrad, Table, TableId};
pub use quaternion::{QuatSlice, Quaternion, QuaternionVector};
pub use training::{AdagradState, BernoulliStats, TrainConfig, TrainLog};
