//! Binary checkpoints.
//!
//! Layout, all little-endian:
//!
//! ```text
//! "QKGE" | version u16 | variant u8 | k u32 | |E| u32 | |R| u32
//! Q | W | P | V     each table as its a, b, c, d matrices of f64, row-major
//! ```
//!
//! QuatE checkpoints carry `P` and `V` too, so one format serves both variants.

use std::fs;
use std::path::{Path, PathBuf};

use quatde_core::{ModelParams, ModelVariant, Table, TableId};
use thiserror::Error;

pub const MAGIC: [u8; 4] = *b"QKGE";
pub const VERSION: u16 = 1;
const HEADER_LEN: usize = 4 + 2 + 1 + 4 * 3;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("not a checkpoint (bad magic bytes)")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u16),
    #[error("unknown model variant code {0}")]
    UnknownVariant(u8),
    #[error("checkpoint is {found} bytes but the header implies {expected}")]
    Length { expected: usize, found: usize },
    #[error(transparent)]
    Core(#[from] quatde_core::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub variant: ModelVariant,
    pub params: ModelParams,
}

fn table_order() -> [TableId; 4] {
    [
        TableId::Entity,
        TableId::Relation,
        TableId::EntityTransfer,
        TableId::RelationTransfer,
    ]
}

fn payload_len(k: usize, entities: usize, relations: usize) -> Option<usize> {
    let per_side = entities.checked_add(relations)?.checked_mul(k)?;
    // Two tables per side, four components per table, eight bytes per float.
    per_side.checked_mul(2 * 4 * 8)?.checked_add(HEADER_LEN)
}

pub fn encode(variant: ModelVariant, params: &ModelParams) -> Vec<u8> {
    let (k, ne, nr) = (params.dim(), params.num_entities(), params.num_relations());
    let mut out = Vec::with_capacity(payload_len(k, ne, nr).unwrap_or(HEADER_LEN));
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(variant.code());
    for n in [k, ne, nr] {
        out.extend_from_slice(&(n as u32).to_le_bytes());
    }
    for id in table_order() {
        for comp in params.table(id).components() {
            for x in comp {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
    }
    out
}

fn u32_at(bytes: &[u8], at: usize) -> usize {
    u32::from_le_bytes(bytes[at..at + 4].try_into().expect("four bytes")) as usize
}

pub fn decode(bytes: &[u8]) -> Result<Checkpoint, CheckpointError> {
    if bytes.len() < HEADER_LEN {
        return Err(if bytes.len() >= 4 && bytes[..4] != MAGIC {
            CheckpointError::BadMagic
        } else {
            CheckpointError::Length {
                expected: HEADER_LEN,
                found: bytes.len(),
            }
        });
    }
    if bytes[..4] != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(CheckpointError::UnsupportedVersion(version));
    }
    let variant = ModelVariant::from_code(bytes[6]).ok_or(CheckpointError::UnknownVariant(bytes[6]))?;
    let (k, ne, nr) = (u32_at(bytes, 7), u32_at(bytes, 11), u32_at(bytes, 15));
    let expected = payload_len(k, ne, nr).unwrap_or(usize::MAX);
    if bytes.len() != expected {
        return Err(CheckpointError::Length {
            expected,
            found: bytes.len(),
        });
    }

    let mut floats = bytes[HEADER_LEN..]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("eight bytes")));
    let mut read_table = |rows: usize| {
        let mut comp = || floats.by_ref().take(rows * k).collect::<Vec<f64>>();
        let (a, b, c, d) = (comp(), comp(), comp(), comp());
        Table::from_components(rows, k, a, b, c, d)
    };
    let entities = read_table(ne)?;
    let relations = read_table(nr)?;
    let entity_transfer = read_table(ne)?;
    let relation_transfer = read_table(nr)?;
    let params = ModelParams::from_tables(k, entities, relations, entity_transfer, relation_transfer)?;
    Ok(Checkpoint { variant, params })
}

pub fn save(path: &Path, variant: ModelVariant, params: &ModelParams) -> Result<(), CheckpointError> {
    fs::write(path, encode(variant, params)).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn load(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let bytes = fs::read(path).map_err(|source| CheckpointError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn bits(params: &ModelParams) -> Vec<u64> {
        table_order()
            .iter()
            .flat_map(|&id| params.table(id).components())
            .flat_map(|c| c.iter().map(|x| x.to_bits()))
            .collect()
    }

    #[test]
    fn header_layout() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let params = ModelParams::random(3, 2, 4, &mut rng).unwrap();
        let bytes = encode(ModelVariant::QuatDE, &params);
        assert_eq!(&bytes[..4], b"QKGE");
        assert_eq!(&bytes[4..6], &[1, 0]);
        assert_eq!(bytes[6], 1);
        assert_eq!(&bytes[7..19], &[4, 0, 0, 0, 3, 0, 0, 0, 2, 0, 0, 0]);
        assert_eq!(bytes.len(), 19 + (3 + 2) * 4 * 4 * 8 * 2);
        // First float is Q[0][0].a.
        assert_eq!(&bytes[19..27], &params.table(TableId::Entity).get(0, 0).a.to_le_bytes());
    }

    #[test]
    fn rejects_bad_input() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let params = ModelParams::random(3, 2, 4, &mut rng).unwrap();
        let good = encode(ModelVariant::QuatE, &params);
        assert!(matches!(decode(b"NOPE and more bytes here"), Err(CheckpointError::BadMagic)));
        assert!(matches!(decode(&good[..10]), Err(CheckpointError::Length { .. })));
        assert!(matches!(decode(&good[..good.len() - 1]), Err(CheckpointError::Length { .. })));
        let mut v = good.clone();
        v[4] = 9;
        assert!(matches!(decode(&v), Err(CheckpointError::UnsupportedVersion(9))));
        let mut v = good.clone();
        v[6] = 7;
        assert!(matches!(decode(&v), Err(CheckpointError::UnknownVariant(7))));
        v = good;
        v[7..11].copy_from_slice(&0u32.to_le_bytes());
        assert!(decode(&v).is_err());
    }

    #[test]
    fn save_and_load_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.qkge");
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let params = ModelParams::random(5, 3, 2, &mut rng).unwrap();
        save(&path, ModelVariant::QuatE, &params).unwrap();
        let ck = load(&path).unwrap();
        assert_eq!(ck.variant, ModelVariant::QuatE);
        assert_eq!(ck.params, params);
        assert!(matches!(load(&dir.path().join("missing")), Err(CheckpointError::Io { .. })));
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_identical(
            seed in any::<u64>(),
            ne in 1usize..6,
            nr in 1usize..4,
            k in 1usize..5,
            quatde in any::<bool>(),
            specials in prop::collection::vec(prop_oneof![
                Just(f64::NAN), Just(-0.0), Just(f64::INFINITY), Just(f64::MIN_POSITIVE / 2.0)
            ], 0..4),
        ) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut params = ModelParams::random(ne, nr, k, &mut rng).unwrap();
            for (i, x) in specials.iter().enumerate() {
                let mut q = params.table(TableId::Entity).get(0, 0);
                match i { 0 => q.a = *x, 1 => q.b = *x, 2 => q.c = *x, _ => q.d = *x }
                params.table_mut(TableId::Entity).set(0, 0, q);
            }
            let variant = if quatde { ModelVariant::QuatDE } else { ModelVariant::QuatE };
            let bytes = encode(variant, &params);
            let back = decode(&bytes).unwrap();
            prop_assert_eq!(back.variant, variant);
            prop_assert_eq!(bits(&back.params), bits(&params));
            prop_assert_eq!(encode(back.variant, &back.params), bytes);
        }
    }
}
