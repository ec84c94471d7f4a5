//! Dataset directories on disk.
//!
//! Two layouts are recognised:
//!
//! * integer: `entity2id.txt`, `relation2id.txt` (count line, then `name id`)
//!   and `train2id.txt`, `valid2id.txt`, `test2id.txt` (count line, then
//!   `h t r`);
//! * raw: `train`, `valid` and `test` files with a `.txt` or `.tsv` extension,
//!   one `head<TAB>relation<TAB>tail` per line, vocabularies assigned in order
//!   of first appearance.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use quatde_core::{Dataset, Triple, Vocab};
use sha2::{Digest, Sha256};
use thiserror::Error;

pub const ENTITY_FILE: &str = "entity2id.txt";
pub const RELATION_FILE: &str = "relation2id.txt";
pub const INTEGER_SPLITS: [&str; 3] = ["train2id.txt", "valid2id.txt", "test2id.txt"];
const RAW_SPLITS: [&str; 3] = ["train", "valid", "test"];
const RAW_EXTENSIONS: [&str; 2] = ["txt", "tsv"];

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("{path}: header declares {expected} records but {found} were read")]
    CountMismatch {
        path: PathBuf,
        expected: usize,
        found: usize,
    },
    #[error("{0}: no integer or raw dataset layout found")]
    UnknownLayout(PathBuf),
    #[error("{0}: the training split is empty")]
    EmptyTrain(PathBuf),
    #[error("{path}: {source}")]
    Invalid {
        path: PathBuf,
        #[source]
        source: quatde_core::Error,
    },
}

pub type Result<T, E = DataError> = std::result::Result<T, E>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layout {
    Integer,
    Raw,
}

/// A loaded dataset with the files it came from.
#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub dataset: Dataset,
    pub layout: Layout,
    pub files: Vec<PathBuf>,
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Non-blank lines with their 1-based line numbers, CR stripped.
fn lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty())
}

fn malformed(path: &Path, line: usize, message: impl Into<String>) -> DataError {
    DataError::MalformedLine {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_index(path: &Path, line: usize, field: &str) -> Result<u32> {
    field
        .parse()
        .map_err(|_| malformed(path, line, format!("expected a non-negative integer, got {field:?}")))
}

/// Splits off the count line and checks it against the records that follow.
fn counted<'t>(path: &Path, text: &'t str) -> Result<Vec<(usize, &'t str)>> {
    let mut it = lines(text);
    let Some((line, header)) = it.next() else {
        // No count line at all.
        return Err(DataError::CountMismatch {
            path: path.to_path_buf(),
            expected: 0,
            found: 0,
        });
    };
    let expected = header
        .trim()
        .parse::<usize>()
        .map_err(|_| malformed(path, line, format!("expected a record count, got {header:?}")))?;
    let records: Vec<_> = it.collect();
    if records.len() != expected {
        return Err(DataError::CountMismatch {
            path: path.to_path_buf(),
            expected,
            found: records.len(),
        });
    }
    Ok(records)
}

fn read_vocab(path: &Path) -> Result<Vocab> {
    let text = read(path)?;
    let records = counted(path, &text)?;
    let mut names: Vec<Option<String>> = vec![None; records.len()];
    for (line, record) in records {
        let record = record.trim();
        let split = record
            .rfind(|c: char| c.is_whitespace())
            .ok_or_else(|| malformed(path, line, "expected `name id`"))?;
        let name = record[..split].trim_end();
        let id = parse_index(path, line, &record[split + 1..])? as usize;
        if name.is_empty() {
            return Err(malformed(path, line, "empty name"));
        }
        match names.get_mut(id) {
            Some(slot @ None) => *slot = Some(name.to_string()),
            Some(Some(_)) => return Err(malformed(path, line, format!("id {id} assigned twice"))),
            None => {
                return Err(malformed(
                    path,
                    line,
                    format!("id {id} outside 0..{}", names.len()),
                ))
            }
        }
    }
    let names = names.into_iter().map(|n| n.expect("every id filled")).collect();
    Vocab::from_names(names).map_err(|source| DataError::Invalid {
        path: path.to_path_buf(),
        source,
    })
}

fn read_integer_triples(path: &Path) -> Result<Vec<Triple>> {
    let text = read(path)?;
    counted(path, &text)?
        .into_iter()
        .map(|(line, record)| {
            let fields: Vec<&str> = record.split_whitespace().collect();
            let [h, t, r] = fields[..] else {
                return Err(malformed(
                    path,
                    line,
                    format!("expected `h t r`, got {} fields", fields.len()),
                ));
            };
            Ok(Triple::new(
                parse_index(path, line, h)?,
                parse_index(path, line, r)?,
                parse_index(path, line, t)?,
            ))
        })
        .collect()
}

fn raw_split_path(dir: &Path, split: &str) -> Option<PathBuf> {
    RAW_EXTENSIONS
        .iter()
        .map(|ext| dir.join(format!("{split}.{ext}")))
        .find(|p| p.is_file())
}

/// Detects the layout of `dir` without reading any file contents.
pub fn detect_layout(dir: &Path) -> Result<Layout> {
    if dir.join(INTEGER_SPLITS[0]).is_file() {
        Ok(Layout::Integer)
    } else if raw_split_path(dir, RAW_SPLITS[0]).is_some() {
        Ok(Layout::Raw)
    } else {
        Err(DataError::UnknownLayout(dir.to_path_buf()))
    }
}

/// Loads a dataset directory in either layout.
pub fn load_dataset(dir: &Path) -> Result<LoadedDataset> {
    match detect_layout(dir)? {
        Layout::Integer => load_integer(dir),
        Layout::Raw => load_raw(dir),
    }
}

fn finish(dir: &Path, dataset: std::result::Result<Dataset, quatde_core::Error>) -> Result<Dataset> {
    let dataset = dataset.map_err(|source| DataError::Invalid {
        path: dir.to_path_buf(),
        source,
    })?;
    if dataset.train.is_empty() {
        return Err(DataError::EmptyTrain(dir.to_path_buf()));
    }
    Ok(dataset)
}

pub fn load_integer(dir: &Path) -> Result<LoadedDataset> {
    let entity_path = dir.join(ENTITY_FILE);
    let relation_path = dir.join(RELATION_FILE);
    let entities = read_vocab(&entity_path)?;
    let relations = read_vocab(&relation_path)?;
    let mut files = vec![entity_path, relation_path];
    let mut splits = Vec::with_capacity(3);
    for name in INTEGER_SPLITS {
        let path = dir.join(name);
        splits.push(read_integer_triples(&path)?);
        files.push(path);
    }
    let [train, valid, test]: [Vec<Triple>; 3] = splits.try_into().expect("three splits");
    let dataset = finish(dir, Dataset::new(entities, relations, train, valid, test))?;
    Ok(LoadedDataset {
        dataset,
        layout: Layout::Integer,
        files,
    })
}

pub fn load_raw(dir: &Path) -> Result<LoadedDataset> {
    let mut entities = Vocab::new();
    let mut relations = Vocab::new();
    let mut files = Vec::new();
    let mut splits = Vec::with_capacity(3);
    for (i, split) in RAW_SPLITS.iter().enumerate() {
        let Some(path) = raw_split_path(dir, split) else {
            return Err(DataError::Io {
                path: dir.join(format!("{split}.txt")),
                source: std::io::Error::new(std::io::ErrorKind::NotFound, "split file not found"),
            });
        };
        let text = read(&path)?;
        let mut triples = Vec::new();
        for (line, record) in lines(&text) {
            let fields: Vec<&str> = record.split('\t').map(str::trim).collect();
            let [h, r, t] = fields[..] else {
                return Err(malformed(
                    &path,
                    line,
                    format!("expected `head<TAB>relation<TAB>tail`, got {} fields", fields.len()),
                ));
            };
            if h.is_empty() || r.is_empty() || t.is_empty() {
                return Err(malformed(&path, line, "empty field"));
            }
            if i > 0 {
                for (vocab, name, kind) in [(&entities, h, "entity"), (&relations, r, "relation"), (&entities, t, "entity")] {
                    if vocab.get(name).is_none() {
                        log::warn!(
                            "{}:{line}: {kind} {name:?} does not occur in train; added to the vocabulary",
                            path.display()
                        );
                    }
                }
            }
            let head = entities.intern(h);
            let relation = relations.intern(r);
            let tail = entities.intern(t);
            triples.push(Triple::new(head, relation, tail));
        }
        splits.push(triples);
        files.push(path);
    }
    let [train, valid, test]: [Vec<Triple>; 3] = splits.try_into().expect("three splits");
    let dataset = finish(dir, Dataset::new(entities, relations, train, valid, test))?;
    Ok(LoadedDataset {
        dataset,
        layout: Layout::Raw,
        files,
    })
}

fn write_file(path: &Path, body: &str) -> Result<()> {
    fs::File::create(path)
        .and_then(|mut f| f.write_all(body.as_bytes()))
        .map_err(|source| DataError::Io {
            path: path.to_path_buf(),
            source,
        })
}

/// Writes `dataset` in the integer layout.
pub fn write_integer_dataset(dir: &Path, dataset: &Dataset) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| DataError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    for (name, vocab) in [(ENTITY_FILE, &dataset.entities), (RELATION_FILE, &dataset.relations)] {
        let mut body = format!("{}\n", vocab.len());
        for (i, n) in vocab.names().iter().enumerate() {
            body.push_str(&format!("{n}\t{i}\n"));
        }
        write_file(&dir.join(name), &body)?;
    }
    for (name, split) in INTEGER_SPLITS.iter().zip([&dataset.train, &dataset.valid, &dataset.test]) {
        let mut body = format!("{}\n", split.len());
        for t in split.iter() {
            body.push_str(&format!("{} {} {}\n", t.head, t.tail, t.relation));
        }
        write_file(&dir.join(name), &body)?;
    }
    Ok(())
}

/// SHA-256 over each file's name, length and bytes, in the order given.
pub fn digest_files(files: &[PathBuf]) -> Result<String> {
    let mut hasher = Sha256::new();
    for path in files {
        let bytes = fs::read(path).map_err(|source| DataError::Io {
            path: path.clone(),
            source,
        })?;
        let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        hasher.update(name.as_bytes());
        hasher.update([0u8]);
        hasher.update((bytes.len() as u64).to_le_bytes());
        hasher.update(&bytes);
    }
    Ok(hex::encode(hasher.finalize()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, name: &str, body: &str) {
        fs::write(dir.join(name), body).unwrap();
    }

    fn integer_fixture(dir: &Path) {
        write(dir, ENTITY_FILE, "3\na\t0\nb c\t2\nb\t1\n");
        write(dir, RELATION_FILE, "2\nr0 0\nr1 1\n");
        write(dir, "train2id.txt", "3\n0 1 0\n1 2 1\n2 0 0\n");
        write(dir, "valid2id.txt", "1\r\n0 2 1\r\n");
        write(dir, "test2id.txt", "0\n");
    }

    #[test]
    fn integer_layout_loads() {
        let dir = tempfile::tempdir().unwrap();
        integer_fixture(dir.path());
        let loaded = load_dataset(dir.path()).unwrap();
        let ds = &loaded.dataset;
        assert_eq!(loaded.layout, Layout::Integer);
        assert_eq!(ds.num_entities(), 3);
        assert_eq!(ds.entities.name(2), Some("b c"));
        assert_eq!(ds.num_relations(), 2);
        assert_eq!(ds.train, vec![Triple::new(0, 0, 1), Triple::new(1, 1, 2), Triple::new(2, 0, 0)]);
        assert_eq!(ds.valid, vec![Triple::new(0, 1, 2)]);
        assert!(ds.test.is_empty());
        assert_eq!(loaded.files.len(), 5);
    }

    #[test]
    fn count_mismatch_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        integer_fixture(dir.path());
        write(dir.path(), "train2id.txt", "4\n0 1 0\n1 2 1\n2 0 0\n");
        match load_dataset(dir.path()) {
            Err(DataError::CountMismatch { expected: 4, found: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_position() {
        let dir = tempfile::tempdir().unwrap();
        integer_fixture(dir.path());
        write(dir.path(), "train2id.txt", "2\n0 1 0\n1 x 1\n");
        match load_dataset(dir.path()) {
            Err(DataError::MalformedLine { line: 3, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn out_of_range_index_is_invalid() {
        let dir = tempfile::tempdir().unwrap();
        integer_fixture(dir.path());
        write(dir.path(), "test2id.txt", "1\n0 7 0\n");
        assert!(matches!(load_dataset(dir.path()), Err(DataError::Invalid { .. })));
    }

    #[test]
    fn empty_train_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        integer_fixture(dir.path());
        write(dir.path(), "train2id.txt", "");
        assert!(matches!(load_dataset(dir.path()), Err(DataError::CountMismatch { .. })));
        write(dir.path(), "train2id.txt", "0\n");
        assert!(matches!(load_dataset(dir.path()), Err(DataError::EmptyTrain(_))));
    }

    #[test]
    fn raw_layout_builds_vocabularies() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "train.txt", "x\tlikes\ty\ny\tlikes\tz\n");
        write(dir.path(), "valid.tsv", "z\thates\tw\n");
        write(dir.path(), "test.txt", "\n");
        let loaded = load_dataset(dir.path()).unwrap();
        let ds = &loaded.dataset;
        assert_eq!(loaded.layout, Layout::Raw);
        assert_eq!(ds.entities.names(), ["x", "y", "z", "w"]);
        assert_eq!(ds.relations.names(), ["likes", "hates"]);
        assert_eq!(ds.valid, vec![Triple::new(2, 1, 3)]);
    }

    #[test]
    fn raw_layout_rejects_two_fields() {
        let dir = tempfile::tempdir().unwrap();
        write(dir.path(), "train.txt", "x\tlikes\ty\nx\tlikes\n");
        write(dir.path(), "valid.txt", "");
        write(dir.path(), "test.txt", "");
        assert!(matches!(load_dataset(dir.path()), Err(DataError::MalformedLine { line: 2, .. })));
    }

    #[test]
    fn unknown_layout() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_dataset(dir.path()), Err(DataError::UnknownLayout(_))));
    }

    #[test]
    fn integer_round_trip() {
        let ds = quatde_core::synthetic::toy_kg(3);
        let dir = tempfile::tempdir().unwrap();
        write_integer_dataset(dir.path(), &ds).unwrap();
        assert_eq!(load_dataset(dir.path()).unwrap().dataset, ds);
    }

    #[test]
    fn digest_tracks_content() {
        let dir = tempfile::tempdir().unwrap();
        integer_fixture(dir.path());
        let files = load_dataset(dir.path()).unwrap().files;
        let before = digest_files(&files).unwrap();
        assert_eq!(before.len(), 64);
        assert_eq!(before, digest_files(&files).unwrap());
        write(dir.path(), "test2id.txt", "1\n0 1 1\n");
        assert_ne!(before, digest_files(&files).unwrap());
    }
}
