//! W2VE embedding sidecar files.
//!
//! Little-endian layout: magic `W2VE`, `u32` version (1), `u32` dim, then
//! records of `u16` id length, UTF-8 id bytes and `dim` `f32` values until end
//! of file. No padding, no footer.

use std::collections::HashMap;
use std::path::Path;

use thiserror::Error;

pub const W2VE_MAGIC: [u8; 4] = *b"W2VE";
pub const W2VE_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EmbeddingError {
    #[error("failed to access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic {0:02x?}, expected `W2VE`")]
    BadMagic([u8; 4]),
    #[error("unsupported W2VE version {0}")]
    Version(u32),
    #[error("truncated W2VE header at byte offset {0}")]
    TruncatedHeader(usize),
    #[error(
        "record `{id}` at byte offset {offset} holds {available} bytes of values, header dim {dim} needs {needed}"
    )]
    DimMismatch {
        id: String,
        offset: usize,
        dim: u32,
        available: usize,
        needed: usize,
    },
    #[error("record at byte offset {0} has a truncated id")]
    TruncatedId(usize),
    #[error("record id at byte offset {0} is not valid UTF-8")]
    InvalidId(usize),
    #[error("duplicate embedding id `{0}`")]
    DuplicateId(String),
    #[error("embedding `{id}` has length {got}, table dim is {dim}")]
    WrongLength { id: String, dim: usize, got: usize },
    #[error("embedding `{0}` contains a non-finite value")]
    NonFinite(String),
    #[error("embedding id `{0}` is longer than 65535 bytes")]
    IdTooLong(String),
}

/// Per-segment embedding vectors, kept in insertion order.
#[derive(Debug, Clone, Default)]
pub struct EmbeddingTable {
    dim: usize,
    entries: Vec<(String, Vec<f32>)>,
    index: HashMap<String, usize>,
}

impl PartialEq for EmbeddingTable {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim
            && self.entries.len() == other.entries.len()
            && self
                .entries
                .iter()
                .zip(&other.entries)
                .all(|(a, b)| a.0 == b.0 && a.1.iter().map(|v| v.to_bits()).eq(b.1.iter().map(|v| v.to_bits())))
    }
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ..Default::default()
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn insert(&mut self, id: impl Into<String>, values: Vec<f32>) -> Result<(), EmbeddingError> {
        let id = id.into();
        if values.len() != self.dim {
            return Err(EmbeddingError::WrongLength {
                id,
                dim: self.dim,
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(EmbeddingError::NonFinite(id));
        }
        if self.index.contains_key(&id) {
            return Err(EmbeddingError::DuplicateId(id));
        }
        self.index.insert(id.clone(), self.entries.len());
        self.entries.push((id, values));
        Ok(())
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.index.get(id).map(|&i| self.entries[i].1.as_slice())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_slice()))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, EmbeddingError> {
        let mut out = Vec::with_capacity(12 + self.entries.len() * (self.dim * 4 + 16));
        out.extend_from_slice(&W2VE_MAGIC);
        out.extend_from_slice(&W2VE_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        for (id, values) in &self.entries {
            let len: u16 = id.len().try_into().map_err(|_| EmbeddingError::IdTooLong(id.clone()))?;
            out.extend_from_slice(&len.to_le_bytes());
            out.extend_from_slice(id.as_bytes());
            for v in values {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, EmbeddingError> {
        if bytes.len() < 12 {
            if bytes.len() >= 4 && bytes[..4] != W2VE_MAGIC {
                return Err(EmbeddingError::BadMagic(bytes[..4].try_into().unwrap()));
            }
            return Err(EmbeddingError::TruncatedHeader(bytes.len()));
        }
        let magic: [u8; 4] = bytes[..4].try_into().unwrap();
        if magic != W2VE_MAGIC {
            return Err(EmbeddingError::BadMagic(magic));
        }
        let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
        if version != W2VE_VERSION {
            return Err(EmbeddingError::Version(version));
        }
        let dim = u32::from_le_bytes(bytes[8..12].try_into().unwrap());
        let mut table = EmbeddingTable::new(dim as usize);
        let mut pos = 12;
        while pos < bytes.len() {
            let record_start = pos;
            if pos + 2 > bytes.len() {
                return Err(EmbeddingError::TruncatedId(record_start));
            }
            let id_len = u16::from_le_bytes([bytes[pos], bytes[pos + 1]]) as usize;
            pos += 2;
            if pos + id_len > bytes.len() {
                return Err(EmbeddingError::TruncatedId(record_start));
            }
            let id = std::str::from_utf8(&bytes[pos..pos + id_len])
                .map_err(|_| EmbeddingError::InvalidId(record_start))?
                .to_owned();
            pos += id_len;
            let needed = dim as usize * 4;
            let available = bytes.len() - pos;
            if available < needed {
                return Err(EmbeddingError::DimMismatch {
                    id,
                    offset: record_start,
                    dim,
                    available,
                    needed,
                });
            }
            let values = bytes[pos..pos + needed]
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect();
            pos += needed;
            table.insert(id, values)?;
        }
        Ok(table)
    }
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingTable, EmbeddingError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| EmbeddingError::Io {
        path: path.display().to_string(),
        source,
    })?;
    EmbeddingTable::from_bytes(&bytes)
}

pub fn write_embeddings(table: &EmbeddingTable, path: impl AsRef<Path>) -> Result<(), EmbeddingError> {
    let path = path.as_ref();
    std::fs::write(path, table.to_bytes()?).map_err(|source| EmbeddingError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn single_record() {
        let mut t = EmbeddingTable::new(4);
        t.insert("s1", vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let bytes = t.to_bytes().unwrap();
        assert_eq!(&bytes[..4], &[0x57, 0x32, 0x56, 0x45]);
        assert_eq!(bytes.len(), 12 + 2 + 2 + 16);
        let back = EmbeddingTable::from_bytes(&bytes).unwrap();
        assert_eq!(back.get("s1").unwrap(), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(back, t);
    }

    #[test]
    fn empty_record_section() {
        let t = EmbeddingTable::from_bytes(&EmbeddingTable::new(768).to_bytes().unwrap()).unwrap();
        assert!(t.is_empty());
        assert_eq!(t.dim(), 768);
    }

    #[test]
    fn duplicate_id_named() {
        let mut t = EmbeddingTable::new(1);
        t.insert("a", vec![0.5]).unwrap();
        let mut bytes = t.to_bytes().unwrap();
        let record = bytes[12..].to_vec();
        bytes.extend_from_slice(&record);
        match EmbeddingTable::from_bytes(&bytes) {
            Err(EmbeddingError::DuplicateId(id)) => assert_eq!(id, "a"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn bad_magic_and_version() {
        let mut bytes = EmbeddingTable::new(2).to_bytes().unwrap();
        bytes[0] = b'X';
        assert!(matches!(
            EmbeddingTable::from_bytes(&bytes),
            Err(EmbeddingError::BadMagic(_))
        ));
        let mut bytes = EmbeddingTable::new(2).to_bytes().unwrap();
        bytes[4] = 2;
        assert!(matches!(
            EmbeddingTable::from_bytes(&bytes),
            Err(EmbeddingError::Version(2))
        ));
        assert!(matches!(
            EmbeddingTable::from_bytes(b"W2VE"),
            Err(EmbeddingError::TruncatedHeader(4))
        ));
    }

    #[test]
    fn short_record_is_dim_mismatch() {
        let mut t = EmbeddingTable::new(3);
        t.insert("x", vec![1.0, 2.0, 3.0]).unwrap();
        let bytes = t.to_bytes().unwrap();
        let cut = &bytes[..bytes.len() - 4];
        assert!(matches!(
            EmbeddingTable::from_bytes(cut),
            Err(EmbeddingError::DimMismatch {
                needed: 12,
                available: 8,
                ..
            })
        ));
    }

    #[test]
    fn wrong_length_insert() {
        let mut t = EmbeddingTable::new(3);
        assert!(matches!(
            t.insert("x", vec![1.0]),
            Err(EmbeddingError::WrongLength { .. })
        ));
        assert!(matches!(
            t.insert("y", vec![f32::NAN; 3]),
            Err(EmbeddingError::NonFinite(_))
        ));
    }

    proptest! {
        #[test]
        fn round_trip_bit_exact(
            dim in 0usize..6,
            rows in proptest::collection::btree_map("[a-zA-Z0-9_é-]{0,10}", proptest::collection::vec(-1e30f32..1e30f32, 6), 0..8)
        ) {
            let mut t = EmbeddingTable::new(dim);
            for (id, v) in rows {
                t.insert(id, v[..dim].to_vec()).unwrap();
            }
            let back = EmbeddingTable::from_bytes(&t.to_bytes().unwrap()).unwrap();
            prop_assert_eq!(back, t);
        }
    }
}
