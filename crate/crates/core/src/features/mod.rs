//! Segment-level feature vectors.
//!
//! Frame-level DSP outputs are pooled into one vector per block (column
//! means followed by column population stds), concatenated in schema order
//! together with an optional precomputed embedding, and standardized with
//! parameters learned on the training split.

mod embedding;
mod scaler;

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use ndarray::{ArrayView2, Axis};
use thiserror::Error;

pub use embedding::{load_embeddings, write_embeddings, EmbeddingError, EmbeddingTable, W2VE_MAGIC, W2VE_VERSION};
pub use scaler::{fit_scaler, ScalerParams, MIN_STD};

#[derive(Debug, Error, PartialEq)]
pub enum FeatureError {
    #[error("cannot aggregate an empty frame matrix")]
    NoFrames,
    #[error("matrix has no rows")]
    EmptyMatrix,
    #[error("expected length {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("schema requires block `{0}` but it was not supplied")]
    MissingBlock(BlockKind),
    #[error("block `{block}` has dimension {got}, schema says {expected}")]
    BlockDim {
        block: BlockKind,
        expected: usize,
        got: usize,
    },
    #[error("block `{0}` is not part of the schema")]
    UnexpectedBlock(BlockKind),
    #[error("block `{0}` listed twice")]
    DuplicateBlock(BlockKind),
    #[error("unknown feature block `{0}` (expected mfcc, chroma, contrast or embedding)")]
    UnknownBlock(String),
    #[error("feature schema is empty")]
    EmptySchema,
    #[error("non-finite feature value in block `{0}`")]
    NonFinite(BlockKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BlockKind {
    Mfcc,
    Chroma,
    Contrast,
    Embedding,
}

impl BlockKind {
    /// Canonical ordering used when building schemas from a set of names.
    pub const ALL: [BlockKind; 4] = [
        BlockKind::Mfcc,
        BlockKind::Chroma,
        BlockKind::Contrast,
        BlockKind::Embedding,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BlockKind::Mfcc => "mfcc",
            BlockKind::Chroma => "chroma",
            BlockKind::Contrast => "contrast",
            BlockKind::Embedding => "embedding",
        }
    }
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BlockKind {
    type Err = FeatureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "mfcc" => Ok(BlockKind::Mfcc),
            "chroma" => Ok(BlockKind::Chroma),
            "contrast" => Ok(BlockKind::Contrast),
            "embedding" => Ok(BlockKind::Embedding),
            other => Err(FeatureError::UnknownBlock(other.to_owned())),
        }
    }
}

/// Parses a comma-separated block list such as `mfcc,chroma`.
pub fn parse_block_list(s: &str) -> Result<Vec<BlockKind>, FeatureError> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(BlockKind::from_str)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSchema {
    blocks: Vec<(BlockKind, usize)>,
    total_dim: usize,
}

impl FeatureSchema {
    pub fn new(blocks: Vec<(BlockKind, usize)>) -> Result<Self, FeatureError> {
        if blocks.is_empty() {
            return Err(FeatureError::EmptySchema);
        }
        for (i, (kind, _)) in blocks.iter().enumerate() {
            if blocks[..i].iter().any(|(k, _)| k == kind) {
                return Err(FeatureError::DuplicateBlock(*kind));
            }
        }
        let total_dim = blocks.iter().map(|(_, d)| d).sum();
        Ok(Self { blocks, total_dim })
    }

    pub fn blocks(&self) -> &[(BlockKind, usize)] {
        &self.blocks
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn contains(&self, kind: BlockKind) -> bool {
        self.blocks.iter().any(|(k, _)| *k == kind)
    }

    /// Column range of a block within the assembled vector.
    pub fn range(&self, kind: BlockKind) -> Option<std::ops::Range<usize>> {
        let mut offset = 0;
        for &(k, d) in &self.blocks {
            if k == kind {
                return Some(offset..offset + d);
            }
            offset += d;
        }
        None
    }

    /// Column names `<block>_<i>` in vector order.
    pub fn column_names(&self) -> Vec<String> {
        self.blocks
            .iter()
            .flat_map(|&(k, d)| (0..d).map(move |i| format!("{}_{}", k.name(), i)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub schema: Arc<FeatureSchema>,
    pub segment_id: String,
}

/// Column means then column population stds: `[means || stds]`.
pub fn aggregate(frames: ArrayView2<f64>) -> Result<Vec<f64>, FeatureError> {
    if frames.nrows() == 0 {
        return Err(FeatureError::NoFrames);
    }
    let means = frames.mean_axis(Axis(0)).ok_or(FeatureError::NoFrames)?;
    let stds = frames.std_axis(Axis(0), 0.0);
    Ok(means.iter().chain(stds.iter()).copied().collect())
}

/// Concatenates per-block vectors in schema order. The embedding may be
/// passed either as a block or through `embedding`.
pub fn assemble(
    blocks: &[(BlockKind, &[f64])],
    embedding: Option<&[f64]>,
    schema: &Arc<FeatureSchema>,
    segment_id: impl Into<String>,
) -> Result<FeatureVector, FeatureError> {
    for (i, (kind, _)) in blocks.iter().enumerate() {
        if !schema.contains(*kind) {
            return Err(FeatureError::UnexpectedBlock(*kind));
        }
        if blocks[..i].iter().any(|(k, _)| k == kind) || (*kind == BlockKind::Embedding && embedding.is_some()) {
            return Err(FeatureError::DuplicateBlock(*kind));
        }
    }
    if embedding.is_some() && !schema.contains(BlockKind::Embedding) {
        return Err(FeatureError::UnexpectedBlock(BlockKind::Embedding));
    }

    let mut values = Vec::with_capacity(schema.total_dim());
    for &(kind, dim) in schema.blocks() {
        let block = blocks
            .iter()
            .find(|(k, _)| *k == kind)
            .map(|(_, v)| *v)
            .or(if kind == BlockKind::Embedding { embedding } else { None })
            .ok_or(FeatureError::MissingBlock(kind))?;
        if block.len() != dim {
            return Err(FeatureError::BlockDim {
                block: kind,
                expected: dim,
                got: block.len(),
            });
        }
        if block.iter().any(|v| !v.is_finite()) {
            return Err(FeatureError::NonFinite(kind));
        }
        values.extend_from_slice(block);
    }
    Ok(FeatureVector {
        values,
        schema: Arc::clone(schema),
        segment_id: segment_id.into(),
    })
}

/// Writes `segment_id,<block>_<i>...` CSV, one row per vector.
pub fn write_feature_csv<W: Write>(out: W, schema: &FeatureSchema, vectors: &[FeatureVector]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["segment_id".to_owned()];
    header.extend(schema.column_names());
    w.write_record(&header)?;
    for v in vectors {
        let mut row = Vec::with_capacity(v.values.len() + 1);
        row.push(v.segment_id.clone());
        // Shortest round-trip representation.
        row.extend(v.values.iter().map(|x| format!("{x:?}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    fn schema(blocks: &[(BlockKind, usize)]) -> Arc<FeatureSchema> {
        Arc::new(FeatureSchema::new(blocks.to_vec()).unwrap())
    }

    #[test]
    fn aggregate_examples() {
        assert_eq!(
            aggregate(array![[1.0, 3.0], [3.0, 5.0]].view()).unwrap(),
            vec![2.0, 4.0, 1.0, 1.0]
        );
        assert_eq!(aggregate(array![[7.0, 7.0]].view()).unwrap(), vec![7.0, 7.0, 0.0, 0.0]);
        let v = aggregate(array![[2.0, 1.0], [2.0, 5.0], [2.0, 9.0]].view()).unwrap();
        assert_eq!(v[2], 0.0);
        assert!(matches!(
            aggregate(ndarray::Array2::<f64>::zeros((0, 2)).view()),
            Err(FeatureError::NoFrames)
        ));
    }

    #[test]
    fn assemble_examples() {
        let s = schema(&[(BlockKind::Mfcc, 2), (BlockKind::Chroma, 1)]);
        let v = assemble(
            &[(BlockKind::Mfcc, &[1.0, 2.0]), (BlockKind::Chroma, &[3.0])],
            None,
            &s,
            "a",
        )
        .unwrap();
        assert_eq!(v.values, vec![1.0, 2.0, 3.0]);
        // Call order does not matter.
        let v = assemble(
            &[(BlockKind::Chroma, &[3.0]), (BlockKind::Mfcc, &[1.0, 2.0])],
            None,
            &s,
            "a",
        )
        .unwrap();
        assert_eq!(v.values, vec![1.0, 2.0, 3.0]);

        let s = schema(&[(BlockKind::Mfcc, 2), (BlockKind::Embedding, 4)]);
        assert_eq!(
            assemble(&[(BlockKind::Mfcc, &[1.0, 2.0])], None, &s, "a").unwrap_err(),
            FeatureError::MissingBlock(BlockKind::Embedding)
        );
        let v = assemble(&[(BlockKind::Mfcc, &[1.0, 2.0])], Some(&[5.0, 6.0, 7.0, 8.0]), &s, "a").unwrap();
        assert_eq!(v.values.len(), 6);
        assert!(matches!(
            assemble(&[(BlockKind::Mfcc, &[1.0])], Some(&[0.0; 4]), &s, "a"),
            Err(FeatureError::BlockDim { .. })
        ));
        assert!(matches!(
            assemble(
                &[(BlockKind::Mfcc, &[1.0, 2.0]), (BlockKind::Chroma, &[1.0])],
                Some(&[0.0; 4]),
                &s,
                "a"
            ),
            Err(FeatureError::UnexpectedBlock(BlockKind::Chroma))
        ));
    }

    #[test]
    fn schema_validation() {
        assert!(matches!(
            FeatureSchema::new(vec![(BlockKind::Mfcc, 2), (BlockKind::Mfcc, 3)]),
            Err(FeatureError::DuplicateBlock(BlockKind::Mfcc))
        ));
        let s = FeatureSchema::new(vec![(BlockKind::Chroma, 2), (BlockKind::Mfcc, 1)]).unwrap();
        assert_eq!(s.total_dim(), 3);
        assert_eq!(s.column_names(), vec!["chroma_0", "chroma_1", "mfcc_0"]);
        assert_eq!(s.range(BlockKind::Mfcc), Some(2..3));
        assert_eq!(
            parse_block_list("mfcc, chroma").unwrap(),
            vec![BlockKind::Mfcc, BlockKind::Chroma]
        );
        assert!(matches!(
            parse_block_list("mfcc,pitch"),
            Err(FeatureError::UnknownBlock(_))
        ));
    }

    #[test]
    fn csv_export() {
        let s = schema(&[(BlockKind::Mfcc, 2)]);
        let v = assemble(&[(BlockKind::Mfcc, &[0.1, -2.0])], None, &s, "seg1").unwrap();
        let mut out = Vec::new();
        write_feature_csv(&mut out, &s, &[v]).unwrap();
        assert_eq!(
            String::from_utf8(out).unwrap(),
            "segment_id,mfcc_0,mfcc_1\nseg1,0.1,-2.0\n"
        );
    }

    proptest! {
        #[test]
        fn slicing_recovers_blocks(a in proptest::collection::vec(-1e6f64..1e6, 1..5),
                                   b in proptest::collection::vec(-1e6f64..1e6, 1..5),
                                   c in proptest::collection::vec(-1e6f64..1e6, 1..5),
                                   swap in any::<bool>()) {
            let order = if swap {
                vec![(BlockKind::Contrast, c.len()), (BlockKind::Mfcc, a.len()), (BlockKind::Chroma, b.len())]
            } else {
                vec![(BlockKind::Mfcc, a.len()), (BlockKind::Chroma, b.len()), (BlockKind::Contrast, c.len())]
            };
            let s = schema(&order);
            let v = assemble(&[(BlockKind::Mfcc, &a), (BlockKind::Chroma, &b), (BlockKind::Contrast, &c)], None, &s, "x").unwrap();
            prop_assert_eq!(&v.values[s.range(BlockKind::Mfcc).unwrap()], a.as_slice());
            prop_assert_eq!(&v.values[s.range(BlockKind::Chroma).unwrap()], b.as_slice());
            prop_assert_eq!(&v.values[s.range(BlockKind::Contrast).unwrap()], c.as_slice());
        }
    }
}
