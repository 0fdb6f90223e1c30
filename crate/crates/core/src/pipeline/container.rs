//! Model file container.
//!
//! Layout (little-endian): magic `CRYD`, u32 format version, u64 payload
//! length, payload, u32 CRC32 of the payload. The payload is a line-oriented
//! text document, one `key value...` record per line, with every float
//! written as the 16 hex digits of its IEEE-754 bit pattern. Trees are
//! serialized pre-order, one tree per line: `S <feature> <threshold>` for a
//! split followed by its left and right subtrees, `L <value>` for a leaf.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

use super::{PipelineModel, PreprocessConfig};
use crate::features::{BlockKind, FeatureSchema, ScalerParams};
use crate::models::{Classifier, GbmModel, LinearSvmModel, RbfSvmModel, TreeNode};

pub const MODEL_MAGIC: [u8; 4] = *b"CRYD";
pub const FORMAT_VERSION: u32 = 1;

const HEADER_LEN: usize = 16;
const MAX_TREE_DEPTH: usize = 256;

#[derive(Debug, Error, PartialEq)]
pub enum ModelFileError {
    #[error("cannot access model file {path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("not a model file (bad magic)")]
    BadMagic,
    #[error("unsupported model format version {found} (this build reads {FORMAT_VERSION})")]
    UnsupportedVersion { found: u32 },
    #[error("model file truncated: need {needed} bytes, have {available}")]
    Truncated { needed: u64, available: u64 },
    #[error("{0} unexpected bytes after the checksum")]
    TrailingBytes(usize),
    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    Checksum { stored: u32, computed: u32 },
    #[error("model payload line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("inconsistent model: {0}")]
    Inconsistent(String),
}

fn hex(v: f64) -> String {
    format!("{:016x}", v.to_bits())
}

fn hex_list(vs: &[f64]) -> String {
    vs.iter().map(|&v| hex(v)).collect::<Vec<_>>().join(" ")
}

fn write_tree(out: &mut String, node: &TreeNode) {
    match node {
        TreeNode::Leaf { value } => {
            let _ = write!(out, " L {}", hex(*value));
        }
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
        } => {
            let _ = write!(out, " S {feature} {}", hex(*threshold));
            write_tree(out, left);
            write_tree(out, right);
        }
    }
}

fn payload(model: &PipelineModel) -> String {
    let p = &model.preprocess;
    let mut s = String::new();
    let mut line = |k: &str, v: String| {
        s.push_str(k);
        if !v.is_empty() {
            s.push(' ');
            s.push_str(&v);
        }
        s.push('\n');
    };
    line("crydetect-model", String::new());
    line("sample_rate", p.sample_rate.to_string());
    line("band_low_hz", hex(p.band_low_hz));
    line("band_high_hz", hex(p.band_high_hz));
    line("filter_order", p.filter_order.to_string());
    line("silence_dbfs", hex(p.silence_dbfs));
    line("frame_length", p.frame_length.to_string());
    line("hop", p.hop.to_string());
    line("n_mfcc", p.n_mfcc.to_string());
    line("n_mels", p.n_mels.to_string());
    line("contrast_bands", p.contrast_bands.to_string());
    line("contrast_alpha", hex(p.contrast_alpha));
    line("silence_short_circuit", (model.silence_short_circuit as u8).to_string());
    line(
        "schema",
        model
            .schema
            .blocks()
            .iter()
            .map(|(k, d)| format!("{k}:{d}"))
            .collect::<Vec<_>>()
            .join(" "),
    );
    line("scaler_means", hex_list(&model.scaler.means));
    line("scaler_stds", hex_list(&model.scaler.stds));
    match &model.classifier {
        Classifier::Gbm(m) => {
            line("classifier", "gbm".into());
            line("base_score", hex(m.base_score));
            line("learning_rate", hex(m.learning_rate));
            line("n_features", m.n_features.to_string());
            line("n_trees", m.trees.len().to_string());
            for t in &m.trees {
                let mut rec = String::new();
                write_tree(&mut rec, t);
                line("tree", rec.trim_start().to_owned());
            }
        }
        Classifier::LinearSvm(m) => {
            line("classifier", "svm-linear".into());
            line("bias", hex(m.bias));
            line("weights", hex_list(&m.weights));
        }
        Classifier::RbfSvm(m) => {
            line("classifier", "svm-rbf".into());
            line("gamma", hex(m.gamma));
            line("bias", hex(m.bias));
            line("n_features", m.n_features.to_string());
            line("n_support", m.support_vectors.len().to_string());
            for (sv, c) in m.support_vectors.iter().zip(&m.dual_coefs) {
                line("sv", format!("{} {}", hex(*c), hex_list(sv)));
            }
        }
    }
    s
}

pub fn model_to_bytes(model: &PipelineModel) -> Vec<u8> {
    let body = payload(model);
    let mut out = Vec::with_capacity(HEADER_LEN + body.len() + 4);
    out.extend_from_slice(&MODEL_MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(body.len() as u64).to_le_bytes());
    out.extend_from_slice(body.as_bytes());
    out.extend_from_slice(&crc32fast::hash(body.as_bytes()).to_le_bytes());
    out
}

pub fn save_model(model: &PipelineModel, path: impl AsRef<Path>) -> Result<(), ModelFileError> {
    let path = path.as_ref();
    std::fs::write(path, model_to_bytes(model)).map_err(|e| ModelFileError::Io {
        path: path.to_owned(),
        message: e.to_string(),
    })
}

pub fn load_model(path: impl AsRef<Path>) -> Result<PipelineModel, ModelFileError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| ModelFileError::Io {
        path: path.to_owned(),
        message: e.to_string(),
    })?;
    model_from_bytes(&bytes)
}

pub fn model_from_bytes(bytes: &[u8]) -> Result<PipelineModel, ModelFileError> {
    let truncated = |needed: u64| ModelFileError::Truncated {
        needed,
        available: bytes.len() as u64,
    };
    if bytes.len() < 4 {
        return Err(truncated(HEADER_LEN as u64));
    }
    if bytes[..4] != MODEL_MAGIC {
        return Err(ModelFileError::BadMagic);
    }
    if bytes.len() < HEADER_LEN {
        return Err(truncated(HEADER_LEN as u64));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(ModelFileError::UnsupportedVersion { found: version });
    }
    let len = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes"));
    let needed = (HEADER_LEN as u64).saturating_add(len).saturating_add(4);
    if (bytes.len() as u64) < needed {
        return Err(truncated(needed));
    }
    let end = HEADER_LEN + len as usize;
    if bytes.len() as u64 > needed {
        return Err(ModelFileError::TrailingBytes(bytes.len() - end - 4));
    }
    let body = &bytes[HEADER_LEN..end];
    let stored = u32::from_le_bytes(bytes[end..end + 4].try_into().expect("4 bytes"));
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(ModelFileError::Checksum { stored, computed });
    }
    let text = std::str::from_utf8(body).map_err(|e| ModelFileError::Parse {
        line: 0,
        message: format!("payload is not UTF-8: {e}"),
    })?;
    let model = Parser::new(text).model()?;
    model.check_invariants()?;
    Ok(model)
}

struct Parser<'a> {
    lines: std::iter::Enumerate<std::str::Lines<'a>>,
    line_no: usize,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str) -> Self {
        Self {
            lines: text.lines().enumerate(),
            line_no: 0,
        }
    }

    fn err(&self, message: impl Into<String>) -> ModelFileError {
        ModelFileError::Parse {
            line: self.line_no,
            message: message.into(),
        }
    }

    /// Next line, which must start with `key`; returns the remaining tokens.
    fn record(&mut self, key: &str) -> Result<Vec<&'a str>, ModelFileError> {
        let Some((i, line)) = self.lines.next() else {
            self.line_no += 1;
            return Err(self.err(format!("expected `{key}`, found end of payload")));
        };
        self.line_no = i + 1;
        let mut tokens = line.split(' ');
        match tokens.next() {
            Some(k) if k == key => Ok(tokens.collect()),
            Some(k) => Err(self.err(format!("expected `{key}`, found `{k}`"))),
            None => Err(self.err(format!("expected `{key}`"))),
        }
    }

    fn single(&mut self, key: &str) -> Result<&'a str, ModelFileError> {
        match self.record(key)?.as_slice() {
            [v] => Ok(v),
            other => Err(self.err(format!("`{key}` takes one value, found {}", other.len()))),
        }
    }

    fn float(&self, tok: &str) -> Result<f64, ModelFileError> {
        if tok.len() != 16 {
            return Err(self.err(format!("`{tok}` is not a 16-digit hex float")));
        }
        u64::from_str_radix(tok, 16)
            .map(f64::from_bits)
            .map_err(|_| self.err(format!("`{tok}` is not a hex float")))
    }

    fn int<T: std::str::FromStr>(&self, tok: &str) -> Result<T, ModelFileError> {
        tok.parse().map_err(|_| self.err(format!("`{tok}` is not an integer")))
    }

    fn float_key(&mut self, key: &str) -> Result<f64, ModelFileError> {
        let t = self.single(key)?;
        self.float(t)
    }

    fn int_key<T: std::str::FromStr>(&mut self, key: &str) -> Result<T, ModelFileError> {
        let t = self.single(key)?;
        self.int(t)
    }

    fn floats_key(&mut self, key: &str) -> Result<Vec<f64>, ModelFileError> {
        let toks = self.record(key)?;
        toks.iter().map(|t| self.float(t)).collect()
    }

    fn tree(&self, toks: &mut std::slice::Iter<'_, &str>, depth: usize) -> Result<TreeNode, ModelFileError> {
        if depth > MAX_TREE_DEPTH {
            return Err(self.err("tree is too deep"));
        }
        match toks.next() {
            Some(&"L") => {
                let v = toks.next().ok_or_else(|| self.err("leaf without value"))?;
                Ok(TreeNode::Leaf { value: self.float(v)? })
            }
            Some(&"S") => {
                let f = toks.next().ok_or_else(|| self.err("split without feature"))?;
                let t = toks.next().ok_or_else(|| self.err("split without threshold"))?;
                let feature = self.int(f)?;
                let threshold = self.float(t)?;
                let left = Box::new(self.tree(toks, depth + 1)?);
                let right = Box::new(self.tree(toks, depth + 1)?);
                Ok(TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                })
            }
            Some(other) => Err(self.err(format!("unknown tree node tag `{other}`"))),
            None => Err(self.err("tree record ends early")),
        }
    }

    fn model(mut self) -> Result<PipelineModel, ModelFileError> {
        self.record("crydetect-model")?;
        let preprocess = PreprocessConfig {
            sample_rate: self.int_key("sample_rate")?,
            band_low_hz: self.float_key("band_low_hz")?,
            band_high_hz: self.float_key("band_high_hz")?,
            filter_order: self.int_key("filter_order")?,
            silence_dbfs: self.float_key("silence_dbfs")?,
            frame_length: self.int_key("frame_length")?,
            hop: self.int_key("hop")?,
            n_mfcc: self.int_key("n_mfcc")?,
            n_mels: self.int_key("n_mels")?,
            contrast_bands: self.int_key("contrast_bands")?,
            contrast_alpha: self.float_key("contrast_alpha")?,
        };
        let silence_short_circuit = match self.single("silence_short_circuit")? {
            "0" => false,
            "1" => true,
            other => return Err(self.err(format!("`{other}` is not 0 or 1"))),
        };
        let mut blocks = Vec::new();
        for tok in self.record("schema")? {
            let (name, dim) = tok
                .split_once(':')
                .ok_or_else(|| self.err(format!("bad schema entry `{tok}`")))?;
            let kind: BlockKind = name
                .parse()
                .map_err(|e: crate::features::FeatureError| self.err(e.to_string()))?;
            blocks.push((kind, self.int(dim)?));
        }
        let schema = FeatureSchema::new(blocks).map_err(|e| self.err(e.to_string()))?;
        let scaler = ScalerParams {
            means: self.floats_key("scaler_means")?,
            stds: self.floats_key("scaler_stds")?,
        };
        let classifier = match self.single("classifier")? {
            "gbm" => {
                let base_score = self.float_key("base_score")?;
                let learning_rate = self.float_key("learning_rate")?;
                let n_features: usize = self.int_key("n_features")?;
                let n_trees: usize = self.int_key("n_trees")?;
                let mut trees = Vec::with_capacity(n_trees.min(1 << 16));
                for _ in 0..n_trees {
                    let toks = self.record("tree")?;
                    let mut it = toks.iter();
                    let t = self.tree(&mut it, 0)?;
                    if it.next().is_some() {
                        return Err(self.err("extra tokens after tree"));
                    }
                    if t.max_feature().is_some_and(|f| f >= n_features) {
                        return Err(self.err("tree references a feature beyond n_features"));
                    }
                    trees.push(t);
                }
                Classifier::Gbm(GbmModel {
                    base_score,
                    trees,
                    learning_rate,
                    n_features,
                })
            }
            "svm-linear" => {
                let bias = self.float_key("bias")?;
                let weights = self.floats_key("weights")?;
                Classifier::LinearSvm(LinearSvmModel { weights, bias })
            }
            "svm-rbf" => {
                let gamma = self.float_key("gamma")?;
                let bias = self.float_key("bias")?;
                let n_features: usize = self.int_key("n_features")?;
                let n_support: usize = self.int_key("n_support")?;
                let mut support_vectors = Vec::with_capacity(n_support.min(1 << 16));
                let mut dual_coefs = Vec::with_capacity(n_support.min(1 << 16));
                for _ in 0..n_support {
                    let v = self.floats_key("sv")?;
                    if v.len() != n_features + 1 {
                        return Err(self.err(format!(
                            "support vector has {} values, expected {}",
                            v.len().saturating_sub(1),
                            n_features
                        )));
                    }
                    dual_coefs.push(v[0]);
                    support_vectors.push(v[1..].to_vec());
                }
                Classifier::RbfSvm(RbfSvmModel {
                    support_vectors,
                    dual_coefs,
                    bias,
                    gamma,
                    n_features,
                })
            }
            other => return Err(self.err(format!("unknown classifier `{other}`"))),
        };
        if let Some((i, _)) = self.lines.next() {
            self.line_no = i + 1;
            return Err(self.err("unexpected content after the classifier"));
        }
        Ok(PipelineModel {
            preprocess,
            schema,
            scaler,
            classifier,
            silence_short_circuit,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_model(classifier: Classifier) -> PipelineModel {
        PipelineModel {
            preprocess: PreprocessConfig::default(),
            schema: FeatureSchema::new(vec![(BlockKind::Mfcc, 2), (BlockKind::Contrast, 1)]).unwrap(),
            scaler: ScalerParams {
                means: vec![0.1, -2.5, 1e-300],
                stds: vec![1.0, 0.3, 7.0],
            },
            classifier,
            silence_short_circuit: true,
        }
    }

    fn gbm() -> Classifier {
        Classifier::Gbm(GbmModel {
            base_score: -0.2,
            learning_rate: 0.1,
            n_features: 3,
            trees: vec![
                TreeNode::Split {
                    feature: 2,
                    threshold: 0.5,
                    left: Box::new(TreeNode::Leaf { value: -1.25 }),
                    right: Box::new(TreeNode::Split {
                        feature: 0,
                        threshold: -0.0,
                        left: Box::new(TreeNode::Leaf { value: 0.3 }),
                        right: Box::new(TreeNode::Leaf {
                            value: f64::MIN_POSITIVE,
                        }),
                    }),
                },
                TreeNode::Leaf { value: 0.01 },
            ],
        })
    }

    #[test]
    fn round_trips_every_classifier() {
        let rbf = Classifier::RbfSvm(RbfSvmModel {
            support_vectors: vec![vec![1.0, 2.0, 3.0], vec![-1.0, 0.5, 0.25]],
            dual_coefs: vec![0.7, -0.7],
            bias: 0.125,
            gamma: 1.0 / 3.0,
            n_features: 3,
        });
        let lin = Classifier::LinearSvm(LinearSvmModel {
            weights: vec![0.1, 0.2, -0.3],
            bias: -1.0,
        });
        for c in [gbm(), rbf, lin] {
            let m = sample_model(c);
            let bytes = model_to_bytes(&m);
            assert_eq!(&bytes[..4], b"CRYD");
            assert_eq!(model_from_bytes(&bytes).unwrap(), m);
        }
    }

    #[test]
    fn corruption_is_detected() {
        let bytes = model_to_bytes(&sample_model(gbm()));
        let mut bad = bytes.clone();
        bad[HEADER_LEN + 5] ^= 0x01;
        assert!(matches!(model_from_bytes(&bad), Err(ModelFileError::Checksum { .. })));
        assert!(matches!(
            model_from_bytes(&bytes[..bytes.len() - 1]),
            Err(ModelFileError::Truncated { .. })
        ));
        let mut future = bytes.clone();
        future[4..8].copy_from_slice(&2u32.to_le_bytes());
        assert_eq!(
            model_from_bytes(&future),
            Err(ModelFileError::UnsupportedVersion { found: 2 })
        );
        let mut magic = bytes.clone();
        magic[0] = b'X';
        assert_eq!(model_from_bytes(&magic), Err(ModelFileError::BadMagic));
        let mut long = bytes;
        long.push(0);
        assert_eq!(model_from_bytes(&long), Err(ModelFileError::TrailingBytes(1)));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let mut m = sample_model(gbm());
        m.scaler.means.pop();
        m.scaler.stds.pop();
        let bytes = model_to_bytes(&m);
        assert!(matches!(model_from_bytes(&bytes), Err(ModelFileError::Inconsistent(_))));
    }

    #[test]
    fn payload_is_readable_text() {
        let bytes = model_to_bytes(&sample_model(gbm()));
        let text = std::str::from_utf8(&bytes[HEADER_LEN..bytes.len() - 4]).unwrap();
        assert!(text.starts_with("crydetect-model\nsample_rate 16000\n"));
        assert!(text.contains("\ntree S 2 3fe0000000000000 L bff4000000000000 S 0 8000000000000000 "));
    }
}
