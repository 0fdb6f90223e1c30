//! Dataset manifest CSV: `id,path,label,participant,split`.

use std::collections::{BTreeSet, HashSet};
use std::fmt;
use std::path::{Path, PathBuf};

use thiserror::Error;

const HEADER: [&str; 5] = ["id", "path", "label", "participant", "split"];

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("failed to read manifest {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed manifest CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("manifest header is missing column `{0}`")]
    MissingColumn(&'static str),
    #[error("manifest header must be exactly `id,path,label,participant,split`, got `{0}`")]
    BadHeader(String),
    #[error("duplicate segment id `{0}`")]
    DuplicateId(String),
    #[error("line {line}: invalid label `{value}` (expected 0, 1, cry or notcry)")]
    InvalidLabel { line: u64, value: String },
    #[error("line {line}: invalid split `{value}` (expected train or test)")]
    InvalidSplit { line: u64, value: String },
    #[error("participants appear in both train and test splits: {}", .0.join(", "))]
    NotDisjoint(Vec<String>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ManifestEntry {
    pub id: String,
    pub path: PathBuf,
    /// 1 = cry, 0 = not cry.
    pub label: u8,
    pub participant: String,
    pub split: Split,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct DatasetManifest {
    pub entries: Vec<ManifestEntry>,
    /// Directory that relative entry paths are resolved against.
    pub base_dir: PathBuf,
}

impl DatasetManifest {
    pub fn new(entries: Vec<ManifestEntry>, base_dir: impl Into<PathBuf>) -> Self {
        Self {
            entries,
            base_dir: base_dir.into(),
        }
    }

    pub fn resolve(&self, entry: &ManifestEntry) -> PathBuf {
        if entry.path.is_absolute() {
            entry.path.clone()
        } else {
            self.base_dir.join(&entry.path)
        }
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }

    /// Restricts the manifest to one split, keeping `base_dir`.
    pub fn subset(&self, split: Split) -> DatasetManifest {
        DatasetManifest {
            entries: self.split(split).cloned().collect(),
            base_dir: self.base_dir.clone(),
        }
    }

    /// Participants present in both splits, sorted.
    pub fn overlapping_participants(&self) -> Vec<String> {
        let train: HashSet<&str> = self.split(Split::Train).map(|e| e.participant.as_str()).collect();
        let both: BTreeSet<&str> = self
            .split(Split::Test)
            .map(|e| e.participant.as_str())
            .filter(|p| train.contains(p))
            .collect();
        both.into_iter().map(str::to_owned).collect()
    }

    pub fn check_disjoint(&self) -> Result<(), ManifestError> {
        let overlap = self.overlapping_participants();
        if overlap.is_empty() {
            Ok(())
        } else {
            Err(ManifestError::NotDisjoint(overlap))
        }
    }
}

fn parse_label(raw: &str, line: u64) -> Result<u8, ManifestError> {
    match raw.trim() {
        "1" | "cry" => Ok(1),
        "0" | "notcry" => Ok(0),
        other => Err(ManifestError::InvalidLabel {
            line,
            value: other.to_owned(),
        }),
    }
}

fn parse_split(raw: &str, line: u64) -> Result<Split, ManifestError> {
    match raw.trim() {
        "train" => Ok(Split::Train),
        "test" => Ok(Split::Test),
        other => Err(ManifestError::InvalidSplit {
            line,
            value: other.to_owned(),
        }),
    }
}

/// Parses manifest text without the disjointness check.
pub fn parse_manifest(text: &str, base_dir: impl Into<PathBuf>) -> Result<DatasetManifest, ManifestError> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let headers = reader.headers()?.clone();
    for col in HEADER {
        if !headers.iter().any(|h| h == col) {
            return Err(ManifestError::MissingColumn(col));
        }
    }
    if headers.iter().ne(HEADER.iter().copied()) {
        return Err(ManifestError::BadHeader(headers.iter().collect::<Vec<_>>().join(",")));
    }

    let mut seen: HashSet<String> = HashSet::new();
    let mut entries = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line()).unwrap_or(0);
        let id = record[0].to_owned();
        if !seen.insert(id.clone()) {
            return Err(ManifestError::DuplicateId(id));
        }
        entries.push(ManifestEntry {
            id,
            path: PathBuf::from(&record[1]),
            label: parse_label(&record[2], line)?,
            participant: record[3].to_owned(),
            split: parse_split(&record[4], line)?,
        });
    }
    Ok(DatasetManifest::new(entries, base_dir))
}

/// Loads a manifest and enforces participant-disjoint splits.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest, ManifestError> {
    load_manifest_with(path, false)
}

/// Loads a manifest; `allow_overlap` skips the disjointness check.
pub fn load_manifest_with(path: impl AsRef<Path>, allow_overlap: bool) -> Result<DatasetManifest, ManifestError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ManifestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let manifest = parse_manifest(&text, base)?;
    if !allow_overlap {
        manifest.check_disjoint()?;
    }
    Ok(manifest)
}

pub fn write_manifest(manifest: &DatasetManifest, path: impl AsRef<Path>) -> Result<(), ManifestError> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record(HEADER)?;
    for e in &manifest.entries {
        writer.write_record([
            e.id.as_str(),
            &e.path.to_string_lossy(),
            if e.label == 1 { "1" } else { "0" },
            e.participant.as_str(),
            e.split.as_str(),
        ])?;
    }
    writer.flush().map_err(|source| ManifestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_rows_valid() {
        let m = parse_manifest(
            "id,path,label,participant,split\na,a.wav,1,A,train\nb,b.wav,0,B,test\n",
            "",
        )
        .unwrap();
        assert_eq!(m.entries.len(), 2);
        m.check_disjoint().unwrap();
    }

    #[test]
    fn overlap_lists_participant() {
        let m = parse_manifest(
            "id,path,label,participant,split\na,a.wav,1,A,train\nb,b.wav,0,A,test\nc,c.wav,0,B,test\n",
            "",
        )
        .unwrap();
        match m.check_disjoint() {
            Err(ManifestError::NotDisjoint(p)) => assert_eq!(p, vec!["A".to_owned()]),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn label_aliases() {
        let m = parse_manifest(
            "id,path,label,participant,split\na,a.wav,cry,A,train\nb,b.wav,notcry,A,train\n",
            "",
        )
        .unwrap();
        assert_eq!(m.entries[0].label, 1);
        assert_eq!(m.entries[1].label, 0);
    }

    #[test]
    fn distinct_errors() {
        let dup = parse_manifest("id,path,label,participant,split\na,x,1,A,train\na,y,0,A,train\n", "");
        assert!(matches!(dup, Err(ManifestError::DuplicateId(id)) if id == "a"));

        let bad = parse_manifest("id,path,label,participant,split\na,x,2,A,train\n", "");
        assert!(matches!(bad, Err(ManifestError::InvalidLabel { value, .. }) if value == "2"));

        let missing = parse_manifest("id,path,label,split\na,x,1,train\n", "");
        assert!(matches!(missing, Err(ManifestError::MissingColumn("participant"))));

        let split = parse_manifest("id,path,label,participant,split\na,x,1,A,dev\n", "");
        assert!(matches!(split, Err(ManifestError::InvalidSplit { .. })));

        let order = parse_manifest("path,id,label,participant,split\nx,a,1,A,train\n", "");
        assert!(matches!(order, Err(ManifestError::BadHeader(_))));
    }

    #[test]
    fn relative_paths_resolve_against_manifest_dir() {
        let m = parse_manifest("id,path,label,participant,split\na,wav/a.wav,1,A,train\n", "/data").unwrap();
        assert_eq!(m.resolve(&m.entries[0]), PathBuf::from("/data/wav/a.wav"));
    }

    fn entry_strategy() -> impl Strategy<Value = (String, String, u8, String, bool)> {
        (
            "[a-z0-9_]{1,8}",
            "[a-z0-9_/ ,\"]{1,12}\\.wav",
            0u8..2,
            "P[0-9]{1,2}",
            any::<bool>(),
        )
    }

    proptest! {
        #[test]
        fn write_then_load_is_identity(rows in proptest::collection::vec(entry_strategy(), 1..20)) {
            let mut ids = HashSet::new();
            let entries: Vec<ManifestEntry> = rows
                .into_iter()
                .filter(|r| ids.insert(r.0.clone()))
                .map(|(id, path, label, participant, train)| ManifestEntry {
                    id,
                    path: PathBuf::from(path),
                    label,
                    participant,
                    split: if train { Split::Train } else { Split::Test },
                })
                .collect();
            let dir = tempfile::tempdir().unwrap();
            let file = dir.path().join("m.csv");
            let m = DatasetManifest::new(entries, dir.path());
            write_manifest(&m, &file).unwrap();
            let back = load_manifest_with(&file, true).unwrap();
            prop_assert_eq!(back, m);
        }
    }
}
