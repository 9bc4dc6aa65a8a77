//! Image manifests with subject ids and provenance, and the operations
//! that derive training/evaluation sets from them.

mod ops;

pub use ops::{
    make_folds, mix, replay, sample_fraction, split_by_count, split_by_subject, verify, verify_chain, CountGroup,
    Fold, Folds, SplitGroup, SubjectSelector, VerifyReport,
};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeSet;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path} line {line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("duplicate image id `{0}`")]
    DuplicateId(String),
    #[error("image `{0}` has no subject id")]
    MissingSubject(String),
    #[error("requested {requested} {what} but only {available} available")]
    OverRequested {
        what: &'static str,
        requested: usize,
        available: usize,
    },
    #[error("unknown subject `{0}`")]
    UnknownSubject(String),
    #[error("subject `{0}` requested by more than one group")]
    SubjectClaimedTwice(String),
    #[error("subject `{subject}` appears on both real and {origin} entries")]
    SubjectCollision { subject: String, origin: Origin },
    #[error("percent {0} must lie in (0, 100]")]
    InvalidPercent(f64),
    #[error("sampling {percent}% of {total} images selects nothing")]
    EmptySample { percent: f64, total: usize },
    #[error("need at least {k} real subjects for {k} folds, found {available}")]
    TooFewSubjects { k: usize, available: usize },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("provenance: {0}")]
    Provenance(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Origin {
    Real,
    Pseudo,
    SyntheticCut,
    SyntheticCyc,
}

impl std::fmt::Display for Origin {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Origin::Real => "real",
            Origin::Pseudo => "pseudo",
            Origin::SyntheticCut => "synthetic_cut",
            Origin::SyntheticCyc => "synthetic_cyc",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub image_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject_id: Option<String>,
    pub origin: Origin,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image_path: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label_path: Option<String>,
}

impl ManifestEntry {
    pub fn new(image_id: impl Into<String>, subject_id: Option<&str>, origin: Origin) -> Self {
        Self {
            image_id: image_id.into(),
            subject_id: subject_id.map(str::to_string),
            origin,
            image_path: None,
            label_path: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParentRef {
    pub name: String,
    pub digest: String,
}

/// How a manifest was derived from its parents; enough to re-run it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Operation {
    SplitBySubject {
        groups: Vec<SplitGroup>,
        seed: u64,
        output: String,
    },
    SplitByCount {
        groups: Vec<CountGroup>,
        seed: u64,
        output: String,
    },
    Sample {
        percent: f64,
        seed: u64,
        independent: bool,
    },
    Mix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub parents: Vec<ParentRef>,
    pub operation: Operation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub provenance: Option<Provenance>,
    pub entries: Vec<ManifestEntry>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    manifest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    provenance: Option<Provenance>,
}

impl DatasetManifest {
    pub fn new(name: impl Into<String>, entries: Vec<ManifestEntry>) -> Self {
        Self {
            name: name.into(),
            provenance: None,
            entries,
        }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// SHA-256 over the name and entries, hex encoded.
    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.name.as_bytes());
        h.update([0]);
        for e in &self.entries {
            h.update(serde_json::to_vec(e).expect("entry serializes"));
            h.update(b"\n");
        }
        hex::encode(h.finalize())
    }

    pub fn parent_ref(&self) -> ParentRef {
        ParentRef {
            name: self.name.clone(),
            digest: self.digest(),
        }
    }

    pub fn ids(&self) -> BTreeSet<&str> {
        self.entries.iter().map(|e| e.image_id.as_str()).collect()
    }

    /// Distinct subject ids of entries with the given origin.
    pub fn subjects(&self, origin: Option<Origin>) -> BTreeSet<&str> {
        self.entries
            .iter()
            .filter(|e| origin.is_none_or(|o| o == e.origin))
            .filter_map(|e| e.subject_id.as_deref())
            .collect()
    }

    pub fn count_origin(&self, origin: Origin) -> usize {
        self.entries.iter().filter(|e| e.origin == origin).count()
    }

    /// Unique ids and no subject shared between real and non-real entries.
    pub fn validate(&self) -> Result<(), DatasetError> {
        let mut seen = BTreeSet::new();
        for e in &self.entries {
            if !seen.insert(e.image_id.as_str()) {
                return Err(DatasetError::DuplicateId(e.image_id.clone()));
            }
        }
        let real = self.subjects(Some(Origin::Real));
        for e in self.entries.iter().filter(|e| e.origin != Origin::Real) {
            if let Some(s) = &e.subject_id {
                if real.contains(s.as_str()) {
                    return Err(DatasetError::SubjectCollision {
                        subject: s.clone(),
                        origin: e.origin,
                    });
                }
            }
        }
        Ok(())
    }

    pub fn to_jsonl(&self) -> String {
        let header = Header {
            manifest: self.name.clone(),
            provenance: self.provenance.clone(),
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for e in &self.entries {
            out.push_str(&serde_json::to_string(e).expect("entry serializes"));
            out.push('\n');
        }
        out
    }

    /// Parses JSON Lines. A leading `{"manifest": ...}` line carries the
    /// name and provenance; otherwise `fallback_name` is used.
    pub fn from_jsonl(text: &str, fallback_name: &str, path: &Path) -> Result<Self, DatasetError> {
        let mut name = fallback_name.to_string();
        let mut provenance = None;
        let mut entries = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| DatasetError::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                message,
            };
            let value: serde_json::Value = serde_json::from_str(line).map_err(|e| err(e.to_string()))?;
            if value.get("manifest").is_some() {
                if !entries.is_empty() {
                    return Err(err("manifest header after entries".into()));
                }
                let h: Header = serde_json::from_value(value).map_err(|e| err(e.to_string()))?;
                name = h.manifest;
                provenance = h.provenance;
            } else {
                entries.push(serde_json::from_value(value).map_err(|e| err(e.to_string()))?);
            }
        }
        Ok(Self {
            name,
            provenance,
            entries,
        })
    }

    pub fn read(path: &Path) -> Result<Self, DatasetError> {
        let text = fs::read_to_string(path).map_err(|source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let stem = path.file_stem().and_then(|s| s.to_str()).unwrap_or("manifest");
        Self::from_jsonl(&text, stem, path)
    }

    pub fn write(&self, path: &Path) -> Result<(), DatasetError> {
        let io = |source| DatasetError::Io {
            path: path.to_path_buf(),
            source,
        };
        let mut f = fs::File::create(path).map_err(io)?;
        f.write_all(self.to_jsonl().as_bytes()).map_err(io)
    }
}
