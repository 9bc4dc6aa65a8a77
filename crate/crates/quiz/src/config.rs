use crate::QuizError;
use serde::{Deserialize, Serialize};
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use teegen_core::datasets::{DatasetManifest, Origin};
use teegen_core::metrics::Generator;

pub const DEFAULT_FAMILIARIZATION_COUNT: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolImage {
    pub image_id: String,
    pub source: Generator,
    pub path: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuizCounts {
    pub real: usize,
    pub cut: usize,
    pub cyclegan: usize,
}

impl Default for QuizCounts {
    fn default() -> Self {
        Self {
            real: 60,
            cut: 30,
            cyclegan: 30,
        }
    }
}

impl QuizCounts {
    pub fn total(&self) -> usize {
        self.real + self.cut + self.cyclegan
    }

    pub fn of(&self, g: Generator) -> usize {
        match g {
            Generator::None => self.real,
            Generator::Cut => self.cut,
            Generator::Cyclegan => self.cyclegan,
        }
    }
}

/// Manifest whose entries (with `image_path`) join the pool. The source
/// tag comes from each entry's origin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRef {
    pub path: PathBuf,
}

fn default_true() -> bool {
    true
}

fn default_fam() -> usize {
    DEFAULT_FAMILIARIZATION_COUNT
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuizConfig {
    #[serde(default)]
    pub pool: Vec<PoolImage>,
    #[serde(default)]
    pub manifests: Vec<ManifestRef>,
    #[serde(default)]
    pub counts: QuizCounts,
    /// Real images shown before scoring. When absent, this many real
    /// images are drawn from the pool with the shuffle seed.
    #[serde(default)]
    pub familiarization: Option<Vec<String>>,
    #[serde(default = "default_fam")]
    pub familiarization_count: usize,
    #[serde(default)]
    pub shuffle_seed: u64,
    #[serde(default = "default_true")]
    pub allow_revisit: bool,
}

impl QuizConfig {
    pub fn new(pool: Vec<PoolImage>) -> Self {
        Self {
            pool,
            manifests: Vec::new(),
            counts: QuizCounts::default(),
            familiarization: None,
            familiarization_count: DEFAULT_FAMILIARIZATION_COUNT,
            shuffle_seed: 0,
            allow_revisit: true,
        }
    }

    /// Reads JSON; relative image and manifest paths resolve against the
    /// config file's directory, and manifest entries are folded into `pool`.
    pub fn load(path: &Path) -> Result<Self, QuizError> {
        let text = std::fs::read_to_string(path).map_err(|e| QuizError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: QuizConfig =
            serde_json::from_str(&text).map_err(|e| QuizError::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in &mut cfg.pool {
            if p.path.is_relative() {
                p.path = base.join(&p.path);
            }
        }
        for m in std::mem::take(&mut cfg.manifests) {
            let mpath = if m.path.is_relative() { base.join(&m.path) } else { m.path.clone() };
            let manifest = DatasetManifest::read(&mpath).map_err(|e| QuizError::Config(e.to_string()))?;
            let mbase = mpath.parent().unwrap_or(Path::new("."));
            for e in manifest.entries {
                let source = match e.origin {
                    Origin::Real => Generator::None,
                    Origin::SyntheticCut => Generator::Cut,
                    Origin::SyntheticCyc => Generator::Cyclegan,
                    Origin::Pseudo => {
                        return Err(QuizError::Config(format!(
                            "{}: pseudo image `{}` cannot be a quiz item",
                            mpath.display(),
                            e.image_id
                        )))
                    }
                };
                let image_path = e.image_path.ok_or_else(|| {
                    QuizError::Config(format!("{}: `{}` has no image_path", mpath.display(), e.image_id))
                })?;
                cfg.pool.push(PoolImage {
                    image_id: e.image_id,
                    source,
                    path: mbase.join(image_path),
                });
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), QuizError> {
        let mut ids = BTreeSet::new();
        for p in &self.pool {
            if !ids.insert(p.image_id.as_str()) {
                return Err(QuizError::Config(format!("duplicate pool image `{}`", p.image_id)));
            }
        }
        if let Some(fam) = &self.familiarization {
            for id in fam {
                match self.pool.iter().find(|p| &p.image_id == id) {
                    None => return Err(QuizError::Config(format!("familiarization image `{id}` not in pool"))),
                    Some(p) if p.source != Generator::None => {
                        return Err(QuizError::Config(format!("familiarization image `{id}` is not real")))
                    }
                    _ => {}
                }
            }
        }
        let fam = self.familiarization_ids();
        for g in [Generator::None, Generator::Cut, Generator::Cyclegan] {
            let available = self
                .pool
                .iter()
                .filter(|p| p.source == g && !fam.contains(&p.image_id))
                .count();
            if self.counts.of(g) > available {
                return Err(QuizError::InsufficientPool {
                    generator: g,
                    requested: self.counts.of(g),
                    available,
                });
            }
        }
        if self.counts.total() == 0 {
            return Err(QuizError::Config("quiz must score at least one image".into()));
        }
        Ok(())
    }

    /// Familiarization image ids, excluded from scoring.
    pub fn familiarization_ids(&self) -> Vec<String> {
        if let Some(f) = &self.familiarization {
            return f.clone();
        }
        use rand::seq::SliceRandom;
        let mut real: Vec<&str> = self
            .pool
            .iter()
            .filter(|p| p.source == Generator::None)
            .map(|p| p.image_id.as_str())
            .collect();
        real.sort_unstable();
        let mut rng = teegen_core::rng::stream_rng(self.shuffle_seed, u64::MAX);
        real.shuffle(&mut rng);
        // Keep enough real images to score.
        let spare = real.len().saturating_sub(self.counts.real);
        real.into_iter()
            .take(self.familiarization_count.min(spare))
            .map(str::to_string)
            .collect()
    }
}
