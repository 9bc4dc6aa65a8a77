use super::{DatasetError, DatasetManifest, ManifestEntry, Operation, Origin, ParentRef, Provenance};
use crate::rng::{salted_seed, stream_rng};
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SubjectSelector {
    /// This many subjects drawn at random from those not named explicitly.
    Count(usize),
    Ids(Vec<String>),
    /// Every subject not taken by another group.
    Rest,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitGroup {
    pub name: String,
    pub subjects: SubjectSelector,
}

/// Image-level group; `count: None` takes the rest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountGroup {
    pub name: String,
    pub count: Option<usize>,
}

fn shuffled<T: Clone>(items: &[T], seed: u64) -> Vec<T> {
    let mut v = items.to_vec();
    v.shuffle(&mut stream_rng(seed, 0));
    v
}

fn derived(
    parent: &DatasetManifest,
    name: String,
    operation: Operation,
    keep: impl Fn(&ManifestEntry) -> bool,
) -> DatasetManifest {
    DatasetManifest {
        name,
        provenance: Some(Provenance {
            parents: vec![parent.parent_ref()],
            operation,
        }),
        entries: parent.entries.iter().filter(|e| keep(e)).cloned().collect(),
    }
}

fn remainder_name(parent: &str) -> String {
    format!("{parent}_remainder")
}

fn check_group_names<'a>(names: impl Iterator<Item = &'a str>) -> Result<(), DatasetError> {
    let mut seen = BTreeSet::new();
    for n in names {
        if n.is_empty() || !seen.insert(n) {
            return Err(DatasetError::InvalidSplit(format!("group name `{n}` empty or repeated")));
        }
    }
    Ok(())
}

/// Partitions subjects into the named groups. Explicit ids are claimed
/// first, then counted groups draw from a seeded shuffle of the rest.
/// Subjects left over with no `Rest` group go to `<name>_remainder`.
pub fn split_by_subject(
    manifest: &DatasetManifest,
    groups: &[SplitGroup],
    seed: u64,
) -> Result<Vec<DatasetManifest>, DatasetError> {
    check_group_names(groups.iter().map(|g| g.name.as_str()))?;
    if groups.iter().filter(|g| g.subjects == SubjectSelector::Rest).count() > 1 {
        return Err(DatasetError::InvalidSplit("at most one rest group".into()));
    }
    if let Some(e) = manifest.entries.iter().find(|e| e.subject_id.is_none()) {
        return Err(DatasetError::MissingSubject(e.image_id.clone()));
    }
    let all: BTreeSet<&str> = manifest.subjects(None);
    let mut owner: BTreeMap<&str, usize> = BTreeMap::new();
    for (gi, g) in groups.iter().enumerate() {
        if let SubjectSelector::Ids(ids) = &g.subjects {
            for id in ids {
                let s = *all.get(id.as_str()).ok_or_else(|| DatasetError::UnknownSubject(id.clone()))?;
                if owner.insert(s, gi).is_some() {
                    return Err(DatasetError::SubjectClaimedTwice(id.clone()));
                }
            }
        }
    }
    let free: Vec<&str> = all.iter().copied().filter(|s| !owner.contains_key(s)).collect();
    let requested: usize = groups
        .iter()
        .map(|g| match g.subjects {
            SubjectSelector::Count(n) => n,
            _ => 0,
        })
        .sum();
    if requested > free.len() {
        return Err(DatasetError::OverRequested {
            what: "subjects",
            requested,
            available: free.len(),
        });
    }
    let mut pool = shuffled(&free, seed).into_iter();
    let mut rest_group = None;
    for (gi, g) in groups.iter().enumerate() {
        match g.subjects {
            SubjectSelector::Count(n) => {
                for s in pool.by_ref().take(n) {
                    owner.insert(s, gi);
                }
            }
            SubjectSelector::Rest => rest_group = Some(gi),
            SubjectSelector::Ids(_) => {}
        }
    }
    let leftover: Vec<&str> = pool.collect();
    let extra = (!leftover.is_empty() && rest_group.is_none()).then_some(groups.len());
    for s in leftover {
        owner.insert(s, rest_group.or(extra).expect("a group takes the leftovers"));
    }

    let mut names: Vec<String> = groups.iter().map(|g| g.name.clone()).collect();
    if extra.is_some() {
        names.push(remainder_name(&manifest.name));
    }
    check_group_names(names.iter().map(String::as_str))?;
    Ok(names
        .iter()
        .enumerate()
        .map(|(gi, name)| {
            let op = Operation::SplitBySubject {
                groups: groups.to_vec(),
                seed,
                output: name.clone(),
            };
            derived(manifest, name.clone(), op, |e| {
                owner[e.subject_id.as_deref().expect("checked above")] == gi
            })
        })
        .collect())
}

/// Image-level partition into groups of fixed size, ignoring subjects.
pub fn split_by_count(
    manifest: &DatasetManifest,
    groups: &[CountGroup],
    seed: u64,
) -> Result<Vec<DatasetManifest>, DatasetError> {
    check_group_names(groups.iter().map(|g| g.name.as_str()))?;
    if groups.iter().filter(|g| g.count.is_none()).count() > 1 {
        return Err(DatasetError::InvalidSplit("at most one rest group".into()));
    }
    let requested: usize = groups.iter().filter_map(|g| g.count).sum();
    if requested > manifest.len() {
        return Err(DatasetError::OverRequested {
            what: "images",
            requested,
            available: manifest.len(),
        });
    }
    let order = shuffled(&(0..manifest.len()).collect::<Vec<_>>(), seed);
    let mut owner = vec![usize::MAX; manifest.len()];
    let mut it = order.into_iter();
    let rest = groups.iter().position(|g| g.count.is_none());
    for (gi, g) in groups.iter().enumerate() {
        if let Some(n) = g.count {
            for i in it.by_ref().take(n) {
                owner[i] = gi;
            }
        }
    }
    let leftover: Vec<usize> = it.collect();
    let extra = (!leftover.is_empty() && rest.is_none()).then_some(groups.len());
    for i in leftover {
        owner[i] = rest.or(extra).expect("a group takes the leftovers");
    }
    let mut names: Vec<String> = groups.iter().map(|g| g.name.clone()).collect();
    if extra.is_some() {
        names.push(remainder_name(&manifest.name));
    }
    check_group_names(names.iter().map(String::as_str))?;
    let index: BTreeMap<&str, usize> = manifest
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| (e.image_id.as_str(), i))
        .collect();
    Ok(names
        .iter()
        .enumerate()
        .map(|(gi, name)| {
            let op = Operation::SplitByCount {
                groups: groups.to_vec(),
                seed,
                output: name.clone(),
            };
            derived(manifest, name.clone(), op, |e| owner[index[e.image_id.as_str()]] == gi)
        })
        .collect())
}

/// Uniform sample of `round(percent/100·N)` images. With a shared seed,
/// samples are prefixes of one permutation and therefore nested unless
/// `independent` is set, which draws a fresh permutation per percentage.
pub fn sample_fraction(
    manifest: &DatasetManifest,
    percent: f64,
    seed: u64,
    independent: bool,
) -> Result<DatasetManifest, DatasetError> {
    if !(percent > 0.0 && percent <= 100.0) {
        return Err(DatasetError::InvalidPercent(percent));
    }
    let n = manifest.len();
    let k = (percent / 100.0 * n as f64).round() as usize;
    if k == 0 {
        return Err(DatasetError::EmptySample { percent, total: n });
    }
    let perm_seed = if independent {
        salted_seed(seed, &format!("percent={percent}"))
    } else {
        seed
    };
    let order = shuffled(&(0..n).collect::<Vec<_>>(), perm_seed);
    let mut keep = vec![false; n];
    for &i in &order[..k] {
        keep[i] = true;
    }
    let index: BTreeMap<&str, usize> = manifest
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| (e.image_id.as_str(), i))
        .collect();
    let name = format!("{}_p{}", manifest.name, percent);
    let op = Operation::Sample {
        percent,
        seed,
        independent,
    };
    Ok(derived(manifest, name, op, |e| keep[index[e.image_id.as_str()]]))
}

/// Concatenates two manifests, keeping origins.
pub fn mix(real: &DatasetManifest, synthetic: &DatasetManifest, name: &str) -> Result<DatasetManifest, DatasetError> {
    let ids = real.ids();
    if let Some(e) = synthetic.entries.iter().find(|e| ids.contains(e.image_id.as_str())) {
        return Err(DatasetError::DuplicateId(e.image_id.clone()));
    }
    let out = DatasetManifest {
        name: name.to_string(),
        provenance: Some(Provenance {
            parents: vec![real.parent_ref(), synthetic.parent_ref()],
            operation: Operation::Mix,
        }),
        entries: real.entries.iter().chain(&synthetic.entries).cloned().collect(),
    };
    out.validate()?;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fold {
    pub index: usize,
    pub validation_subjects: Vec<String>,
    pub validation: Vec<String>,
    pub train: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Folds {
    pub manifest: String,
    pub k: usize,
    pub seed: u64,
    pub folds: Vec<Fold>,
}

/// Subject-wise k-fold split of the real images. Non-real images join every
/// training split and no validation split. Subjects are dealt largest
/// first to the currently smallest fold.
pub fn make_folds(manifest: &DatasetManifest, k: usize, seed: u64) -> Result<Folds, DatasetError> {
    if k < 2 {
        return Err(DatasetError::InvalidSplit("need k >= 2".into()));
    }
    let real: Vec<&ManifestEntry> = manifest.entries.iter().filter(|e| e.origin == Origin::Real).collect();
    if let Some(e) = real.iter().find(|e| e.subject_id.is_none()) {
        return Err(DatasetError::MissingSubject(e.image_id.clone()));
    }
    let mut sizes: BTreeMap<&str, usize> = BTreeMap::new();
    for e in &real {
        *sizes.entry(e.subject_id.as_deref().expect("checked")).or_default() += 1;
    }
    if sizes.len() < k {
        return Err(DatasetError::TooFewSubjects {
            k,
            available: sizes.len(),
        });
    }
    let mut subjects = shuffled(&sizes.keys().copied().collect::<Vec<_>>(), seed);
    subjects.sort_by_key(|s| std::cmp::Reverse(sizes[s]));
    let mut load = vec![0usize; k];
    let mut fold_of: BTreeMap<&str, usize> = BTreeMap::new();
    for s in subjects {
        let f = (0..k).min_by_key(|&f| (load[f], f)).expect("k >= 2");
        load[f] += sizes[s];
        fold_of.insert(s, f);
    }
    let folds = (0..k)
        .map(|f| {
            let in_val = |e: &ManifestEntry| {
                e.origin == Origin::Real && fold_of[e.subject_id.as_deref().expect("checked")] == f
            };
            Fold {
                index: f,
                validation_subjects: fold_of
                    .iter()
                    .filter(|(_, &g)| g == f)
                    .map(|(s, _)| s.to_string())
                    .collect(),
                validation: manifest.entries.iter().filter(|e| in_val(e)).map(|e| e.image_id.clone()).collect(),
                train: manifest.entries.iter().filter(|e| !in_val(e)).map(|e| e.image_id.clone()).collect(),
            }
        })
        .collect();
    Ok(Folds {
        manifest: manifest.name.clone(),
        k,
        seed,
        folds,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub manifest: String,
    pub entries: usize,
    pub by_origin: BTreeMap<String, usize>,
    pub subjects: usize,
    pub problems: Vec<String>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.problems.is_empty()
    }
}

/// Structural checks plus, when `base_dir` is given, existence of every
/// referenced image and label file (relative paths resolve against it).
pub fn verify(manifest: &DatasetManifest, base_dir: Option<&Path>) -> VerifyReport {
    let mut problems = Vec::new();
    if let Err(e) = manifest.validate() {
        problems.push(e.to_string());
    }
    if let Some(base) = base_dir {
        for e in &manifest.entries {
            for (kind, p) in [("image", &e.image_path), ("label", &e.label_path)] {
                if let Some(p) = p {
                    let path = base.join(p);
                    if !path.exists() {
                        problems.push(format!("{}: {kind} file {} missing", e.image_id, path.display()));
                    }
                }
            }
        }
    }
    let mut by_origin = BTreeMap::new();
    for e in &manifest.entries {
        *by_origin.entry(e.origin.to_string()).or_default() += 1;
    }
    VerifyReport {
        manifest: manifest.name.clone(),
        entries: manifest.len(),
        by_origin,
        subjects: manifest.subjects(None).len(),
        problems,
    }
}

/// Re-runs the operation that produced `manifest` on `parents` (in
/// provenance order).
pub fn replay(manifest: &DatasetManifest, parents: &[&DatasetManifest]) -> Result<DatasetManifest, DatasetError> {
    let prov = manifest
        .provenance
        .as_ref()
        .ok_or_else(|| DatasetError::Provenance(format!("`{}` is a root manifest", manifest.name)))?;
    if parents.len() != prov.parents.len() {
        return Err(DatasetError::Provenance(format!(
            "`{}` has {} parents, {} given",
            manifest.name,
            prov.parents.len(),
            parents.len()
        )));
    }
    for (p, r) in parents.iter().zip(&prov.parents) {
        if p.name != r.name || p.digest() != r.digest {
            return Err(DatasetError::Provenance(format!("parent `{}` does not match its recorded digest", r.name)));
        }
    }
    let pick = |outs: Vec<DatasetManifest>, output: &str| {
        outs.into_iter()
            .find(|m| m.name == output)
            .ok_or_else(|| DatasetError::Provenance(format!("replay produced no `{output}`")))
    };
    match &prov.operation {
        Operation::SplitBySubject { groups, seed, output } => pick(split_by_subject(parents[0], groups, *seed)?, output),
        Operation::SplitByCount { groups, seed, output } => pick(split_by_count(parents[0], groups, *seed)?, output),
        Operation::Sample { percent, seed, independent } => sample_fraction(parents[0], *percent, *seed, *independent),
        Operation::Mix => mix(parents[0], parents[1], &manifest.name),
    }
}

/// Walks the provenance chain back to root manifests found in `pool`,
/// replaying every step and comparing with the recorded manifest.
pub fn verify_chain(manifest: &DatasetManifest, pool: &[DatasetManifest]) -> Result<usize, DatasetError> {
    let Some(prov) = &manifest.provenance else {
        return Ok(0);
    };
    let mut parents = Vec::new();
    let mut depth = 0;
    for ParentRef { name, digest } in &prov.parents {
        let p = pool
            .iter()
            .find(|m| &m.name == name && &m.digest() == digest)
            .ok_or_else(|| DatasetError::Provenance(format!("parent `{name}` ({digest}) not available")))?;
        depth = depth.max(verify_chain(p, pool)?);
        parents.push(p);
    }
    let again = replay(manifest, &parents)?;
    if again != *manifest {
        return Err(DatasetError::Provenance(format!("replaying `{}` gives different entries", manifest.name)));
    }
    Ok(depth + 1)
}
