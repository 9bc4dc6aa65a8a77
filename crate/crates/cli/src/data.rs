use crate::error::{config, data, CliError};
use crate::summary::Summary;
use crate::{ensure_dir, SeedArgs};
use clap::{Args, Subcommand, ValueEnum};
use serde::Serialize;
use std::path::{Path, PathBuf};
use teegen_core::datasets::{
    make_folds, mix, sample_fraction, split_by_count, split_by_subject, verify, verify_chain, CountGroup, DatasetError,
    DatasetManifest, SplitGroup, SubjectSelector,
};

#[derive(Subcommand, Debug)]
pub enum DataCommand {
    /// Partition a manifest into named groups.
    Split(SplitArgs),
    /// Draw percentage samples of a manifest.
    Sample(SampleArgs),
    /// Union of a real and a synthetic manifest.
    Mix(MixArgs),
    /// Subject-wise k-fold split with real-only validation folds.
    Folds(FoldsArgs),
    /// Structural checks, file existence and provenance replay.
    Verify(VerifyArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitBy {
    Subject,
    Count,
}

#[derive(Args, Debug)]
pub struct SplitArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, value_enum, default_value = "subject")]
    pub by: SplitBy,
    /// `name=N`, `name=rest`, or (subject splits) `name=ids:A,B,...`.
    /// Repeatable.
    #[arg(long = "group", required = true)]
    pub groups: Vec<String>,
    /// Directory receiving `<group>.jsonl`.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub seed: SeedArgs,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Percentage in (0, 100]; repeatable.
    #[arg(long = "percent", required = true)]
    pub percents: Vec<f64>,
    /// Draw each percentage independently instead of nested prefixes.
    #[arg(long)]
    pub independent: bool,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub seed: SeedArgs,
}

#[derive(Args, Debug)]
pub struct MixArgs {
    #[arg(long)]
    pub real: PathBuf,
    #[arg(long)]
    pub synthetic: PathBuf,
    #[arg(long)]
    pub name: String,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct FoldsArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Output JSON file.
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub seed: SeedArgs,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long)]
    pub manifest: PathBuf,
    /// Directory that relative image and label paths resolve against.
    #[arg(long)]
    pub base: Option<PathBuf>,
    /// Directory of ancestor manifests; the provenance chain is replayed.
    #[arg(long)]
    pub chain: Option<PathBuf>,
}

fn dataset_err(e: DatasetError) -> CliError {
    match e {
        DatasetError::InvalidPercent(_) | DatasetError::InvalidSplit(_) => CliError::Usage(e.to_string()),
        e => CliError::Data(e.to_string()),
    }
}

fn read(path: &Path) -> Result<DatasetManifest, CliError> {
    match DatasetManifest::read(path) {
        Err(DatasetError::Io { .. }) => Err(config(format!("cannot read manifest {}", path.display()))),
        r => r.map_err(dataset_err),
    }
}

fn write_all(out: &Path, manifests: &[DatasetManifest]) -> Result<Vec<String>, CliError> {
    ensure_dir(out)?;
    manifests
        .iter()
        .map(|m| {
            let name = format!("{}.jsonl", m.name);
            m.write(&out.join(&name)).map_err(dataset_err)?;
            Ok(name)
        })
        .collect()
}

#[derive(Serialize)]
struct Produced {
    name: String,
    images: usize,
    subjects: usize,
}

fn produced(ms: &[DatasetManifest]) -> Vec<Produced> {
    ms.iter()
        .map(|m| Produced {
            name: m.name.clone(),
            images: m.len(),
            subjects: m.subjects(None).len(),
        })
        .collect()
}

fn parse_subject_group(spec: &str) -> Result<SplitGroup, CliError> {
    let (name, sel) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("group `{spec}` is not name=selector")))?;
    let subjects = if sel == "rest" {
        SubjectSelector::Rest
    } else if let Some(ids) = sel.strip_prefix("ids:") {
        SubjectSelector::Ids(ids.split(',').filter(|s| !s.is_empty()).map(str::to_string).collect())
    } else {
        SubjectSelector::Count(sel.parse().map_err(|_| CliError::Usage(format!("group `{spec}`: bad count")))?)
    };
    Ok(SplitGroup { name: name.to_string(), subjects })
}

fn parse_count_group(spec: &str) -> Result<CountGroup, CliError> {
    let (name, sel) = spec
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("group `{spec}` is not name=count")))?;
    let count = if sel == "rest" {
        None
    } else {
        Some(sel.parse().map_err(|_| CliError::Usage(format!("group `{spec}`: bad count")))?)
    };
    Ok(CountGroup { name: name.to_string(), count })
}

fn manifests_in(dir: &Path) -> Result<Vec<DatasetManifest>, CliError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| config(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "jsonl"))
        .collect();
    paths.sort();
    paths.iter().map(|p| read(p)).collect()
}

pub fn run(cmd: DataCommand) -> Result<(Summary, Option<PathBuf>), CliError> {
    match cmd {
        DataCommand::Split(a) => {
            let m = read(&a.manifest)?;
            let parts = match a.by {
                SplitBy::Subject => {
                    let groups = a.groups.iter().map(|g| parse_subject_group(g)).collect::<Result<Vec<_>, _>>()?;
                    split_by_subject(&m, &groups, a.seed.seed)
                }
                SplitBy::Count => {
                    let groups = a.groups.iter().map(|g| parse_count_group(g)).collect::<Result<Vec<_>, _>>()?;
                    split_by_count(&m, &groups, a.seed.seed)
                }
            }
            .map_err(dataset_err)?;
            let files = write_all(&a.out, &parts)?;
            let summary = Summary::ok("data split", produced(&parts)).seed(a.seed.seed).files(files);
            Ok((summary, Some(a.out)))
        }
        DataCommand::Sample(a) => {
            let m = read(&a.manifest)?;
            let parts = a
                .percents
                .iter()
                .map(|&p| sample_fraction(&m, p, a.seed.seed, a.independent))
                .collect::<Result<Vec<_>, _>>()
                .map_err(dataset_err)?;
            let files = write_all(&a.out, &parts)?;
            let summary = Summary::ok("data sample", produced(&parts)).seed(a.seed.seed).files(files);
            Ok((summary, Some(a.out)))
        }
        DataCommand::Mix(a) => {
            let real = read(&a.real)?;
            let synthetic = read(&a.synthetic)?;
            let mixed = mix(&real, &synthetic, &a.name).map_err(dataset_err)?;
            let parts = [mixed];
            let files = write_all(&a.out, &parts)?;
            Ok((Summary::ok("data mix", produced(&parts)).files(files), Some(a.out)))
        }
        DataCommand::Folds(a) => {
            let m = read(&a.manifest)?;
            let folds = make_folds(&m, a.k, a.seed.seed).map_err(dataset_err)?;
            let text = serde_json::to_string_pretty(&folds).map_err(data)?;
            std::fs::write(&a.out, text).map_err(|e| CliError::Data(format!("{}: {e}", a.out.display())))?;
            let sizes: Vec<usize> = folds.folds.iter().map(|f| f.validation.len()).collect();
            let details = serde_json::json!({ "k": folds.k, "validation_sizes": sizes });
            Ok((Summary::ok("data folds", details).seed(a.seed.seed), None))
        }
        DataCommand::Verify(a) => {
            let m = read(&a.manifest)?;
            let report = verify(&m, a.base.as_deref());
            let mut problems = report.problems.clone();
            let mut chain_depth = None;
            if let Some(dir) = &a.chain {
                let pool = manifests_in(dir)?;
                match verify_chain(&m, &pool) {
                    Ok(d) => chain_depth = Some(d),
                    Err(e) => problems.push(format!("provenance: {e}")),
                }
            }
            let details = serde_json::json!({ "report": report, "chain_depth": chain_depth });
            let mut summary = Summary::ok("data verify", details);
            if !problems.is_empty() {
                summary = summary.failed("data", 2, problems.join("; "));
            }
            Ok((summary, None))
        }
    }
}
