use crate::error::{config, data, CliError};
use crate::generate::load_settings;
use crate::summary::Summary;
use crate::ensure_dir;
use clap::Args;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use teegen_core::anatomy::Label;
use teegen_core::datasets::DatasetManifest;
use teegen_core::imageio::{read_gray, read_mask, MaskImage};
use teegen_core::losses::LossFixture;
use teegen_core::metrics::{accumulate_stats, builtin_features, frechet_distance, mean_dice, read_feature_csv, write_feature_csv, DiceTable, MetricsError};
use teegen_core::pseudo::ConeSpec;

#[derive(Args, Debug)]
pub struct ScoreArgs {
    /// Feature CSV of the first image set.
    #[arg(long)]
    pub a: PathBuf,
    /// Feature CSV of the second image set.
    #[arg(long)]
    pub b: PathBuf,
    /// Also write the report to this JSON file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct FeaturesArgs {
    /// Directory of PNG or PGM images.
    #[arg(long)]
    pub images: PathBuf,
    /// Output CSV: `image_id,f0,...`.
    #[arg(long)]
    pub out: PathBuf,
    /// Pipeline settings JSON; its cone restricts the features. Defaults to
    /// the standard cone for each image's size.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct EvalSegArgs {
    /// Ground-truth masks, `<image_id>.png`.
    #[arg(long)]
    pub truth: PathBuf,
    /// One subdirectory per run, named `<source>_<column>`, holding
    /// predicted masks with the ground-truth file names.
    #[arg(long)]
    pub runs: PathBuf,
    /// Source whose runs the deltas are taken against.
    #[arg(long, default_value = "real")]
    pub baseline: String,
    /// Labels to score, comma separated. Default: every nonzero label
    /// present in either mask of a pair.
    #[arg(long, value_delimiter = ',')]
    pub labels: Vec<Label>,
    /// Restrict scoring to this manifest's image ids.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct LossesArgs {
    /// JSON fixture, or an array of fixtures, tagged by `loss`.
    #[arg(long)]
    pub fixture: PathBuf,
}

fn metrics_err(path: &Path, e: MetricsError) -> CliError {
    match e {
        MetricsError::Input(m) => CliError::Data(format!("{}: {m}", path.display())),
        e => CliError::Data(format!("{}: {e}", path.display())),
    }
}

#[derive(Serialize)]
struct SetSummary {
    path: PathBuf,
    count: u64,
    dim: usize,
}

#[derive(Serialize)]
struct ScoreReport {
    distance: f64,
    a: SetSummary,
    b: SetSummary,
}

pub fn score(args: ScoreArgs) -> Result<(Summary, Option<PathBuf>), CliError> {
    let load = |p: &Path| -> Result<_, CliError> {
        let rows = read_feature_csv(p).map_err(|e| metrics_err(p, e))?;
        accumulate_stats(rows.iter().map(|(_, v)| v.as_slice())).map_err(|e| metrics_err(p, e))
    };
    let a = load(&args.a)?;
    let b = load(&args.b)?;
    let distance = frechet_distance(&a, &b).map_err(data)?;
    let report = ScoreReport {
        distance,
        a: SetSummary { path: args.a.clone(), count: a.count, dim: a.dim },
        b: SetSummary { path: args.b.clone(), count: b.count, dim: b.dim },
    };
    if let Some(out) = &args.out {
        let text = serde_json::to_string_pretty(&report).map_err(data)?;
        std::fs::write(out, text).map_err(|e| CliError::Data(format!("{}: {e}", out.display())))?;
    }
    Ok((Summary::ok("score", report), None))
}

fn image_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| config(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "pgm"))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

pub fn features(args: FeaturesArgs) -> Result<(Summary, Option<PathBuf>), CliError> {
    let fixed_cone = match &args.config {
        Some(p) => Some(load_settings(Some(p))?.cone),
        None => None,
    };
    let files = image_files(&args.images)?;
    if files.is_empty() {
        return Err(CliError::Data(format!("{}: no images", args.images.display())));
    }
    let mut rows = Vec::with_capacity(files.len());
    for p in &files {
        let img = read_gray(p).map_err(data)?;
        let cone = fixed_cone.unwrap_or_else(|| ConeSpec::default_for(img.width, img.height));
        let f = builtin_features(img.width, img.height, &img.data, &cone).map_err(|e| metrics_err(p, e))?;
        rows.push((stem(p), f));
    }
    write_feature_csv(&args.out, &rows).map_err(|e| metrics_err(&args.out, e))?;
    let dim = rows.first().map_or(0, |r| r.1.len());
    Ok((Summary::ok("features", serde_json::json!({ "images": rows.len(), "dim": dim })), None))
}

#[derive(Debug, Serialize, Deserialize)]
struct RunResult {
    run: String,
    source: String,
    column: String,
    /// Mean Dice ×100 over scored images; absent when nothing was scored.
    mean: Option<f64>,
    complete: bool,
    missing: Vec<String>,
    per_image: BTreeMap<String, f64>,
}

#[derive(Serialize)]
struct EvalDetails {
    images: usize,
    runs: Vec<RunResult>,
    table: DiceTable,
}

/// `<source>_<column>`; a name without `_` is a single-column run.
fn split_run_name(name: &str) -> (String, String) {
    match name.rsplit_once('_') {
        Some((s, c)) if !s.is_empty() && !c.is_empty() => (s.to_string(), c.to_string()),
        _ => (name.to_string(), "all".to_string()),
    }
}

fn load_truth(args: &EvalSegArgs) -> Result<BTreeMap<String, MaskImage>, CliError> {
    let wanted: Option<BTreeSet<String>> = match &args.manifest {
        Some(p) => {
            let m = DatasetManifest::read(p).map_err(config)?;
            Some(m.entries.into_iter().map(|e| e.image_id).collect())
        }
        None => None,
    };
    let mut truth = BTreeMap::new();
    for p in image_files(&args.truth)? {
        let id = stem(&p);
        if wanted.as_ref().is_some_and(|w| !w.contains(&id)) {
            continue;
        }
        truth.insert(id, read_mask(&p).map_err(data)?);
    }
    if let Some(w) = &wanted {
        if let Some(id) = w.iter().find(|id| !truth.contains_key(*id)) {
            return Err(CliError::Data(format!("ground truth for `{id}` not found")));
        }
    }
    if truth.is_empty() {
        return Err(CliError::Data(format!("{}: no ground-truth masks", args.truth.display())));
    }
    Ok(truth)
}

fn score_run(dir: &Path, truth: &BTreeMap<String, MaskImage>, labels: &[Label]) -> Result<RunResult, CliError> {
    let name = stem(dir);
    let (source, column) = split_run_name(&name);
    let mut per_image = BTreeMap::new();
    let mut missing = Vec::new();
    for (id, t) in truth {
        let p = dir.join(format!("{id}.png"));
        if !p.is_file() {
            missing.push(id.clone());
            continue;
        }
        let pred = read_mask(&p).map_err(data)?;
        if (pred.width, pred.height) != (t.width, t.height) {
            return Err(CliError::Data(format!(
                "{}: {}x{} prediction for a {}x{} mask",
                p.display(),
                pred.width,
                pred.height,
                t.width,
                t.height
            )));
        }
        per_image.insert(id.clone(), mean_dice(&pred.labels, &t.labels, labels).map_err(data)?);
    }
    let mean = (!per_image.is_empty()).then(|| 100.0 * per_image.values().sum::<f64>() / per_image.len() as f64);
    Ok(RunResult {
        run: name,
        source,
        column,
        mean,
        complete: missing.is_empty(),
        missing,
        per_image,
    })
}

pub fn eval_seg(args: EvalSegArgs) -> Result<(Summary, Option<PathBuf>), CliError> {
    let truth = load_truth(&args)?;
    let mut run_dirs: Vec<PathBuf> = std::fs::read_dir(&args.runs)
        .map_err(|e| config(format!("{}: {e}", args.runs.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    run_dirs.sort();
    if run_dirs.is_empty() {
        return Err(CliError::Data(format!("{}: no run directories", args.runs.display())));
    }
    let runs = run_dirs
        .iter()
        .map(|d| score_run(d, &truth, &args.labels))
        .collect::<Result<Vec<_>, _>>()?;

    let mut sources: Vec<String> = vec![args.baseline.clone()];
    let mut columns: Vec<String> = Vec::new();
    let mut cells = BTreeMap::new();
    for r in &runs {
        if !sources.contains(&r.source) {
            sources.push(r.source.clone());
        }
        if !columns.contains(&r.column) {
            columns.push(r.column.clone());
        }
        if let Some(m) = r.mean {
            cells.insert((r.source.clone(), r.column.clone()), m);
        }
    }
    if !runs.iter().any(|r| r.source == args.baseline) {
        return Err(CliError::Config(format!("no run for baseline source `{}`", args.baseline)));
    }
    let table = DiceTable::build(&sources, &columns, &args.baseline, &cells);

    ensure_dir(&args.out)?;
    let details = EvalDetails { images: truth.len(), runs, table };
    std::fs::write(args.out.join("dice.json"), serde_json::to_string_pretty(&details).map_err(data)?).map_err(data)?;
    std::fs::write(args.out.join("table.txt"), details.table.render()).map_err(data)?;
    let incomplete: Vec<&str> = details.runs.iter().filter(|r| !r.complete).map(|r| r.run.as_str()).collect();
    let mut summary = Summary::ok("eval-seg", &details).files(vec!["dice.json".into(), "table.txt".into()]);
    if !incomplete.is_empty() {
        summary = summary.partial(format!("runs missing predictions: {}", incomplete.join(", ")));
    }
    Ok((summary, Some(args.out)))
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Fixtures {
    Many(Vec<LossFixture>),
    One(LossFixture),
}

#[derive(Serialize)]
struct LossValue {
    loss: &'static str,
    value: f64,
}

pub fn losses(args: LossesArgs) -> Result<(Summary, Option<PathBuf>), CliError> {
    let text = std::fs::read_to_string(&args.fixture).map_err(|e| config(format!("{}: {e}", args.fixture.display())))?;
    let fixtures = match serde_json::from_str(&text).map_err(|e| CliError::Data(format!("{}: {e}", args.fixture.display())))? {
        Fixtures::Many(v) => v,
        Fixtures::One(f) => vec![f],
    };
    let values = fixtures
        .iter()
        .enumerate()
        .map(|(i, f)| {
            f.evaluate()
                .map(|value| LossValue { loss: f.name(), value })
                .map_err(|e| CliError::Data(format!("fixture {i} ({}): {e}", f.name())))
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok((Summary::ok("losses-eval", values), None))
}
