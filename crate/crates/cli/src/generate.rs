use crate::error::{config, data, CliError};
use crate::models::load_models;
use crate::summary::Summary;
use crate::{ensure_dir, SeedArgs};
use clap::Args;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use teegen_core::anatomy::LabeledMesh;
use teegen_core::datasets::{DatasetManifest, ManifestEntry, Origin};
use teegen_core::imageio::{write_gray, write_label_table, write_mask_png, ImageFormat};
use teegen_core::phantom::{phantom_population, PhantomVariation};
use teegen_core::pseudo::{generate_batch, ConeSpec, PaletteSpec, PipelineSettings, PseudoError, TransformParams};
use teegen_core::view::{builtin_view, RasterSpec, ViewDefinition, BUILTIN_VIEW_NAMES};

#[derive(Args, Debug)]
pub struct GenerateArgs {
    /// Directory of mesh files. Without it a phantom population is used.
    #[arg(long)]
    pub models: Option<PathBuf>,
    /// Size of the phantom population when `--models` is absent.
    #[arg(long, default_value_t = 8)]
    pub phantoms: usize,
    /// Standard view name, repeatable; `all` selects every shipped view.
    /// ME4CH when neither this nor `--view-file` is given.
    #[arg(long = "view")]
    pub views: Vec<String>,
    /// A view definition JSON file, repeatable.
    #[arg(long = "view-file")]
    pub view_files: Vec<PathBuf>,
    /// Images per view.
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    #[arg(long)]
    pub out: PathBuf,
    /// Pipeline settings JSON (raster, cone, params, palette, retry_budget).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// png8, png16 or pgm.
    #[arg(long, default_value = "png8")]
    pub format: String,
    /// Largest fraction of unobtainable items still counted as success.
    #[arg(long, default_value_t = 0.1)]
    pub tolerance: f64,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[command(flatten)]
    pub seed: SeedArgs,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SettingsFile {
    raster: Option<RasterSpec>,
    cone: Option<ConeSpec>,
    params: Option<TransformParams>,
    palette: Option<PaletteSpec>,
    retry_budget: Option<usize>,
}

pub fn load_settings(path: Option<&Path>) -> Result<PipelineSettings, CliError> {
    let file = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| config(format!("{}: {e}", p.display())))?;
            serde_json::from_str::<SettingsFile>(&text).map_err(|e| config(format!("{}: {e}", p.display())))?
        }
        None => SettingsFile::default(),
    };
    let mut s = PipelineSettings::default();
    if let Some(r) = file.raster {
        s.raster = r;
        s.cone = ConeSpec::default_for(r.width, r.height);
    }
    if let Some(c) = file.cone {
        s.cone = c;
    }
    if let Some(p) = file.params {
        s.params = p;
    }
    if let Some(p) = file.palette {
        s.palette = p;
    }
    if let Some(b) = file.retry_budget {
        s.retry_budget = b;
    }
    s.validate().map_err(config)?;
    Ok(s)
}

fn resolve_views(args: &GenerateArgs) -> Result<Vec<ViewDefinition>, CliError> {
    let mut views = Vec::new();
    let names: Vec<String> = if args.views.iter().any(|v| v.eq_ignore_ascii_case("all")) {
        BUILTIN_VIEW_NAMES.iter().map(|s| s.to_string()).collect()
    } else if args.views.is_empty() && args.view_files.is_empty() {
        vec!["ME4CH".to_string()]
    } else {
        args.views.clone()
    };
    for n in names {
        views.push(builtin_view(&n).map_err(config)?);
    }
    for p in &args.view_files {
        let text = std::fs::read_to_string(p).map_err(|e| config(format!("{}: {e}", p.display())))?;
        let stem = p.file_stem().map(|s| s.to_string_lossy().to_uppercase()).unwrap_or_default();
        views.push(ViewDefinition::from_json(&stem, &text).map_err(config)?);
    }
    let mut seen = std::collections::BTreeSet::new();
    for v in &views {
        if !seen.insert(v.view_name.clone()) {
            return Err(CliError::Usage(format!("view `{}` requested twice", v.view_name)));
        }
    }
    Ok(views)
}

#[derive(Debug, Serialize)]
struct Failure {
    item: usize,
    model_id: String,
    error: String,
}

#[derive(Debug, Serialize)]
struct ViewYield {
    requested: usize,
    generated: usize,
    failures: Vec<Failure>,
}

#[derive(Debug, Serialize)]
struct GenerateDetails {
    models: usize,
    jobs: usize,
    views: BTreeMap<String, ViewYield>,
}

#[derive(Serialize)]
struct ProvenanceLine<'a> {
    image_id: &'a str,
    #[serde(flatten)]
    provenance: &'a teegen_core::pseudo::Provenance,
    validation_passed: bool,
}

fn write_view(
    out: &Path,
    view: &ViewDefinition,
    models: &[LabeledMesh],
    settings: &PipelineSettings,
    args: &GenerateArgs,
    format: ImageFormat,
    files: &mut Vec<String>,
) -> Result<ViewYield, CliError> {
    let dir = out.join(&view.view_name);
    ensure_dir(&dir.join("images"))?;
    ensure_dir(&dir.join("masks"))?;
    let results = generate_batch(models, view, settings, args.seed.seed, args.count, args.jobs);
    let mut entries = Vec::new();
    let mut failures = Vec::new();
    let mut provenance = Vec::new();
    let prefix = view.view_name.to_lowercase();
    for (i, r) in results.iter().enumerate() {
        let model_id = &models[i % models.len()].model_id;
        let out = match r {
            Ok(o) => o,
            Err(e @ PseudoError::ViewUnobtainable { .. }) => {
                failures.push(Failure { item: i, model_id: model_id.clone(), error: e.to_string() });
                continue;
            }
            Err(e) => return Err(data(e)),
        };
        let id = format!("{prefix}_{i:05}");
        let image_rel = format!("images/{id}.{}", format.extension());
        let mask_rel = format!("masks/{id}.png");
        let img = &out.image;
        write_gray(&dir.join(&image_rel), img.width, img.height, &img.intensities, format).map_err(data)?;
        write_mask_png(&dir.join(&mask_rel), &out.mask).map_err(data)?;
        let mut entry = ManifestEntry::new(&id, Some(model_id.as_str()), Origin::Pseudo);
        entry.image_path = Some(image_rel.clone());
        entry.label_path = Some(mask_rel.clone());
        entries.push(entry);
        if let Some(p) = &img.provenance {
            let line = ProvenanceLine { image_id: &id, provenance: p, validation_passed: out.validation.pass };
            provenance.push(serde_json::to_string(&line).map_err(data)?);
        }
        files.push(format!("{}/{image_rel}", view.view_name));
        files.push(format!("{}/{mask_rel}", view.view_name));
    }
    if let Some(first) = models.first() {
        write_label_table(&dir.join("labels.json"), &first.structure_names).map_err(data)?;
        files.push(format!("{}/labels.json", view.view_name));
    }
    let mut f = std::fs::File::create(dir.join("provenance.jsonl")).map_err(data)?;
    for line in &provenance {
        writeln!(f, "{line}").map_err(data)?;
    }
    files.push(format!("{}/provenance.jsonl", view.view_name));
    let manifest = DatasetManifest::new(format!("pseudo_{prefix}"), entries);
    manifest.write(&dir.join("manifest.jsonl")).map_err(data)?;
    files.push(format!("{}/manifest.jsonl", view.view_name));
    Ok(ViewYield {
        requested: args.count,
        generated: results.len() - failures.len(),
        failures,
    })
}

pub fn run(args: GenerateArgs) -> Result<(Summary, Option<PathBuf>), CliError> {
    if args.jobs == 0 {
        return Err(CliError::Usage("--jobs must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&args.tolerance) {
        return Err(CliError::Usage("--tolerance must lie in [0, 1]".into()));
    }
    let format = ImageFormat::parse(&args.format)
        .ok_or_else(|| CliError::Usage(format!("unknown format `{}`", args.format)))?;
    let settings = load_settings(args.config.as_deref())?;
    let views = resolve_views(&args)?;
    let models: Vec<LabeledMesh> = match &args.models {
        Some(dir) => load_models(dir)?,
        None => {
            if args.phantoms == 0 {
                return Err(CliError::Usage("--phantoms must be at least 1".into()));
            }
            phantom_population(args.phantoms, args.seed.seed, PhantomVariation::default())
                .into_iter()
                .map(|(m, _)| m)
                .collect()
        }
    };

    let mut files = Vec::new();
    let mut per_view = BTreeMap::new();
    for view in &views {
        let y = write_view(&args.out, view, &models, &settings, &args, format, &mut files)?;
        per_view.insert(view.view_name.clone(), y);
    }
    let requested: usize = per_view.values().map(|v| v.requested).sum();
    let generated: usize = per_view.values().map(|v| v.generated).sum();
    let failed = requested - generated;
    let details = GenerateDetails {
        models: models.len(),
        jobs: args.jobs,
        views: per_view,
    };
    let mut summary = Summary::ok("generate", details).seed(args.seed.seed).files(files);
    if requested > 0 && failed as f64 / requested as f64 > args.tolerance {
        if generated == 0 {
            summary = summary.failed("data", 2, format!("all {requested} items failed"));
        } else {
            summary = summary.partial(format!("{failed} of {requested} items failed"));
        }
    }
    Ok((summary, Some(args.out)))
}
