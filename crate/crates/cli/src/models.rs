use crate::error::{config, data, CliError};
use crate::summary::Summary;
use crate::{ensure_dir, SeedArgs};
use clap::{Args, Subcommand};
use serde::Serialize;
use std::path::{Path, PathBuf};
use teegen_core::anatomy::{fit_shape_model, load_model, write_mesh_text, LabeledMesh, ShapeModel, DEFAULT_SAMPLE_RANGE};
use teegen_core::phantom::{phantom_population, PhantomVariation};

#[derive(Subcommand, Debug)]
pub enum ModelsCommand {
    /// Write a jittered phantom heart population.
    Phantom(PhantomArgs),
    /// Fit a statistical shape model to corresponded meshes.
    Fit(FitArgs),
    /// Sample new meshes from a fitted shape model.
    Sample(SampleArgs),
}

#[derive(Args, Debug)]
pub struct PhantomArgs {
    #[arg(long, default_value_t = 8)]
    pub count: usize,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub seed: SeedArgs,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Directory of meshes sharing one topology.
    #[arg(long)]
    pub models: PathBuf,
    /// Output JSON file.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct SampleArgs {
    /// Shape model JSON written by `models fit`.
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, default_value_t = 10)]
    pub count: usize,
    /// Coefficient range in standard deviations.
    #[arg(long, default_value_t = DEFAULT_SAMPLE_RANGE)]
    pub range: f64,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub seed: SeedArgs,
}

/// Every `.tmesh` or `.ply` file in `dir`, sorted by name.
pub fn load_models(dir: &Path) -> Result<Vec<LabeledMesh>, CliError> {
    let mut paths: Vec<PathBuf> = std::fs::read_dir(dir)
        .map_err(|e| config(format!("{}: {e}", dir.display())))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "tmesh" | "ply"))
        })
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Data(format!("{}: no model files", dir.display())));
    }
    paths
        .iter()
        .map(|p| load_model(p).map_err(|e| CliError::Data(format!("{}: {e}", p.display()))))
        .collect()
}

fn write_meshes(out: &Path, meshes: &[LabeledMesh]) -> Result<Vec<String>, CliError> {
    ensure_dir(out)?;
    meshes
        .iter()
        .map(|m| {
            let name = format!("{}.tmesh", m.model_id);
            std::fs::write(out.join(&name), write_mesh_text(m)).map_err(data)?;
            Ok(name)
        })
        .collect()
}

#[derive(Serialize)]
struct FitDetails {
    training_meshes: usize,
    modes: usize,
    mode_stddevs: Vec<f64>,
}

pub fn run(cmd: ModelsCommand) -> Result<(Summary, Option<PathBuf>), CliError> {
    match cmd {
        ModelsCommand::Phantom(a) => {
            let meshes: Vec<LabeledMesh> = phantom_population(a.count, a.seed.seed, PhantomVariation::default())
                .into_iter()
                .map(|(m, _)| m)
                .collect();
            let files = write_meshes(&a.out, &meshes)?;
            let summary = Summary::ok("models phantom", serde_json::json!({ "count": meshes.len() }))
                .seed(a.seed.seed)
                .files(files);
            Ok((summary, Some(a.out)))
        }
        ModelsCommand::Fit(a) => {
            let meshes = load_models(&a.models)?;
            let model = fit_shape_model(&meshes).map_err(data)?;
            let text = serde_json::to_string(&model).map_err(data)?;
            std::fs::write(&a.out, text).map_err(|e| CliError::Data(format!("{}: {e}", a.out.display())))?;
            let details = FitDetails {
                training_meshes: meshes.len(),
                modes: model.mode_count(),
                mode_stddevs: model.mode_stddevs.clone(),
            };
            Ok((Summary::ok("models fit", details), None))
        }
        ModelsCommand::Sample(a) => {
            if !(a.range >= 0.0 && a.range.is_finite()) {
                return Err(CliError::Usage("--range must be a non-negative number".into()));
            }
            let text = std::fs::read_to_string(&a.model).map_err(|e| config(format!("{}: {e}", a.model.display())))?;
            let model: ShapeModel = serde_json::from_str(&text).map_err(|e| config(format!("{}: {e}", a.model.display())))?;
            let meshes = model.sample_population(a.count, a.seed.seed, a.range);
            let files = write_meshes(&a.out, &meshes)?;
            let summary = Summary::ok("models sample", serde_json::json!({ "count": meshes.len(), "range": a.range }))
                .seed(a.seed.seed)
                .files(files);
            Ok((summary, Some(a.out)))
        }
    }
}
