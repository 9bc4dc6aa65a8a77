use super::{
    add_noise, apply_cone, apply_shadows, gaussian_blur, render_intensities, sample_shadows, ConeSpec, PaletteSpec,
    Provenance, PseudoError, PseudoImage, Range, SampledTransforms, TransformParams,
};
use crate::anatomy::LabeledMesh;
use crate::rng::stream_rng;
use crate::view::{slice_mesh, validate_view, LabelMap, RasterSpec, SliceReport, ValidationReport, ViewDefinition};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineSettings {
    pub raster: RasterSpec,
    pub cone: ConeSpec,
    pub params: TransformParams,
    pub palette: PaletteSpec,
    /// Perturbed planes tried before a view is declared unobtainable.
    pub retry_budget: usize,
}

impl Default for PipelineSettings {
    fn default() -> Self {
        let raster = RasterSpec {
            width: 256,
            height: 256,
            spacing_mm: 0.6,
        };
        Self {
            cone: ConeSpec::default_for(raster.width, raster.height),
            raster,
            params: TransformParams::default(),
            palette: PaletteSpec::phantom_default(),
            retry_budget: 20,
        }
    }
}

impl PipelineSettings {
    pub fn validate(&self) -> Result<(), PseudoError> {
        self.cone.validate()?;
        self.params.validate()?;
        self.palette.validate()?;
        if self.raster.width == 0 || self.raster.height == 0 || !(self.raster.spacing_mm > 0.0) {
            return Err(PseudoError::InvalidParams("raster must be non-empty with positive spacing".into()));
        }
        if self.retry_budget == 0 {
            return Err(PseudoError::InvalidParams("retry_budget must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PseudoOutput {
    pub image: PseudoImage,
    /// Segmentation mask, cropped to the cone.
    pub mask: LabelMap,
    pub validation: ValidationReport,
    pub slice: SliceReport,
}

/// Slices, validates and renders one pseudo-image. All randomness comes
/// from the `(seed, stream)` pair.
pub fn generate_pseudo(
    mesh: &LabeledMesh,
    view: &ViewDefinition,
    settings: &PipelineSettings,
    seed: u64,
    stream: u64,
) -> Result<PseudoOutput, PseudoError> {
    settings.validate()?;
    let mut rng = stream_rng(seed, stream);
    let ranges = view.rotation_range_deg.map(|r| Range::new(-r.abs(), r.abs()));
    let priority = view.priority(mesh);

    let mut accepted = None;
    let mut last_failure = None;
    for attempt in 1..=settings.retry_budget {
        let angles = [ranges[0].sample(&mut rng), ranges[1].sample(&mut rng)];
        let plane = view.plane(mesh, angles)?;
        let (map, report) = slice_mesh(mesh, &plane, &settings.raster, &priority)?;
        let validation = validate_view(&map, view);
        if validation.pass {
            accepted = Some((map, report, validation, angles, attempt));
            break;
        }
        last_failure = validation.first_failure().cloned();
    }
    let Some((map, slice, validation, rotation_deg, attempts)) = accepted else {
        let f = last_failure.expect("a failed attempt records its failure");
        return Err(PseudoError::ViewUnobtainable {
            view: view.view_name.clone(),
            model_id: mesh.model_id.clone(),
            attempts: settings.retry_budget,
            structure: f.structure,
            area_mm2: f.area_mm2,
            required_mm2: f.required_mm2,
        });
    };

    let palette = settings.palette.resolve(&map);
    let mut image = render_intensities(&map, &palette, settings.cone)?;
    let p = &settings.params;
    let blur_sigma = p.blur_sigma.sample(&mut rng);
    let noise_std = p.noise_std.sample(&mut rng);
    let speckle_strength = p.speckle_strength.sample(&mut rng);
    let shadows = sample_shadows(p, &settings.cone, &mut rng);

    gaussian_blur(&mut image, blur_sigma);
    add_noise(&mut image, noise_std, speckle_strength, &mut rng);
    apply_shadows(&mut image, &shadows);
    apply_cone(&mut image, settings.cone);

    let mut mask = map;
    for (l, inside) in mask.labels.iter_mut().zip(settings.cone.mask(mask.width, mask.height)) {
        if !inside {
            *l = 0;
        }
    }

    image.provenance = Some(Provenance {
        model_id: mesh.model_id.clone(),
        view_name: view.view_name.clone(),
        seed,
        stream,
        sampled: SampledTransforms {
            rotation_deg,
            attempts,
            blur_sigma,
            noise_std,
            speckle_strength,
            shadows,
        },
        ranges: p.clone(),
        palette: settings.palette.clone(),
        cone: settings.cone,
    });
    Ok(PseudoOutput {
        image,
        mask,
        validation,
        slice,
    })
}

/// Generates `count` images cycling through `models`; item `i` uses stream
/// `i` of `seed`. Results are in item order and independent of `jobs`.
pub fn generate_batch(
    models: &[LabeledMesh],
    view: &ViewDefinition,
    settings: &PipelineSettings,
    seed: u64,
    count: usize,
    jobs: usize,
) -> Vec<Result<PseudoOutput, PseudoError>> {
    if models.is_empty() {
        return Vec::new();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| {
        (0..count)
            .into_par_iter()
            .map(|i| generate_pseudo(&models[i % models.len()], view, settings, seed, i as u64))
            .collect()
    })
}
