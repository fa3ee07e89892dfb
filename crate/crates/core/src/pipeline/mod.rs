//! The train and label workflows: harvest exemplar-like windows, window and
//! featurize them, fit one-vs-all SVMs, then label sections superpixel by
//! superpixel.

pub mod config;
pub mod harvest;

use std::path::Path;

use log::info;
use rayon::prelude::*;

use crate::attr::Descriptor;
use crate::classify::{predict, train_ova, write_bundle, OvaModel, SvmParams, TrainReport};
use crate::error::{Error, Result};
use crate::grid::{extract_patch, gaussian_window, normalize_section, read_sgrid, Patch, SectionGrid};
use crate::labels::LabelGrid;
use crate::segment::{slic_segment, SlicParams};

pub use config::{ExemplarSource, ExemplarSpec, PipelineConfig, DEFAULT_SIGMA};
pub use harvest::{
    candidate_centers, chi_square, harvest_patches, harvest_with, read_manifest, write_manifest, ChiSquareMclbp,
    ExemplarSet, HarvestParams, HarvestedPatch, Similarity, TrainingSet,
};

/// Read and normalize every section.
pub fn load_sections(paths: &[impl AsRef<Path>]) -> Result<Vec<SectionGrid>> {
    paths.iter().map(|p| read_sgrid(p).map(|g| normalize_section(&g))).collect()
}

/// Materialize the configured exemplars against the loaded sections.
pub fn resolve_exemplars(cfg: &PipelineConfig, sections: &[SectionGrid]) -> Result<ExemplarSet> {
    let mut out = Vec::with_capacity(cfg.exemplars.len());
    for spec in &cfg.exemplars {
        let patch = match &spec.source {
            ExemplarSource::Window { section, row, col } => {
                let grid = sections
                    .get(*section)
                    .ok_or_else(|| Error::Config(format!("exemplar refers to missing section {section}")))?;
                extract_patch(grid, (*row, *col), cfg.patch_size).map_err(|e| Error::Config(e.to_string()))?
            }
            ExemplarSource::File(path) => {
                let grid = read_sgrid(path).map_err(|e| Error::Config(format!("exemplar: {e}")))?;
                if grid.rows() != cfg.patch_size || grid.cols() != cfg.patch_size {
                    return Err(Error::Config(format!(
                        "exemplar {} is {}x{}, expected {}x{}",
                        path.display(),
                        grid.rows(),
                        grid.cols(),
                        cfg.patch_size,
                        cfg.patch_size
                    )));
                }
                Patch::from_values(cfg.patch_size, grid.into_values())?
            }
        };
        out.push((spec.class, patch));
    }
    ExemplarSet::new(cfg.classes, out).map_err(|e| Error::Config(e.to_string()))
}

/// Window and featurize every harvested patch, then fit the class models.
pub fn train_from_set(
    sections: &[SectionGrid],
    set: &TrainingSet,
    descriptor: &Descriptor,
    sigma: f64,
    svm: &SvmParams,
) -> Result<(OvaModel, Vec<TrainReport>)> {
    let entries: Vec<_> = set.entries().collect();
    let features: Vec<Vec<f64>> = entries
        .par_iter()
        .map(|(_, h)| {
            let patch = gaussian_window(&set.patch(sections, h)?, sigma)?;
            Ok(descriptor.featurize(&patch)?.bins)
        })
        .collect::<Result<_>>()?;
    let labels: Vec<usize> = entries.iter().map(|(k, _)| *k).collect();
    let refs: Vec<&[f64]> = features.iter().map(Vec::as_slice).collect();
    train_ova(&refs, &labels, set.classes.len(), descriptor.id, svm)
}

/// Everything a training run produced.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: OvaModel,
    pub training: TrainingSet,
    pub reports: Vec<TrainReport>,
}

/// Harvest, train and persist the model bundle named in the config.
pub fn train_pipeline(cfg: &PipelineConfig) -> Result<TrainOutcome> {
    cfg.validate()?;
    cfg.require_training_inputs()?;
    let sections = load_sections(&cfg.sections)?;
    let exemplars = resolve_exemplars(cfg, &sections)?;
    let params = HarvestParams {
        per_class: cfg.per_class,
        stride: cfg.stride,
    };
    let training = harvest_patches(&sections, &exemplars, &params)?;
    info!("harvested {} patches over {} sections", training.len(), sections.len());
    let svm = SvmParams {
        c: cfg.svm_c,
        ..SvmParams::default()
    };
    let (model, reports) = train_from_set(&sections, &training, &Descriptor::new(cfg.descriptor), cfg.sigma, &svm)?;
    write_bundle(&cfg.model, &model)?;
    info!("model written to {}", cfg.model.display());
    Ok(TrainOutcome {
        model,
        training,
        reports,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabelParams {
    pub patch_size: usize,
    pub sigma: f64,
    pub slic: SlicParams,
}

impl From<&PipelineConfig> for LabelParams {
    fn from(cfg: &PipelineConfig) -> Self {
        LabelParams {
            patch_size: cfg.patch_size,
            sigma: cfg.sigma,
            slic: cfg.slic,
        }
    }
}

/// Label a normalized section: segment it, classify the windowed neighborhood
/// around each superpixel centroid and paint the superpixel with the result.
pub fn label_section(
    grid: &SectionGrid,
    model: &OvaModel,
    descriptor: &Descriptor,
    params: &LabelParams,
) -> Result<LabelGrid> {
    if model.descriptor != descriptor.id || model.feature_dim != descriptor.feature_dim() {
        return Err(Error::invalid(format!(
            "model expects {} features of length {}, descriptor {} gives {}",
            model.descriptor,
            model.feature_dim,
            descriptor.id,
            descriptor.feature_dim()
        )));
    }
    if model.n_classes() > u8::MAX as usize + 1 {
        return Err(Error::invalid("too many classes for a label grid"));
    }
    let map = slic_segment(grid, &params.slic)?;
    let classes: Vec<u8> = map
        .centroids()
        .par_iter()
        .map(|&c| {
            let patch = gaussian_window(&extract_patch(grid, c, params.patch_size)?, params.sigma)?;
            predict(model, &descriptor.featurize(&patch)?).map(|k| k as u8)
        })
        .collect::<Result<_>>()?;
    let labels = map.assignment().iter().map(|&s| classes[s as usize]).collect();
    LabelGrid::new(grid.rows(), grid.cols(), labels)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::read_bundle;
    use crate::grid::write_sgrid;
    use crate::histogram::DescriptorId;
    use crate::labels::ClassSet;

    /// Three vertical bands: flat, a 2-pixel checkerboard, horizontal stripes.
    fn three_texture_section(rows: usize, cols: usize, offset: f64) -> SectionGrid {
        SectionGrid::from_fn(rows, cols, |r, c| {
            let v = if c < cols / 3 {
                0.0
            } else if c < 2 * cols / 3 {
                if ((r / 2) + (c / 2)) % 2 == 0 { 1.0 } else { -1.0 }
            } else if (r / 3) % 2 == 0 {
                1.0
            } else {
                -1.0
            };
            v + offset
        })
        .unwrap()
    }

    fn facies_set(grid: &SectionGrid, size: usize) -> ExemplarSet {
        let (rows, cols) = (grid.rows(), grid.cols());
        let ex = |c| extract_patch(grid, (rows / 2, c), size).unwrap();
        ExemplarSet::new(
            ClassSet::Facies,
            vec![(0, ex(cols / 6)), (1, ex(cols / 2)), (2, ex(5 * cols / 6))],
        )
        .unwrap()
    }

    #[test]
    fn three_textures_are_learned() {
        let grid = normalize_section(&three_texture_section(64, 180, 0.0));
        let set = facies_set(&grid, 15);
        let ts = harvest_patches(std::slice::from_ref(&grid), &set, &HarvestParams { per_class: 20, stride: 4 }).unwrap();
        let descriptor = Descriptor::new(DescriptorId::Lbp);
        let (model, _) = train_from_set(std::slice::from_ref(&grid), &ts, &descriptor, 25.0, &SvmParams::default()).unwrap();
        let held_out = normalize_section(&three_texture_section(40, 120, 0.0));
        for (center, want) in [((20, 10), 0), ((20, 30), 0), ((15, 55), 1), ((25, 70), 1), ((12, 90), 2), ((27, 105), 2)] {
            let p = gaussian_window(&extract_patch(&held_out, center, 15).unwrap(), 25.0).unwrap();
            let got = predict(&model, &descriptor.featurize(&p).unwrap()).unwrap();
            assert_eq!(got, want, "window at {center:?}");
        }
    }

    #[test]
    fn label_covers_grid_and_ignores_offset() {
        let raw = three_texture_section(60, 150, 0.0);
        let grid = normalize_section(&raw);
        let set = facies_set(&grid, 15);
        let ts = harvest_patches(std::slice::from_ref(&grid), &set, &HarvestParams { per_class: 15, stride: 4 }).unwrap();
        let descriptor = Descriptor::new(DescriptorId::Lbp);
        let (model, _) = train_from_set(std::slice::from_ref(&grid), &ts, &descriptor, 25.0, &SvmParams::default()).unwrap();
        let params = LabelParams {
            patch_size: 15,
            sigma: 25.0,
            slic: SlicParams {
                region_size: 10,
                ..SlicParams::default()
            },
        };
        let a = label_section(&grid, &model, &descriptor, &params).unwrap();
        assert_eq!(a.labels().len(), 60 * 150);
        a.check_classes(3).unwrap();
        let shifted = normalize_section(&raw.map(|v| v + 7.5));
        let b = label_section(&shifted, &model, &descriptor, &params).unwrap();
        assert_eq!(a, b);

        let wrong = Descriptor::new(DescriptorId::Clbp);
        assert!(matches!(
            label_section(&grid, &model, &wrong, &params),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn config_run_is_deterministic_and_atomic() {
        let dir = tempfile::tempdir().unwrap();
        write_sgrid(dir.path().join("s.sgrid"), &three_texture_section(60, 150, 0.0)).unwrap();
        let text = "\
descriptor = lbp
classes = facies
patch_size = 15
stride = 5
per_class = 10
sections = s.sgrid
exemplars = hst:0:30:25, lst:0:30:75, tst:0:30:125
model = m.ova
";
        let cfg = PipelineConfig::parse(text, dir.path()).unwrap();
        train_pipeline(&cfg).unwrap();
        let first = std::fs::read(dir.path().join("m.ova")).unwrap();
        train_pipeline(&cfg).unwrap();
        assert_eq!(first, std::fs::read(dir.path().join("m.ova")).unwrap());
        assert_eq!(read_bundle(dir.path().join("m.ova")).unwrap().descriptor, DescriptorId::Lbp);

        let broken = text.replace("tst:0:30:125", "tst:missing.sgrid").replace("m.ova", "n.ova");
        let cfg = PipelineConfig::parse(&broken, dir.path()).unwrap();
        assert!(matches!(train_pipeline(&cfg), Err(Error::Config(_))));
        assert!(!dir.path().join("n.ova").exists());
    }
}
