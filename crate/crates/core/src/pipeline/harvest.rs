//! Exemplar-driven patch harvesting.

use std::fmt::Write as _;
use std::path::Path;

use log::warn;
use rayon::prelude::*;

use crate::attr::lbp::mclbp_feature;
use crate::error::{Error, Result};
use crate::grid::{extract_patch, write_atomic, Patch, SectionGrid};
use crate::labels::ClassSet;

/// Hand-picked patches per class.
#[derive(Debug, Clone, PartialEq)]
pub struct ExemplarSet {
    classes: ClassSet,
    patch_size: usize,
    per_class: Vec<Vec<Patch>>,
}

impl ExemplarSet {
    /// Every class of `classes` needs at least one exemplar, and all
    /// exemplars must share one size.
    pub fn new(classes: ClassSet, exemplars: Vec<(usize, Patch)>) -> Result<Self> {
        let patch_size = exemplars
            .first()
            .map(|(_, p)| p.size())
            .ok_or_else(|| Error::invalid("no exemplars given"))?;
        let mut per_class = vec![Vec::new(); classes.len()];
        for (class, patch) in exemplars {
            if class >= classes.len() {
                return Err(Error::invalid(format!("exemplar class {class} outside the {classes} set")));
            }
            if patch.size() != patch_size {
                return Err(Error::invalid(format!(
                    "exemplar of size {} differs from {patch_size}",
                    patch.size()
                )));
            }
            per_class[class].push(patch);
        }
        if let Some(k) = per_class.iter().position(Vec::is_empty) {
            return Err(Error::invalid(format!("class {} has no exemplar", classes.names()[k])));
        }
        Ok(ExemplarSet {
            classes,
            patch_size,
            per_class,
        })
    }

    pub fn classes(&self) -> ClassSet {
        self.classes
    }

    pub fn patch_size(&self) -> usize {
        self.patch_size
    }

    pub fn for_class(&self, class: usize) -> &[Patch] {
        &self.per_class[class]
    }
}

/// A texture comparison used to rank candidates against exemplars.
pub trait Similarity: Sync {
    fn signature(&self, patch: &Patch) -> Result<Vec<f64>>;
    /// Larger is more similar.
    fn similarity(&self, a: &[f64], b: &[f64]) -> f64;
}

/// Negative chi-square distance between M-CLBP histograms.
#[derive(Debug, Clone, Copy, Default)]
pub struct ChiSquareMclbp;

const CHI_EPS: f64 = 1e-12;

pub fn chi_square(h: &[f64], g: &[f64]) -> f64 {
    h.iter()
        .zip(g)
        .map(|(a, b)| {
            let d = a - b;
            d * d / (a + b + CHI_EPS)
        })
        .sum()
}

impl Similarity for ChiSquareMclbp {
    fn signature(&self, patch: &Patch) -> Result<Vec<f64>> {
        Ok(mclbp_feature(patch)?.bins)
    }

    fn similarity(&self, a: &[f64], b: &[f64]) -> f64 {
        -chi_square(a, b)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HarvestParams {
    pub per_class: usize,
    pub stride: usize,
}

impl Default for HarvestParams {
    fn default() -> Self {
        HarvestParams {
            per_class: 500,
            stride: 16,
        }
    }
}

/// Where a harvested patch came from and how well it matched its class.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarvestedPatch {
    pub section: usize,
    pub center: (usize, usize),
    pub score: f64,
}

/// Harvested windows per class. Patches are stored by provenance and cut
/// from the sections on demand.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub classes: ClassSet,
    pub patch_size: usize,
    pub per_class: Vec<Vec<HarvestedPatch>>,
    /// Classes that received fewer than the requested number of patches.
    pub short_classes: Vec<usize>,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.per_class.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_short(&self) -> bool {
        !self.short_classes.is_empty()
    }

    /// (class, entry) pairs in class order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, &HarvestedPatch)> {
        self.per_class
            .iter()
            .enumerate()
            .flat_map(|(k, v)| v.iter().map(move |h| (k, h)))
    }

    pub fn patch(&self, sections: &[SectionGrid], entry: &HarvestedPatch) -> Result<Patch> {
        let grid = sections
            .get(entry.section)
            .ok_or_else(|| Error::invalid(format!("training set refers to missing section {}", entry.section)))?;
        extract_patch(grid, entry.center, self.patch_size)
    }
}

/// Centers of all fully contained `size` windows on a `stride` lattice.
pub fn candidate_centers(rows: usize, cols: usize, size: usize, stride: usize) -> Vec<(usize, usize)> {
    if rows < size || cols < size || stride == 0 {
        return Vec::new();
    }
    let half = size / 2;
    let mut out = Vec::new();
    for top in (0..=rows - size).step_by(stride) {
        for left in (0..=cols - size).step_by(stride) {
            out.push((top + half, left + half));
        }
    }
    out
}

pub fn harvest_patches(sections: &[SectionGrid], exemplars: &ExemplarSet, params: &HarvestParams) -> Result<TrainingSet> {
    harvest_with(sections, exemplars, params, &ChiSquareMclbp)
}

/// Score every candidate window against every exemplar, give each candidate
/// to its best class only, and keep the top `per_class` per class.
pub fn harvest_with(
    sections: &[SectionGrid],
    exemplars: &ExemplarSet,
    params: &HarvestParams,
    metric: &dyn Similarity,
) -> Result<TrainingSet> {
    if params.stride == 0 || params.per_class == 0 {
        return Err(Error::invalid("stride and per_class must be positive"));
    }
    let size = exemplars.patch_size();
    let n_classes = exemplars.classes().len();
    let refs: Vec<Vec<Vec<f64>>> = (0..n_classes)
        .map(|k| exemplars.for_class(k).iter().map(|p| metric.signature(p)).collect())
        .collect::<Result<_>>()?;

    let candidates: Vec<(usize, (usize, usize))> = sections
        .iter()
        .enumerate()
        .flat_map(|(s, g)| {
            candidate_centers(g.rows(), g.cols(), size, params.stride)
                .into_iter()
                .map(move |c| (s, c))
        })
        .collect();
    if candidates.is_empty() {
        return Err(Error::invalid(format!("no section can hold a {size}x{size} window")));
    }

    let scored: Vec<(usize, f64)> = candidates
        .par_iter()
        .map(|&(s, center)| {
            let sig = metric.signature(&extract_patch(&sections[s], center, size)?)?;
            let mut best = (0, f64::NEG_INFINITY);
            for (k, class_refs) in refs.iter().enumerate() {
                let score = class_refs
                    .iter()
                    .map(|r| metric.similarity(&sig, r))
                    .fold(f64::NEG_INFINITY, f64::max);
                if score > best.1 {
                    best = (k, score);
                }
            }
            Ok(best)
        })
        .collect::<Result<_>>()?;

    let mut per_class: Vec<Vec<HarvestedPatch>> = vec![Vec::new(); n_classes];
    for (&(section, center), &(k, score)) in candidates.iter().zip(&scored) {
        per_class[k].push(HarvestedPatch { section, center, score });
    }
    let mut short_classes = Vec::new();
    for (k, list) in per_class.iter_mut().enumerate() {
        list.sort_by(|a, b| b.score.total_cmp(&a.score));
        list.truncate(params.per_class);
        if list.len() < params.per_class {
            warn!(
                "class {} received {} of {} requested patches",
                exemplars.classes().names()[k],
                list.len(),
                params.per_class
            );
            short_classes.push(k);
        }
    }
    Ok(TrainingSet {
        classes: exemplars.classes(),
        patch_size: size,
        per_class,
        short_classes,
    })
}

const MANIFEST_MAGIC: &str = "HARVEST";

/// `HARVEST 1 <classes> <patch_size> <count>` then one
/// `<class> <section> <row> <col> <score>` line per patch.
pub fn encode_manifest(set: &TrainingSet) -> String {
    let mut out = format!("{MANIFEST_MAGIC} 1 {} {} {}\n", set.classes, set.patch_size, set.len());
    for (k, h) in set.entries() {
        let _ = writeln!(out, "{k} {} {} {} {:?}", h.section, h.center.0, h.center.1, h.score);
    }
    out
}

pub fn decode_manifest(text: &str, path: &Path) -> Result<TrainingSet> {
    let bad = |reason: String| Error::format("harvest manifest", path, reason);
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or("").split_whitespace().collect();
    if header.len() != 5 || header[0] != MANIFEST_MAGIC || header[1] != "1" {
        return Err(bad("bad header".into()));
    }
    let classes: ClassSet = header[2].parse().map_err(|e: Error| bad(e.to_string()))?;
    let patch_size: usize = header[3].parse().map_err(|_| bad("bad patch size".into()))?;
    let count: usize = header[4].parse().map_err(|_| bad("bad count".into()))?;
    let mut per_class = vec![Vec::new(); classes.len()];
    for (i, line) in lines.filter(|l| !l.trim().is_empty()).enumerate() {
        let f: Vec<&str> = line.split_whitespace().collect();
        let parsed = (|| -> Option<(usize, HarvestedPatch)> {
            if f.len() != 5 {
                return None;
            }
            Some((
                f[0].parse().ok()?,
                HarvestedPatch {
                    section: f[1].parse().ok()?,
                    center: (f[2].parse().ok()?, f[3].parse().ok()?),
                    score: f[4].parse().ok()?,
                },
            ))
        })();
        let (k, h) = parsed.ok_or_else(|| bad(format!("entry {} is malformed", i + 1)))?;
        if k >= classes.len() {
            return Err(bad(format!("entry {} has class {k}", i + 1)));
        }
        per_class[k].push(h);
    }
    let set = TrainingSet {
        classes,
        patch_size,
        per_class,
        short_classes: Vec::new(),
    };
    if set.len() != count {
        return Err(bad(format!("header announces {count} entries, found {}", set.len())));
    }
    Ok(set)
}

pub fn write_manifest(path: impl AsRef<Path>, set: &TrainingSet) -> Result<()> {
    write_atomic(path.as_ref(), encode_manifest(set).as_bytes())
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<TrainingSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_manifest(&text, path)
}
