//! Line-oriented `key = value` pipeline configuration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::histogram::DescriptorId;
use crate::labels::ClassSet;
use crate::segment::SlicParams;

/// Where an exemplar patch comes from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ExemplarSource {
    /// An SGRID file holding a normalized `patch_size` square.
    File(PathBuf),
    /// A window centered at (row, col) of a configured training section.
    Window { section: usize, row: usize, col: usize },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExemplarSpec {
    pub class: usize,
    pub source: ExemplarSource,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub descriptor: DescriptorId,
    pub patch_size: usize,
    pub classes: ClassSet,
    pub stride: usize,
    pub per_class: usize,
    pub sigma: f64,
    pub slic: SlicParams,
    pub svm_c: f64,
    pub sections: Vec<PathBuf>,
    pub exemplars: Vec<ExemplarSpec>,
    pub model: PathBuf,
    /// Directory for label outputs; next to the section when unset.
    pub output: Option<PathBuf>,
}

pub const DEFAULT_SIGMA: f64 = 25.0;

impl PipelineConfig {
    pub fn new(classes: ClassSet) -> Self {
        PipelineConfig {
            descriptor: DescriptorId::Glcm,
            patch_size: default_patch_size(classes),
            classes,
            stride: 16,
            per_class: 500,
            sigma: DEFAULT_SIGMA,
            slic: SlicParams::default(),
            svm_c: crate::classify::HARD_MARGIN_C,
            sections: Vec::new(),
            exemplars: Vec::new(),
            model: PathBuf::from("model.ova"),
            output: None,
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, base)
    }

    /// Relative paths are resolved against `base`.
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| cfg_err(format!("line {}: expected key = value", no + 1)))?;
            let key = k.trim().to_ascii_lowercase();
            if !KEYS.contains(&key.as_str()) {
                return Err(cfg_err(format!("line {}: unknown key {key:?}", no + 1)));
            }
            if entries.insert(key.clone(), v.trim().to_string()).is_some() {
                return Err(cfg_err(format!("line {}: duplicate key {key:?}", no + 1)));
            }
        }

        let classes = match entries.get("classes") {
            Some(v) => v.parse().map_err(as_config)?,
            None => ClassSet::Structures,
        };
        let mut cfg = PipelineConfig::new(classes);
        let path_of = |v: &str| base.join(v);
        for (key, v) in &entries {
            match key.as_str() {
                "classes" => {}
                "descriptor" => cfg.descriptor = v.parse().map_err(as_config)?,
                "patch_size" => cfg.patch_size = number(key, v)?,
                "stride" => cfg.stride = number(key, v)?,
                "per_class" => cfg.per_class = number(key, v)?,
                "sigma" => cfg.sigma = number(key, v)?,
                "slic_region_size" => cfg.slic.region_size = number(key, v)?,
                "slic_compactness" => cfg.slic.compactness = number(key, v)?,
                "slic_iterations" => cfg.slic.iterations = number(key, v)?,
                "svm_c" => cfg.svm_c = number(key, v)?,
                "sections" => cfg.sections = list(v).map(path_of).collect(),
                "exemplars" => {
                    cfg.exemplars = list(v)
                        .map(|item| parse_exemplar(item, classes, base))
                        .collect::<Result<_>>()?
                }
                "model" => cfg.model = path_of(v),
                "output" => cfg.output = Some(path_of(v)),
                _ => unreachable!("key list checked above"),
            }
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.patch_size < 3 || self.patch_size.is_multiple_of(2) {
            return Err(cfg_err(format!("patch_size must be odd and at least 3, got {}", self.patch_size)));
        }
        if self.stride == 0 || self.per_class == 0 {
            return Err(cfg_err("stride and per_class must be positive"));
        }
        if !(self.sigma > 0.0 && self.sigma.is_finite()) {
            return Err(cfg_err(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.svm_c > 0.0 && self.svm_c.is_finite()) {
            return Err(cfg_err(format!("svm_c must be positive, got {}", self.svm_c)));
        }
        if !(self.slic.compactness > 0.0) || self.slic.region_size < 4 || self.slic.iterations == 0 {
            return Err(cfg_err("slic_region_size must be >= 4, slic_compactness > 0, slic_iterations > 0"));
        }
        for ex in &self.exemplars {
            if let ExemplarSource::Window { section, .. } = ex.source {
                if section >= self.sections.len() {
                    return Err(cfg_err(format!("exemplar refers to section {section}, only {} configured", self.sections.len())));
                }
            }
        }
        Ok(())
    }

    /// Checks needed before harvesting or training can start.
    pub fn require_training_inputs(&self) -> Result<()> {
        if self.sections.is_empty() {
            return Err(cfg_err("no training sections configured"));
        }
        if self.exemplars.is_empty() {
            return Err(cfg_err("no exemplars configured"));
        }
        for path in self.sections.iter().chain(self.exemplars.iter().filter_map(|e| match &e.source {
            ExemplarSource::File(p) => Some(p),
            ExemplarSource::Window { .. } => None,
        })) {
            if !path.is_file() {
                return Err(cfg_err(format!("missing input file {}", path.display())));
            }
        }
        Ok(())
    }
}

pub fn default_patch_size(classes: ClassSet) -> usize {
    match classes {
        ClassSet::Structures => 99,
        ClassSet::Facies => 49,
    }
}

const KEYS: [&str; 14] = [
    "descriptor",
    "patch_size",
    "classes",
    "stride",
    "per_class",
    "sigma",
    "slic_region_size",
    "slic_compactness",
    "slic_iterations",
    "svm_c",
    "sections",
    "exemplars",
    "model",
    "output",
];

fn cfg_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

fn as_config(e: Error) -> Error {
    match e {
        Error::InvalidArgument(m) => Error::Config(m),
        other => other,
    }
}

fn number<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.parse().map_err(|_| cfg_err(format!("{key}: cannot parse {v:?}")))
}

fn list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

/// `class:path` or `class:section:row:col`.
fn parse_exemplar(item: &str, classes: ClassSet, base: &Path) -> Result<ExemplarSpec> {
    let (name, rest) = item
        .split_once(':')
        .ok_or_else(|| cfg_err(format!("exemplar {item:?} must look like class:path or class:section:row:col")))?;
    let class = classes.class_index(name).map_err(as_config)?;
    let nums: Vec<&str> = rest.split(':').collect();
    let source = match nums.as_slice() {
        [s, r, c] if [s, r, c].iter().all(|x| x.trim().parse::<usize>().is_ok()) => ExemplarSource::Window {
            section: s.trim().parse().unwrap(),
            row: r.trim().parse().unwrap(),
            col: c.trim().parse().unwrap(),
        },
        _ => ExemplarSource::File(base.join(rest.trim())),
    };
    Ok(ExemplarSpec { class, source })
}
