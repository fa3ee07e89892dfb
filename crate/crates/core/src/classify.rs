//! Linear SVMs and one-vs-all multi-class prediction.
//!
//! Binary models are trained with dual coordinate descent on the hinge-loss
//! SVM. The bias is learned as the weight of an extra constant feature, so
//! each coordinate step is an exact one-dimensional minimization and the
//! dual objective never increases.

use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::write_atomic;
use crate::histogram::{DescriptorId, FeatureHistogram};

/// Penalty used to approximate a hard margin.
pub const HARD_MARGIN_C: f64 = 1e4;

#[derive(Debug, Clone, PartialEq)]
pub struct SvmParams {
    pub c: f64,
    /// Value of the constant feature that carries the bias.
    pub bias_feature: f64,
    pub max_epochs: usize,
    /// Stop once the dual objective moves by less than this fraction per epoch.
    pub rel_tol: f64,
    /// Stop once the projected-gradient spread falls below this.
    pub kkt_tol: f64,
    /// Seed for the per-epoch visiting order.
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            c: HARD_MARGIN_C,
            bias_feature: 1.0,
            max_epochs: 100_000,
            rel_tol: 1e-8,
            kkt_tol: 1e-6,
            seed: 0x5eed,
        }
    }
}

/// `score(x) = w . x + b` for one class against the rest.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub class_id: usize,
}

impl LinearModel {
    #[inline]
    pub fn score(&self, x: &[f64]) -> f64 {
        self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.bias
    }
}

/// Convergence record of one binary training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Dual objective `0.5 |w|^2 - sum(alpha)` after each epoch (minimized).
    pub objective: Vec<f64>,
    pub epochs: usize,
    pub converged: bool,
}

fn check_dims(features: &[&[f64]]) -> Result<usize> {
    let dim = features
        .first()
        .map(|f| f.len())
        .ok_or_else(|| Error::invalid("no training samples"))?;
    if features.iter().any(|f| f.len() != dim) {
        return Err(Error::invalid("training features have differing dimensions"));
    }
    if features.iter().flat_map(|f| f.iter()).any(|v| !v.is_finite()) {
        return Err(Error::invalid("training features contain non-finite values"));
    }
    Ok(dim)
}

/// Train one binary SVM; `labels` are +1 / -1.
pub fn train_binary_svm(features: &[&[f64]], labels: &[i8], params: &SvmParams) -> Result<(LinearModel, TrainReport)> {
    let dim = check_dims(features)?;
    if labels.len() != features.len() {
        return Err(Error::invalid("feature and label counts differ"));
    }
    if labels.iter().any(|&y| y != 1 && y != -1) {
        return Err(Error::invalid("labels must be +1 or -1"));
    }
    if !labels.contains(&1) || !labels.contains(&-1) {
        return Err(Error::invalid("training needs samples of both signs"));
    }
    if !(params.c > 0.0) {
        return Err(Error::invalid(format!("C must be positive, got {}", params.c)));
    }

    let n = features.len();
    let c = params.c;
    let bf = params.bias_feature;
    let q_diag: Vec<f64> = features
        .iter()
        .map(|x| x.iter().map(|v| v * v).sum::<f64>() + bf * bf)
        .collect();
    let mut alpha = vec![0.0; n];
    // augmented weight vector: w followed by the bias weight
    let mut w = vec![0.0; dim + 1];
    let mut order: Vec<usize> = (0..n).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut objective = Vec::new();
    let mut converged = false;
    let mut epochs = 0;

    let dual = |w: &[f64], alpha: &[f64]| 0.5 * w.iter().map(|v| v * v).sum::<f64>() - alpha.iter().sum::<f64>();
    let mut prev = dual(&w, &alpha);

    while epochs < params.max_epochs {
        epochs += 1;
        order.shuffle(&mut rng);
        let mut pg_max = f64::NEG_INFINITY;
        let mut pg_min = f64::INFINITY;
        for &i in &order {
            let x = features[i];
            let y = labels[i] as f64;
            let margin = x.iter().zip(&w[..dim]).map(|(a, b)| a * b).sum::<f64>() + bf * w[dim];
            let g = y * margin - 1.0;
            let a = alpha[i];
            let pg = if a == 0.0 {
                g.min(0.0)
            } else if a == c {
                g.max(0.0)
            } else {
                g
            };
            pg_max = pg_max.max(pg);
            pg_min = pg_min.min(pg);
            if pg != 0.0 && q_diag[i] > 0.0 {
                let updated = (a - g / q_diag[i]).clamp(0.0, c);
                let step = (updated - a) * y;
                if step != 0.0 {
                    alpha[i] = updated;
                    for (wj, xj) in w[..dim].iter_mut().zip(x) {
                        *wj += step * xj;
                    }
                    w[dim] += step * bf;
                }
            }
        }
        let obj = dual(&w, &alpha);
        objective.push(obj);
        let rel = (prev - obj).abs() / prev.abs().max(1.0);
        prev = obj;
        if pg_max - pg_min < params.kkt_tol || rel < params.rel_tol {
            converged = true;
            break;
        }
    }

    let bias = w[dim] * bf;
    w.truncate(dim);
    Ok((
        LinearModel {
            weights: w,
            bias,
            class_id: 0,
        },
        TrainReport {
            objective,
            epochs,
            converged,
        },
    ))
}

/// `0.5 |w|^2 + C sum max(0, 1 - y (w . x + b))`.
pub fn primal_objective(model: &LinearModel, features: &[&[f64]], labels: &[i8], c: f64) -> f64 {
    let reg = 0.5 * model.weights.iter().map(|v| v * v).sum::<f64>();
    let loss: f64 = features
        .iter()
        .zip(labels)
        .map(|(x, &y)| (1.0 - y as f64 * model.score(x)).max(0.0))
        .sum();
    reg + c * loss
}

/// One linear model per class sharing a descriptor and dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct OvaModel {
    pub models: Vec<LinearModel>,
    pub descriptor: DescriptorId,
    pub feature_dim: usize,
}

impl OvaModel {
    pub fn new(models: Vec<LinearModel>, descriptor: DescriptorId) -> Result<Self> {
        let feature_dim = models
            .first()
            .map(|m| m.weights.len())
            .ok_or_else(|| Error::invalid("a one-vs-all model needs at least one class"))?;
        if models.iter().any(|m| m.weights.len() != feature_dim) {
            return Err(Error::invalid("class models differ in dimension"));
        }
        Ok(OvaModel {
            models,
            descriptor,
            feature_dim,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.models.len()
    }

    pub fn scores(&self, x: &[f64]) -> Vec<f64> {
        self.models.iter().map(|m| m.score(x)).collect()
    }
}

/// Train one class-vs-rest model per class. Classes are trained concurrently.
pub fn train_ova(
    features: &[&[f64]],
    labels: &[usize],
    n_classes: usize,
    descriptor: DescriptorId,
    params: &SvmParams,
) -> Result<(OvaModel, Vec<TrainReport>)> {
    if labels.len() != features.len() {
        return Err(Error::invalid("feature and label counts differ"));
    }
    if n_classes < 2 {
        return Err(Error::invalid("need at least two classes"));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
        return Err(Error::invalid(format!("label {bad} outside {n_classes} classes")));
    }
    for k in 0..n_classes {
        if !labels.contains(&k) {
            return Err(Error::invalid(format!("class {k} has no training samples")));
        }
    }
    let trained = (0..n_classes)
        .into_par_iter()
        .map(|k| {
            let signs: Vec<i8> = labels.iter().map(|&l| if l == k { 1 } else { -1 }).collect();
            train_binary_svm(features, &signs, params).map(|(mut m, r)| {
                m.class_id = k;
                (m, r)
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let (models, reports): (Vec<_>, Vec<_>) = trained.into_iter().unzip();
    Ok((OvaModel::new(models, descriptor)?, reports))
}

/// Class with the highest score; ties go to the lowest class id.
pub fn predict_scores(model: &OvaModel, x: &[f64]) -> Result<usize> {
    if x.len() != model.feature_dim {
        return Err(Error::invalid(format!(
            "feature of length {} does not match model dimension {}",
            x.len(),
            model.feature_dim
        )));
    }
    let mut best = 0;
    let mut best_score = f64::NEG_INFINITY;
    for (k, m) in model.models.iter().enumerate() {
        let s = m.score(x);
        if s > best_score {
            best = k;
            best_score = s;
        }
    }
    Ok(model.models[best].class_id)
}

pub fn predict(model: &OvaModel, feature: &FeatureHistogram) -> Result<usize> {
    if feature.descriptor != model.descriptor {
        return Err(Error::invalid(format!(
            "feature from {} given to a {} model",
            feature.descriptor, model.descriptor
        )));
    }
    predict_scores(model, &feature.bins)
}

const BUNDLE_MAGIC: &str = "OVAMODEL";

/// Text bundle: `OVAMODEL 1 <n_classes> <dim> <descriptor>` then one line
/// per class holding the bias followed by the weights.
pub fn encode_bundle(model: &OvaModel) -> String {
    let mut out = format!(
        "{BUNDLE_MAGIC} 1 {} {} {}\n",
        model.n_classes(),
        model.feature_dim,
        model.descriptor
    );
    for m in &model.models {
        out.push_str(&format!("{:?}", m.bias));
        for w in &m.weights {
            out.push_str(&format!(" {w:?}"));
        }
        out.push('\n');
    }
    out
}

pub fn decode_bundle(text: &str, path: &Path) -> Result<OvaModel> {
    let bad = |reason: String| Error::format("model bundle", path, reason);
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 5 || fields[0] != BUNDLE_MAGIC {
        return Err(bad(format!("unexpected header {header:?}")));
    }
    if fields[1] != "1" {
        return Err(bad(format!("unsupported version {}", fields[1])));
    }
    let n_classes: usize = fields[2].parse().map_err(|_| bad(format!("bad class count {:?}", fields[2])))?;
    let dim: usize = fields[3].parse().map_err(|_| bad(format!("bad dimension {:?}", fields[3])))?;
    let descriptor: DescriptorId = fields[4].parse().map_err(|e: Error| bad(e.to_string()))?;
    let mut models = Vec::with_capacity(n_classes);
    for k in 0..n_classes {
        let line = lines.next().ok_or_else(|| bad(format!("missing weights for class {k}")))?;
        let values = line
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| bad(format!("bad number {t:?} for class {k}"))))
            .collect::<Result<Vec<_>>>()?;
        if values.len() != dim + 1 {
            return Err(bad(format!("class {k} has {} values, expected {}", values.len(), dim + 1)));
        }
        models.push(LinearModel {
            bias: values[0],
            weights: values[1..].to_vec(),
            class_id: k,
        });
    }
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(bad("trailing data after the last class".into()));
    }
    if n_classes == 0 {
        return Err(bad("no classes".into()));
    }
    OvaModel::new(models, descriptor).map_err(|e| bad(e.to_string()))
}

pub fn write_bundle(path: impl AsRef<Path>, model: &OvaModel) -> Result<()> {
    write_atomic(path.as_ref(), encode_bundle(model).as_bytes())
}

pub fn read_bundle(path: impl AsRef<Path>) -> Result<OvaModel> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    decode_bundle(&text, path)
}
