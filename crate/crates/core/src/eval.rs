//! Confusion matrices, the four segmentation scores, and label-map rendering.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{normalize_section, write_atomic, SectionGrid};
use crate::labels::{ClassSet, LabelGrid};

/// `counts[j * n + i]` is the number of pixels of true class j predicted as i.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    n: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn from_counts(n: usize, counts: Vec<u64>) -> Result<Self> {
        if n == 0 || counts.len() != n * n {
            return Err(Error::invalid(format!("confusion matrix needs {n}x{n} entries")));
        }
        Ok(ConfusionMatrix { n, counts })
    }

    pub fn n_classes(&self) -> usize {
        self.n
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    #[inline]
    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.n + pred]
    }

    /// Pixels whose true class is `j`.
    pub fn true_total(&self, j: usize) -> u64 {
        self.counts[j * self.n..(j + 1) * self.n].iter().sum()
    }

    /// Pixels predicted as `i`.
    pub fn predicted_total(&self, i: usize) -> u64 {
        (0..self.n).map(|j| self.get(j, i)).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.n).all(|j| (0..self.n).all(|i| i == j || self.get(j, i) == 0))
    }
}

pub fn confusion_matrix(pred: &LabelGrid, truth: &LabelGrid, n_classes: usize) -> Result<ConfusionMatrix> {
    if pred.rows() != truth.rows() || pred.cols() != truth.cols() {
        return Err(Error::invalid(format!(
            "prediction is {}x{} but ground truth is {}x{}",
            pred.rows(),
            pred.cols(),
            truth.rows(),
            truth.cols()
        )));
    }
    pred.check_classes(n_classes)?;
    truth.check_classes(n_classes)?;
    let mut counts = vec![0u64; n_classes * n_classes];
    for (&p, &t) in pred.labels().iter().zip(truth.labels()) {
        counts[t as usize * n_classes + p as usize] += 1;
    }
    ConfusionMatrix::from_counts(n_classes, counts)
}

/// Pixel accuracy, mean class accuracy, mean IU and frequency-weighted IU.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoreReport {
    pub pa: f64,
    pub mca: f64,
    pub miu: f64,
    pub fwiu: f64,
}

impl ScoreReport {
    /// `metric = value` lines with four decimals.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for (k, v) in [("pa", self.pa), ("mca", self.mca), ("miu", self.miu), ("fwiu", self.fwiu)] {
            let _ = writeln!(s, "{k} = {v:.4}");
        }
        s
    }
}

/// The four scores. A class absent from the ground truth counts as perfectly
/// labeled in MCA and MIU when nothing was predicted as it, and as 0 otherwise.
pub fn metrics(cm: &ConfusionMatrix) -> Result<ScoreReport> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::invalid("confusion matrix is empty"));
    }
    let n = cm.n_classes();
    let mut correct = 0u64;
    let mut class_acc = 0.0;
    let mut iu_sum = 0.0;
    let mut fw_sum = 0.0;
    for i in 0..n {
        let nii = cm.get(i, i);
        let ti = cm.true_total(i);
        let pi = cm.predicted_total(i);
        correct += nii;
        let union = ti + pi - nii;
        if ti == 0 {
            let vacuous = if pi == 0 { 1.0 } else { 0.0 };
            class_acc += vacuous;
            iu_sum += vacuous;
        } else {
            class_acc += nii as f64 / ti as f64;
            let iu = nii as f64 / union as f64;
            iu_sum += iu;
            fw_sum += ti as f64 * iu;
        }
    }
    let nc = n as f64;
    Ok(ScoreReport {
        pa: correct as f64 / total as f64,
        mca: class_acc / nc,
        miu: iu_sum / nc,
        fwiu: fw_sum / total as f64,
    })
}

/// Binary PPM (P6) of the label map in the class palette. With a background
/// section, each color is blended 50/50 with the normalized amplitude.
pub fn render_labels(labels: &LabelGrid, classes: ClassSet, background: Option<&SectionGrid>) -> Result<Vec<u8>> {
    labels.check_classes(classes.len())?;
    let gray = match background {
        Some(bg) => {
            if bg.rows() != labels.rows() || bg.cols() != labels.cols() {
                return Err(Error::invalid("background and label grid differ in shape"));
            }
            Some(normalize_section(bg))
        }
        None => None,
    };
    let palette = classes.palette();
    let header = format!("P6\n{} {}\n255\n", labels.cols(), labels.rows());
    let mut out = Vec::with_capacity(header.len() + 3 * labels.labels().len());
    out.extend_from_slice(header.as_bytes());
    for (idx, &l) in labels.labels().iter().enumerate() {
        let color = palette[l as usize];
        match &gray {
            None => out.extend_from_slice(&color),
            Some(g) => {
                let amp = g.values()[idx].clamp(0.0, 1.0) * 255.0;
                for ch in color {
                    out.push((0.5 * ch as f64 + 0.5 * amp).round() as u8);
                }
            }
        }
    }
    Ok(out)
}

pub fn write_ppm(path: impl AsRef<Path>, bytes: &[u8]) -> Result<()> {
    write_atomic(path.as_ref(), bytes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cm(n: usize, rows: &[&[u64]]) -> ConfusionMatrix {
        ConfusionMatrix::from_counts(n, rows.iter().flat_map(|r| r.iter().copied()).collect()).unwrap()
    }

    #[test]
    fn worked_matrix() {
        let r = metrics(&cm(2, &[&[3, 1], &[0, 4]])).unwrap();
        assert_abs_diff_eq!(r.pa, 0.875, epsilon = 1e-15);
        assert_abs_diff_eq!(r.mca, 0.875, epsilon = 1e-15);
        assert_abs_diff_eq!(r.miu, 0.775, epsilon = 1e-15);
        assert_abs_diff_eq!(r.fwiu, 0.775, epsilon = 1e-15);
    }

    #[test]
    fn confusion_examples() {
        let truth = LabelGrid::new(2, 3, vec![0, 1, 2, 2, 1, 0]).unwrap();
        let m = confusion_matrix(&truth, &truth, 3).unwrap();
        assert!(m.is_diagonal());
        assert_eq!((m.get(0, 0), m.get(1, 1), m.get(2, 2)), (2, 2, 2));

        let pred = LabelGrid::filled(2, 5, 0).unwrap();
        let truth = LabelGrid::filled(2, 5, 1).unwrap();
        let m = confusion_matrix(&pred, &truth, 2).unwrap();
        assert_eq!(m.counts(), &[0, 0, 10, 0]);
        assert_eq!(m.total(), 10);

        let other = LabelGrid::filled(5, 2, 1).unwrap();
        assert!(confusion_matrix(&pred, &other, 2).is_err());
        assert!(confusion_matrix(&pred, &truth, 1).is_err());
    }

    #[test]
    fn perfect_labeling_scores_one() {
        let g = LabelGrid::new(1, 4, vec![0, 0, 1, 1]).unwrap();
        let r = metrics(&confusion_matrix(&g, &g, 4).unwrap()).unwrap();
        assert_eq!((r.pa, r.mca, r.miu, r.fwiu), (1.0, 1.0, 1.0, 1.0));
        assert_eq!(r.to_text(), "pa = 1.0000\nmca = 1.0000\nmiu = 1.0000\nfwiu = 1.0000\n");
    }

    #[test]
    fn absent_class_with_false_positives_scores_zero() {
        // class 1 never occurs but is predicted once
        let r = metrics(&cm(2, &[&[3, 1], &[0, 0]])).unwrap();
        assert_abs_diff_eq!(r.mca, 0.75 / 2.0, epsilon = 1e-15);
        assert_abs_diff_eq!(r.miu, 0.75 / 2.0, epsilon = 1e-15);
        assert!(metrics(&cm(2, &[&[0, 0], &[0, 0]])).is_err());
    }

    #[test]
    fn equal_class_totals_make_fwiu_equal_miu() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            let n = rng.gen_range(2..6);
            let t = rng.gen_range(1..30u64);
            let mut counts = vec![0u64; n * n];
            for j in 0..n {
                for _ in 0..t {
                    counts[j * n + rng.gen_range(0..n)] += 1;
                }
            }
            let r = metrics(&ConfusionMatrix::from_counts(n, counts).unwrap()).unwrap();
            assert_abs_diff_eq!(r.fwiu, r.miu, epsilon = 1e-12);
            for v in [r.pa, r.mca, r.miu, r.fwiu] {
                assert!((0.0..=1.0).contains(&v));
            }
        }
    }

    #[test]
    fn single_saltdome_pixel_is_red() {
        let g = LabelGrid::new(1, 1, vec![2]).unwrap();
        let ppm = render_labels(&g, ClassSet::Structures, None).unwrap();
        assert_eq!(ppm, b"P6\n1 1\n255\n\xff\x00\x00".to_vec());
    }

    #[test]
    fn rendered_colors_decode_to_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for set in [ClassSet::Structures, ClassSet::Facies] {
            let labels: Vec<u8> = (0..35).map(|_| rng.gen_range(0..set.len() as u8)).collect();
            let g = LabelGrid::new(5, 7, labels).unwrap();
            let ppm = render_labels(&g, set, None).unwrap();
            let header = "P6\n7 5\n255\n".to_string();
            assert!(ppm.starts_with(header.as_bytes()));
            let body = &ppm[header.len()..];
            assert_eq!(body.len(), 35 * 3);
            for (px, &want) in body.chunks_exact(3).zip(g.labels()) {
                let back = set.palette().iter().position(|c| c == px).unwrap();
                assert_eq!(back, want as usize);
            }
        }
    }

    #[test]
    fn background_blend_halves_color() {
        let g = LabelGrid::new(1, 2, vec![3, 3]).unwrap();
        let bg = SectionGrid::new(1, 2, vec![-1.0, 1.0]).unwrap();
        let ppm = render_labels(&g, ClassSet::Structures, Some(&bg)).unwrap();
        let body = &ppm[ppm.len() - 6..];
        // normalized amplitudes 1/3 and 2/3 of 255
        assert_eq!(body, &[107, 107, 107, 149, 149, 149]);
        let wrong = SectionGrid::new(2, 1, vec![0.0, 1.0]).unwrap();
        assert!(render_labels(&g, ClassSet::Structures, Some(&wrong)).is_err());
    }
}
