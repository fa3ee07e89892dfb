//! Gray-level co-occurrence matrices and the six attributes derived from them.

use crate::error::{Error, Result};
use crate::grid::{quantize, Patch, QuantPatch};
use crate::histogram::{DescriptorId, FeatureHistogram};

/// Distance-1 offsets (row, col) for 0, 45, 90 and 135 degrees.
pub const DEFAULT_OFFSETS: [(isize, isize); 4] = [(0, 1), (-1, 1), (-1, 0), (-1, -1)];

pub const DEFAULT_LEVELS: usize = 64;

/// Number of attributes computed per direction.
pub const ATTRIBUTES_PER_DIRECTION: usize = 6;

/// Directional co-occurrence counts and their probability mass function.
#[derive(Debug, Clone, PartialEq)]
pub struct Glcm {
    levels: usize,
    offset: (isize, isize),
    counts: Vec<u64>,
    pmf: Vec<f64>,
}

impl Glcm {
    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn offset(&self) -> (isize, isize) {
        self.offset
    }

    /// Row-major `levels x levels`; entry (i, j) counts pixels of level i
    /// whose offset neighbor has level j.
    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// Count level pairs `(I[m, n], I[m + dm, n + dn])` over all in-bounds pairs.
pub fn glcm(patch: &QuantPatch, offset: (isize, isize)) -> Result<Glcm> {
    let (dm, dn) = offset;
    let n = patch.size() as isize;
    if dm == 0 && dn == 0 {
        return Err(Error::invalid("co-occurrence offset must be nonzero"));
    }
    if dm.abs() >= n || dn.abs() >= n {
        return Err(Error::invalid(format!("offset ({dm}, {dn}) does not fit a {n}x{n} patch")));
    }
    let k = patch.levels();
    let mut counts = vec![0u64; k * k];
    for m in (-dm).max(0)..(n - dm.max(0)) {
        let m2 = m + dm;
        for c in (-dn).max(0)..(n - dn.max(0)) {
            let i = patch.get(m as usize, c as usize) as usize;
            let j = patch.get(m2 as usize, (c + dn) as usize) as usize;
            counts[i * k + j] += 1;
        }
    }
    let total: u64 = counts.iter().sum();
    let pmf = if total == 0 {
        vec![0.0; k * k]
    } else {
        let t = total as f64;
        counts.iter().map(|&c| c as f64 / t).collect()
    };
    Ok(Glcm {
        levels: k,
        offset,
        counts,
        pmf,
    })
}

/// The six per-direction attributes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlcmAttributes {
    pub contrast: f64,
    pub entropy: f64,
    pub energy: f64,
    pub homogeneity: f64,
    pub correlation: f64,
    pub mutual_information: f64,
}

impl GlcmAttributes {
    pub fn to_array(self) -> [f64; ATTRIBUTES_PER_DIRECTION] {
        [
            self.contrast,
            self.entropy,
            self.energy,
            self.homogeneity,
            self.correlation,
            self.mutual_information,
        ]
    }
}

pub fn glcm_attributes(g: &Glcm) -> GlcmAttributes {
    pmf_attributes(g.levels, &g.pmf)
}

/// Attributes of an arbitrary `k x k` row-major pmf. Logs are natural and
/// `0 log 0` is taken as 0. Correlation is 0 when either marginal is
/// degenerate.
pub fn pmf_attributes(k: usize, pmf: &[f64]) -> GlcmAttributes {
    assert_eq!(pmf.len(), k * k, "pmf must be {k}x{k}");
    let mut row_marg = vec![0.0; k];
    let mut col_marg = vec![0.0; k];
    for i in 0..k {
        for j in 0..k {
            let p = pmf[i * k + j];
            row_marg[i] += p;
            col_marg[j] += p;
        }
    }
    let moments = |marg: &[f64]| {
        let mu: f64 = marg.iter().enumerate().map(|(i, &p)| i as f64 * p).sum();
        let var: f64 = marg
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let d = i as f64 - mu;
                d * d * p
            })
            .sum();
        (mu, var.sqrt())
    };
    let (mu_i, sd_i) = moments(&row_marg);
    let (mu_j, sd_j) = moments(&col_marg);

    let mut contrast = 0.0;
    let mut entropy = 0.0;
    let mut energy_sq = 0.0;
    let mut homogeneity = 0.0;
    let mut cov = 0.0;
    let mut mi = 0.0;
    for i in 0..k {
        let di = i as f64 - mu_i;
        for j in 0..k {
            let p = pmf[i * k + j];
            if p == 0.0 {
                continue;
            }
            let diff = i as f64 - j as f64;
            let diff2 = diff * diff;
            contrast += diff2 * p;
            entropy -= p * p.ln();
            energy_sq += p * p;
            homogeneity += p / (1.0 + diff2);
            cov += di * (j as f64 - mu_j) * p;
            mi += p * (p / (row_marg[i] * col_marg[j])).ln();
        }
    }
    let correlation = if sd_i > 0.0 && sd_j > 0.0 {
        cov / (sd_i * sd_j)
    } else {
        0.0
    };
    GlcmAttributes {
        contrast,
        entropy: entropy + 0.0,
        energy: energy_sq.sqrt(),
        homogeneity,
        correlation,
        mutual_information: mi,
    }
}

/// Quantize the patch to `levels` gray levels and concatenate the six
/// attributes for every offset, direction-major.
pub fn glcm_feature(patch: &Patch, levels: usize, offsets: &[(isize, isize)]) -> Result<FeatureHistogram> {
    if patch.size() < 2 {
        return Err(Error::invalid("GLCM needs a patch of side at least 2"));
    }
    let q = quantize(patch, levels)?;
    let mut bins = Vec::with_capacity(offsets.len() * ATTRIBUTES_PER_DIRECTION);
    for &off in offsets {
        bins.extend(glcm_attributes(&glcm(&q, off)?).to_array());
    }
    Ok(FeatureHistogram::new(DescriptorId::Glcm, bins))
}
