use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Which texture attribute produced a feature vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum DescriptorId {
    Glcm,
    Semblance,
    Lbp,
    Clbp,
    Mclbp,
    Elbp,
    Cldp,
    Lri,
}

impl DescriptorId {
    pub const ALL: [DescriptorId; 8] = [
        DescriptorId::Glcm,
        DescriptorId::Semblance,
        DescriptorId::Lbp,
        DescriptorId::Clbp,
        DescriptorId::Mclbp,
        DescriptorId::Elbp,
        DescriptorId::Cldp,
        DescriptorId::Lri,
    ];

    pub fn name(self) -> &'static str {
        match self {
            DescriptorId::Glcm => "glcm",
            DescriptorId::Semblance => "semblance",
            DescriptorId::Lbp => "lbp",
            DescriptorId::Clbp => "clbp",
            DescriptorId::Mclbp => "mclbp",
            DescriptorId::Elbp => "elbp",
            DescriptorId::Cldp => "cldp",
            DescriptorId::Lri => "lri",
        }
    }

    /// GLCM yields derived attribute values rather than a probability histogram.
    pub fn is_histogram(self) -> bool {
        self != DescriptorId::Glcm
    }
}

impl fmt::Display for DescriptorId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DescriptorId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('-', "");
        DescriptorId::ALL
            .into_iter()
            .find(|d| d.name() == key)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown descriptor {s:?}; expected one of glcm, semblance, lbp, clbp, mclbp, elbp, cldp, lri"
                ))
            })
    }
}

/// A descriptor output ready for classification.
///
/// Histogram descriptors produce bins summing to 1. An input with nothing to
/// count yields all-zero bins and sets `empty`. GLCM vectors carry raw
/// attribute values and are exempt from the sum rule.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureHistogram {
    pub descriptor: DescriptorId,
    pub bins: Vec<f64>,
    pub empty: bool,
}

impl FeatureHistogram {
    pub fn new(descriptor: DescriptorId, bins: Vec<f64>) -> Self {
        let empty = descriptor.is_histogram() && bins.iter().all(|&b| b == 0.0);
        FeatureHistogram { descriptor, bins, empty }
    }

    pub fn len(&self) -> usize {
        self.bins.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    pub fn sum(&self) -> f64 {
        self.bins.iter().sum()
    }
}

/// Integer counts per bin.
pub fn bin_counts(codes: impl IntoIterator<Item = usize>, bin_count: usize) -> Result<Vec<u64>> {
    let mut counts = vec![0u64; bin_count];
    for code in codes {
        match counts.get_mut(code) {
            Some(c) => *c += 1,
            None => return Err(Error::invalid(format!("code {code} outside {bin_count} bins"))),
        }
    }
    Ok(counts)
}

/// Counts divided by their total. All zeros when nothing was counted.
pub fn normalize_counts(counts: &[u64]) -> Vec<f64> {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return vec![0.0; counts.len()];
    }
    let t = total as f64;
    counts.iter().map(|&c| c as f64 / t).collect()
}

/// Normalized histogram of `codes` over `bin_count` bins.
pub fn histogram(codes: &[usize], bin_count: usize) -> Result<Vec<f64>> {
    Ok(normalize_counts(&bin_counts(codes.iter().copied(), bin_count)?))
}

/// Concatenate normalized sub-histograms, scaling each by `1 / parts.len()`
/// so the result sums to 1.
pub(crate) fn concat_equal_weight(parts: &[Vec<f64>]) -> Vec<f64> {
    let w = 1.0 / parts.len() as f64;
    parts.iter().flat_map(|p| p.iter().map(move |&v| v * w)).collect()
}
