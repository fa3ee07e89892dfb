//! The eight texture attributes and a single entry point that turns a patch
//! into a feature vector for any of them.

pub mod glcm;
pub mod lbp;
pub mod lri;
pub mod semblance;

use crate::error::Result;
use crate::grid::Patch;
use crate::histogram::{DescriptorId, FeatureHistogram};

pub use lri::LriConfig;

/// A descriptor together with its parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Descriptor {
    pub id: DescriptorId,
    pub glcm_levels: usize,
    pub glcm_offsets: Vec<(isize, isize)>,
    /// (P, R) for LBP, CLBP, ELBP and CLDP.
    pub samples: usize,
    pub radius: f64,
    pub lri: LriConfig,
    pub semblance_half_window: (usize, usize),
}

impl Descriptor {
    pub fn new(id: DescriptorId) -> Self {
        Descriptor {
            id,
            glcm_levels: glcm::DEFAULT_LEVELS,
            glcm_offsets: glcm::DEFAULT_OFFSETS.to_vec(),
            samples: 16,
            radius: 2.0,
            lri: LriConfig::default(),
            semblance_half_window: semblance::DEFAULT_HALF_WINDOW,
        }
    }

    /// Length of the vector produced by [`Descriptor::featurize`].
    pub fn feature_dim(&self) -> usize {
        let lbp_bins = self.samples + 2;
        match self.id {
            DescriptorId::Glcm => self.glcm_offsets.len() * glcm::ATTRIBUTES_PER_DIRECTION,
            DescriptorId::Semblance => semblance::SEMBLANCE_BINS,
            DescriptorId::Lbp => lbp_bins,
            DescriptorId::Clbp | DescriptorId::Elbp => lbp_bins * lbp_bins * 2,
            DescriptorId::Cldp => lbp_bins * lbp_bins * 2 + lbp_bins,
            DescriptorId::Mclbp => lbp::MULTISCALE.iter().map(|&(p, _)| (p + 2) * (p + 2) * 2).sum(),
            DescriptorId::Lri => self.lri.feature_len(),
        }
    }

    pub fn featurize(&self, patch: &Patch) -> Result<FeatureHistogram> {
        let (p, r) = (self.samples, self.radius);
        match self.id {
            DescriptorId::Glcm => glcm::glcm_feature(patch, self.glcm_levels, &self.glcm_offsets),
            DescriptorId::Semblance => semblance::semblance_patch_feature(patch, self.semblance_half_window),
            DescriptorId::Lbp => lbp::lbp_feature(patch, p, r),
            DescriptorId::Clbp => lbp::clbp_feature(patch, p, r),
            DescriptorId::Mclbp => lbp::mclbp_feature(patch),
            DescriptorId::Elbp => lbp::elbp_feature(patch, p, r),
            DescriptorId::Cldp => lbp::cldp_feature(patch, p, r),
            DescriptorId::Lri => lri::lri_feature(patch, &self.lri),
        }
    }
}

impl From<DescriptorId> for Descriptor {
    fn from(id: DescriptorId) -> Self {
        Descriptor::new(id)
    }
}
