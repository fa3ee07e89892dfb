//! Local radius index, amplitude variant (LRI-A).
//!
//! For each pixel and direction the code is the signed length of the run of
//! neighbors that sit above (or below) the pixel by more than a threshold.

use crate::error::{Error, Result};
use crate::grid::{mean_std, Patch};
use crate::histogram::{bin_counts, concat_equal_weight, normalize_counts, DescriptorId, FeatureHistogram};

/// Unit steps (row, col) for E, NE, N, NW, W, SW, S, SE.
pub const DIRECTIONS: [(isize, isize); 8] = [
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LriConfig {
    /// Edge threshold as a multiple of the patch standard deviation.
    pub t_factor: f64,
    /// Longest run that is distinguished.
    pub k: usize,
}

impl Default for LriConfig {
    fn default() -> Self {
        LriConfig { t_factor: 0.5, k: 3 }
    }
}

impl LriConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::invalid("LRI run length K must be at least 1"));
        }
        if !(self.t_factor > 0.0) || !self.t_factor.is_finite() {
            return Err(Error::invalid(format!("LRI threshold factor must be positive, got {}", self.t_factor)));
        }
        Ok(())
    }

    /// Bins per direction, `2K + 1`.
    pub fn bins_per_direction(&self) -> usize {
        2 * self.k + 1
    }

    pub fn feature_len(&self) -> usize {
        self.bins_per_direction() * DIRECTIONS.len()
    }
}

/// Code from a pixel value and its next `k` neighbors along one direction.
///
/// 0 when the first neighbor is within `t` of `x`. Otherwise the first
/// neighbor fixes the sign and the result is the length of the run of
/// neighbors staying beyond `x +- t` on that side, capped at `k`.
pub fn lri_a_code_from(x: f64, neighbors: &[f64], t: f64, k: usize) -> i32 {
    let Some(&first) = neighbors.first() else {
        return 0;
    };
    if (x - first).abs() <= t {
        return 0;
    }
    let above = first > x + t;
    let run = neighbors
        .iter()
        .take(k)
        .take_while(|&&a| if above { a > x + t } else { a < x - t })
        .count() as i32;
    if above {
        run
    } else {
        -run
    }
}

/// Code for `pixel` of `patch` along direction index `direction`
/// (see [`DIRECTIONS`]); neighbors past the border replicate the edge.
pub fn lri_a_code(patch: &Patch, pixel: (usize, usize), direction: usize, t: f64, k: usize) -> i32 {
    let (dr, dc) = DIRECTIONS[direction];
    let (r, c) = (pixel.0 as isize, pixel.1 as isize);
    let neighbors: Vec<f64> = (1..=k as isize)
        .map(|j| patch.get_clamped(r + j * dr, c + j * dc))
        .collect();
    lri_a_code_from(patch.get(pixel.0, pixel.1), &neighbors, t, k)
}

/// Per-direction histograms of codes in `[-K, K]` over the pixels at least
/// `K` from the border, concatenated in [`DIRECTIONS`] order with weight 1/8
/// each. The threshold is `t_factor` times the patch standard deviation.
pub fn lri_feature(patch: &Patch, cfg: &LriConfig) -> Result<FeatureHistogram> {
    cfg.validate()?;
    let k = cfg.k;
    let n = patch.size();
    if n <= 2 * k + 1 {
        return Err(Error::invalid(format!("patch side {n} too small for K = {k}")));
    }
    let (_, sd) = mean_std(patch.values());
    let t = cfg.t_factor * sd;
    let bins = cfg.bins_per_direction();
    let mut neighbors = vec![0.0; k];
    let parts = DIRECTIONS
        .iter()
        .map(|&(dr, dc)| {
            let mut codes = Vec::with_capacity((n - 2 * k) * (n - 2 * k));
            for r in k..n - k {
                for c in k..n - k {
                    for (j, slot) in neighbors.iter_mut().enumerate() {
                        let step = j as isize + 1;
                        let rr = (r as isize + step * dr) as usize;
                        let cc = (c as isize + step * dc) as usize;
                        *slot = patch.get(rr, cc);
                    }
                    let code = lri_a_code_from(patch.get(r, c), &neighbors, t, k);
                    codes.push((code + k as i32) as usize);
                }
            }
            bin_counts(codes, bins).map(|c| normalize_counts(&c))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(FeatureHistogram::new(DescriptorId::Lri, concat_equal_weight(&parts)))
}
